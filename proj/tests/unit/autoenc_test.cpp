#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "fedtwin/autoencoder.hpp"
#include "fedtwin/errors.hpp"
#include "fedtwin/rng.hpp"

using namespace fedtwin;

namespace {

Eigen::MatrixXd random_columns(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-1.0, 1.0);
  }
  return m;
}

}  // namespace

TEST_CASE("architecture widths match the two shipped layouts") {
  auto ks = autoenc::encoder_specs(64, 8, autoenc::ArchKind::kKs);
  REQUIRE(ks.size() == 4);
  CHECK(ks[0].input_width == 64);
  CHECK(ks[0].output_width == 100);
  CHECK(ks[1].output_width == 100);
  CHECK(ks[2].output_width == 100);
  CHECK(ks[3].output_width == 8);
  CHECK(ks[0].activation == nn::Activation::kElu);
  CHECK(ks[3].activation == nn::Activation::kLinear);

  auto ks_dec = autoenc::decoder_specs(64, 8, autoenc::ArchKind::kKs);
  CHECK(ks_dec[0].input_width == 8);
  CHECK(ks_dec[3].output_width == 64);

  auto sst = autoenc::encoder_specs(1000, 10, autoenc::ArchKind::kSst);
  CHECK(sst[0].output_width == 800);
  CHECK(sst[1].output_width == 400);
  CHECK(sst[2].output_width == 200);
  CHECK(sst[3].output_width == 10);

  auto sst_dec = autoenc::decoder_specs(1000, 10, autoenc::ArchKind::kSst);
  CHECK(sst_dec[0].output_width == 200);
  CHECK(sst_dec[1].output_width == 400);
  CHECK(sst_dec[2].output_width == 800);
  CHECK(sst_dec[3].output_width == 1000);

  // bottleneck contract
  CHECK_THROWS_AS(autoenc::encoder_specs(8, 8, autoenc::ArchKind::kKs),
                  config_error);
  CHECK_THROWS_AS(autoenc::build_autoencoder(8, 9, autoenc::ArchKind::kKs, 1),
                  config_error);
}

TEST_CASE("encode/decode shapes and zero-weight collapse") {
  autoenc::Autoencoder ae =
      autoenc::build_autoencoder(64, 8, autoenc::ArchKind::kKs, 3);
  Eigen::VectorXd u = random_columns(64, 1, 9);
  CHECK(autoenc::encode(ae, u).size() == 8);
  CHECK(autoenc::decode(ae, Eigen::VectorXd::Zero(8)).size() == 64);
  CHECK(ae.input_dim() == 64);
  CHECK(ae.latent_dim() == 8);

  // zero all parameters -> reconstruction identically zero
  autoenc::Autoencoder zero = ae;
  zero.encoder = nn::unflatten(
      nn::ParamVector::Zero(zero.encoder.parameter_count()),
      zero.encoder.layers);
  zero.decoder = nn::unflatten(
      nn::ParamVector::Zero(zero.decoder.parameter_count()),
      zero.decoder.layers);
  CHECK(autoenc::reconstruct(zero, u).isZero(0.0));
}

TEST_CASE("reconstruct equals the concatenated network forward pass") {
  autoenc::Autoencoder ae =
      autoenc::build_autoencoder(32, 4, autoenc::ArchKind::kKs, 11);
  nn::Network combined = autoenc::combined_network(ae);
  Eigen::VectorXd u = random_columns(32, 1, 21);
  Eigen::VectorXd via_pair = autoenc::reconstruct(ae, u);
  Eigen::VectorXd via_combined = nn::forward(combined, u);
  CHECK(via_pair == via_combined);

  // split undoes the concatenation
  autoenc::Autoencoder back =
      autoenc::split_combined(combined, autoenc::ArchKind::kKs);
  CHECK(nn::flatten(back.encoder) == nn::flatten(ae.encoder));
  CHECK(nn::flatten(back.decoder) == nn::flatten(ae.decoder));
}

TEST_CASE("train_autoencoder with zero lr keeps a constant loss trajectory") {
  Eigen::MatrixXd data = random_columns(16, 40, 17);
  autoenc::TrainConfig cfg;
  cfg.latent_dim = 3;
  cfg.fed.lr = 0.0;
  cfg.fed.rounds = 3;
  cfg.fed.clients = 4;
  cfg.fed.seed = 2;
  auto trained =
      autoenc::train_autoencoder(data, cfg, fed::TrainMode::kFederated);
  REQUIRE(trained.logs.size() == 4);
  for (const auto& log : trained.logs) {
    CHECK(log.val_loss == trained.logs.front().val_loss);
    CHECK(std::isfinite(log.train_loss));
  }
}

TEST_CASE("training reduces reconstruction error on low-rank data") {
  // rank-2 data with noise; a 2-dim bottleneck should capture most of it
  Rng rng(5);
  Eigen::VectorXd mode1(12), mode2(12);
  for (int i = 0; i < 12; ++i) {
    mode1[i] = rng.uniform(-1.0, 1.0);
    mode2[i] = rng.uniform(-1.0, 1.0);
  }
  Eigen::MatrixXd data(12, 200);
  for (int c = 0; c < 200; ++c) {
    data.col(c) = rng.uniform(-1.0, 1.0) * mode1 + rng.uniform(-1.0, 1.0) * mode2;
  }

  autoenc::TrainConfig cfg;
  cfg.latent_dim = 2;
  cfg.fed.lr = 0.05;
  cfg.fed.rounds = 40;
  cfg.fed.clients = 4;
  cfg.fed.batch_size = 8;
  cfg.fed.seed = 3;
  cfg.centralized_batch = 32;
  auto trained =
      autoenc::train_autoencoder(data, cfg, fed::TrainMode::kCentralized);
  CHECK(trained.logs.back().val_loss < 0.5 * trained.logs.front().val_loss);

  const double mse = autoenc::reconstruction_mse(trained, data);
  CHECK(mse < trained.logs.front().val_loss * trained.input_scale *
                  trained.input_scale);
}

TEST_CASE("normalization scale comes from the training columns") {
  Eigen::MatrixXd data = random_columns(10, 30, 7) * 3.0;
  autoenc::TrainConfig cfg;
  cfg.latent_dim = 2;
  cfg.fed.lr = 0.0;
  cfg.fed.rounds = 1;
  cfg.fed.clients = 2;
  auto trained =
      autoenc::train_autoencoder(data, cfg, fed::TrainMode::kFederated);
  CHECK(trained.input_scale > 0.0);
  CHECK(trained.input_scale <= 3.0);

  cfg.normalize = false;
  auto raw = autoenc::train_autoencoder(data, cfg, fed::TrainMode::kFederated);
  CHECK(raw.input_scale == 1.0);
}

TEST_CASE("checkpoint round trip and malformed preamble") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fedtwin_autoenc_test";
  fs::create_directories(dir);
  const fs::path file = dir / "ae.bin";

  autoenc::Autoencoder ae =
      autoenc::build_autoencoder(24, 3, autoenc::ArchKind::kKs, 5);
  autoenc::save_autoencoder(file, ae);
  autoenc::Autoencoder back = autoenc::load_autoencoder(file);
  CHECK(nn::flatten(back.encoder) == nn::flatten(ae.encoder));
  CHECK(nn::flatten(back.decoder) == nn::flatten(ae.decoder));

  {
    std::ofstream bad(dir / "bad.bin", std::ios::binary);
    const unsigned char three[4] = {3, 0, 0, 0};
    bad.write(reinterpret_cast<const char*>(three), 4);
  }
  CHECK_THROWS_AS(autoenc::load_autoencoder(dir / "bad.bin"), config_error);
  fs::remove_all(dir);
}
