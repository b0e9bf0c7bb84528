#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "fedtwin/dynsys.hpp"
#include "fedtwin/errors.hpp"
#include "fedtwin/metrics.hpp"
#include "fedtwin/pod.hpp"
#include "fedtwin/rng.hpp"

using namespace fedtwin;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-1.0, 1.0);
  }
  return m;
}

}  // namespace

TEST_CASE("compute_pod on a padded diagonal matrix") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 2);
  a(0, 0) = 3.0;
  a(1, 1) = 4.0;
  pod::PodBasis basis = pod::compute_pod(a, 2);
  CHECK(basis.singular_values[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(basis.singular_values[1] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(basis.singular_values[0] >= basis.singular_values[1]);
  // leading mode aligns with the larger diagonal entry, sign fixed positive
  CHECK(basis.modes(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(basis.modes(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("rank-1 outer product has a single nonzero singular value") {
  Eigen::VectorXd u(5), v(3);
  u << 1, -2, 0.5, 3, -1;
  v << 2, 1, -1;
  Eigen::MatrixXd a = u * v.transpose();
  pod::PodBasis basis = pod::compute_pod(a, 3);
  CHECK(basis.singular_values[0] ==
        doctest::Approx(u.norm() * v.norm()).epsilon(1e-12));
  CHECK(basis.singular_values[1] < 1e-12);
  CHECK(basis.singular_values[2] < 1e-12);
}

TEST_CASE("full-rank SVD reconstructs the matrix") {
  Eigen::MatrixXd a = random_matrix(8, 5, 31);
  pod::PodBasis basis = pod::compute_pod(a, 5);
  // Phi * diag(sigma) * V^T == A; recover V^T = diag(1/sigma) Phi^T A
  Eigen::MatrixXd coeffs = basis.modes.transpose() * a;  // diag(sigma) V^T
  Eigen::MatrixXd back = basis.modes * coeffs;
  CHECK((back - a).cwiseAbs().maxCoeff() < 1e-10);

  // orthonormal modes
  Eigen::MatrixXd gram = basis.modes.transpose() * basis.modes;
  CHECK((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(pod::compute_pod(a, 0), config_error);
  CHECK_THROWS_AS(pod::compute_pod(a, 6), config_error);
}

TEST_CASE("projection and reconstruction identities") {
  Eigen::MatrixXd a = random_matrix(12, 7, 8);
  pod::PodBasis basis = pod::compute_pod(a, 4);

  // u = phi_1 -> alpha = e_1
  Eigen::VectorXd alpha = pod::project(basis, basis.modes.col(0));
  CHECK(alpha[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(alpha.tail(3).cwiseAbs().maxCoeff() < 1e-12);

  // alpha = e_k -> phi_k
  Eigen::VectorXd ek = Eigen::VectorXd::Zero(4);
  ek[2] = 1.0;
  CHECK((pod::reconstruct(basis, ek) - basis.modes.col(2)).norm() < 1e-13);

  // zero coefficients -> zero field
  CHECK(pod::reconstruct(basis, Eigen::VectorXd::Zero(4)).isZero(0.0));

  // residual after projection is orthogonal to every mode
  Eigen::VectorXd field = a.col(3);
  Eigen::VectorXd residual =
      field - pod::reconstruct(basis, pod::project(basis, field));
  CHECK((basis.modes.transpose() * residual).cwiseAbs().maxCoeff() < 1e-10);

  // project . reconstruct is the identity on span(Phi)
  Rng rng(13);
  Eigen::VectorXd coeffs(4);
  for (int i = 0; i < 4; ++i) coeffs[i] = rng.uniform(-3.0, 3.0);
  Eigen::VectorXd round =
      pod::project(basis, pod::reconstruct(basis, coeffs));
  CHECK((round - coeffs).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(pod::project(basis, Eigen::VectorXd::Zero(5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(pod::reconstruct(basis, Eigen::VectorXd::Zero(5)),
                  std::invalid_argument);
}

TEST_CASE("truncation error equals the discarded singular energy") {
  // the low-rank identity, checked against direct summation on real data
  dynsys::BurgersSampling sampling;
  sampling.grid_points = 64;
  sampling.t_samples = 16;
  sampling.nu_samples = 8;
  Eigen::MatrixXd a = dynsys::burgers_snapshots(sampling.spatial_grid(),
                                                sampling.parameter_grid());
  for (int rank : {2, 4, 8, 16}) {
    pod::PodBasis basis = pod::compute_pod(a, rank);
    Eigen::MatrixXd truncated =
        basis.modes * (basis.modes.transpose() * a);
    const double frobenius_sq = (a - truncated).squaredNorm();
    double tail = 0.0;
    for (Eigen::Index k = rank; k < basis.singular_values.size(); ++k) {
      tail += basis.singular_values[k] * basis.singular_values[k];
    }
    CHECK(frobenius_sq ==
          doctest::Approx(tail).epsilon(1e-8));
  }
}

TEST_CASE("rank_for_energy thresholds") {
  Eigen::VectorXd sigma(4);
  sigma << 10.0, 1.0, 0.1, 0.01;
  // energies: 100, 1, 0.01, 0.0001; total 101.0101
  CHECK(pod::rank_for_energy(sigma, 0.9) == 1);
  CHECK(pod::rank_for_energy(sigma, 0.999) == 2);
  CHECK(pod::rank_for_energy(sigma, 1.0) == 4);
  CHECK_THROWS_AS(pod::rank_for_energy(sigma, 0.0), config_error);
}

TEST_CASE("coefficient scaler maps to [-1,1] and back") {
  Eigen::MatrixXd coeffs = random_matrix(3, 20, 77) * 5.0;
  coeffs.row(2).setConstant(4.2);  // degenerate mode
  auto scaler = pod::CoefficientScaler::fit(coeffs);
  Eigen::MatrixXd scaled = scaler.scale_columns(coeffs);
  CHECK(scaled.topRows(2).maxCoeff() == doctest::Approx(1.0));
  CHECK(scaled.topRows(2).minCoeff() == doctest::Approx(-1.0));
  CHECK(scaled.row(2).cwiseAbs().maxCoeff() == 0.0);
  for (int c = 0; c < coeffs.cols(); ++c) {
    Eigen::VectorXd back = scaler.unscale(scaled.col(c));
    CHECK((back - coeffs.col(c)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("param scaler flags extrapolation") {
  std::vector<dynsys::ParamPoint> params = {{0.0, 0.001}, {2.0, 0.01},
                                            {1.0, 0.005}};
  auto scaler = pod::ParamScaler::fit(params);
  CHECK(scaler.in_range({0.5, 0.002}));
  CHECK_FALSE(scaler.in_range({2.5, 0.002}));
  CHECK_FALSE(scaler.in_range({0.5, 0.02}));
  Eigen::Vector2d s = scaler.scale({1.0, 0.0055});
  CHECK(s[0] == doctest::Approx(0.5));
  CHECK(s[1] == doctest::Approx(0.5));
}

TEST_CASE("train_rom with zero learning rate keeps the initial network") {
  dynsys::BurgersSampling sampling;
  sampling.grid_points = 32;
  sampling.t_samples = 8;
  sampling.nu_samples = 4;
  auto params = sampling.parameter_grid();
  Eigen::MatrixXd snaps =
      dynsys::burgers_snapshots(sampling.spatial_grid(), params);

  pod::RomConfig config;
  config.rank = 3;
  config.fed.lr = 0.0;
  config.fed.rounds = 2;
  config.fed.clients = 4;
  config.fed.seed = 5;
  config.hidden_layers = 2;
  config.hidden_width = 8;

  auto rom =
      pod::train_rom(snaps, params, config, fed::TrainMode::kFederated);
  nn::Network init = nn::build_network(
      {{2, 8, nn::Activation::kRelu},
       {8, 8, nn::Activation::kRelu},
       {8, 3, nn::Activation::kLinear}},
      5);
  CHECK(nn::flatten(rom.net) == nn::flatten(init));
  CHECK(rom.basis.rank() == 3);

  // bypass check: with the network forced to emit the true scaled
  // coefficients, the prediction equals the truncated truth
  dynsys::ParamPoint p = params[7];
  Eigen::VectorXd truth_coeffs =
      pod::project(rom.basis, snaps.col(7));
  pod::RomPrediction pred = pod::rom_predict(rom, p);
  CHECK(pred.extrapolated == false);
  Eigen::VectorXd truncated = pod::reconstruct(rom.basis, truth_coeffs);
  Eigen::VectorXd direct = pod::reconstruct(
      rom.basis, rom.coeff_scaler.unscale(rom.coeff_scaler.scale(truth_coeffs)));
  CHECK((direct - truncated).cwiseAbs().maxCoeff() < 1e-12);

  pod::RomPrediction outside = pod::rom_predict(rom, {5.0, 0.005});
  CHECK(outside.extrapolated == true);
}

TEST_CASE("rom training error decomposes into truncation plus fit") {
  dynsys::BurgersSampling sampling;
  sampling.grid_points = 48;
  sampling.t_samples = 12;
  sampling.nu_samples = 4;
  auto params = sampling.parameter_grid();
  Eigen::MatrixXd snaps =
      dynsys::burgers_snapshots(sampling.spatial_grid(), params);

  pod::RomConfig config;
  config.rank = 4;
  config.fed.lr = 0.02;
  config.fed.rounds = 60;
  config.fed.seed = 9;
  config.centralized_batch = 16;

  auto rom = pod::train_rom(snaps, params, config,
                            fed::TrainMode::kCentralized);
  const Eigen::VectorXd truth = snaps.col(20);
  const auto pred = pod::rom_predict(rom, params[20]);

  const Eigen::VectorXd truncated =
      pod::reconstruct(rom.basis, pod::project(rom.basis, truth));
  const double truncation = (truth - truncated).norm();
  const double fit = (truncated - pred.field).norm();
  const double total = (truth - pred.field).norm();
  CHECK(total <= truncation + fit + 1e-12);
}

TEST_CASE("basis file round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fedtwin_pod_test";
  fs::create_directories(dir);

  Eigen::MatrixXd a = random_matrix(10, 6, 3);
  pod::PodBasis basis = pod::compute_pod(a, 4);
  pod::save_basis(dir / "basis.podb", basis);
  pod::PodBasis back = pod::load_basis(dir / "basis.podb");
  CHECK(back.modes == basis.modes);
  CHECK(back.singular_values == basis.singular_values);
  CHECK(back.snapshot_count == 6);
  fs::remove_all(dir);
}
