#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "fedtwin/fed.hpp"
#include "fedtwin/nn.hpp"

namespace fedtwin::autoenc {

enum class ArchKind { kKs, kSst };

ArchKind arch_from_name(const std::string& name);
const char* arch_name(ArchKind arch);

// Encoder/decoder pair around a latent bottleneck of dimension R < N.
// Both shipped architectures have four affine layers on each side:
//   ks : N -> 100 -> 100 -> 100 -> R (elu hidden, linear bottleneck/output)
//   sst: N -> 800 -> 400 -> 200 -> R, mirrored decoder
struct Autoencoder {
  nn::Network encoder;
  nn::Network decoder;

  int input_dim() const { return encoder.input_width(); }
  int latent_dim() const { return encoder.output_width(); }
};

std::vector<nn::LayerSpec> encoder_specs(int input_dim, int latent_dim,
                                         ArchKind arch);
std::vector<nn::LayerSpec> decoder_specs(int input_dim, int latent_dim,
                                         ArchKind arch);
// Encoder then decoder as one trainable network.
std::vector<nn::LayerSpec> combined_specs(int input_dim, int latent_dim,
                                          ArchKind arch);

Autoencoder build_autoencoder(int input_dim, int latent_dim, ArchKind arch,
                              std::uint64_t seed);

// Splits a trained combined network back into the encoder/decoder pair.
Autoencoder split_combined(const nn::Network& combined, ArchKind arch);
nn::Network combined_network(const Autoencoder& ae);

Eigen::VectorXd encode(const Autoencoder& ae, const Eigen::VectorXd& u);
Eigen::VectorXd decode(const Autoencoder& ae, const Eigen::VectorXd& z);
Eigen::VectorXd reconstruct(const Autoencoder& ae, const Eigen::VectorXd& u);

struct TrainConfig {
  int latent_dim = 8;
  ArchKind arch = ArchKind::kKs;
  double train_fraction = 0.8;  // remainder becomes validation
  // Scale inputs by the global max-abs of the training columns; disable when
  // the caller already normalized (anomaly pipelines).
  bool normalize = true;
  fed::FedConfig fed;
  int centralized_batch = 320;
};

struct TrainedAutoencoder {
  Autoencoder model;
  double input_scale = 1.0;
  std::vector<fed::RoundLog> logs;
  std::vector<std::string> warnings;
};

// Reconstruction training (targets == inputs) on snapshot columns; federated
// mode partitions the columns IID across clients. Validation is an held-out
// split of the provided columns unless a non-empty external validation
// matrix is supplied.
TrainedAutoencoder train_autoencoder(const Eigen::MatrixXd& data,
                                     const TrainConfig& config,
                                     fed::TrainMode mode,
                                     const Eigen::MatrixXd& external_validation =
                                         Eigen::MatrixXd(),
                                     const fed::RoundObserver& on_round = {});

// Columns reconstructed in original units (normalization folded in).
Eigen::MatrixXd reconstruct_columns(const TrainedAutoencoder& trained,
                                    const Eigen::MatrixXd& fields);
// Mean per-example MSE of the reconstruction, in original units.
double reconstruction_mse(const TrainedAutoencoder& trained,
                          const Eigen::MatrixXd& fields);

// Checkpoint: a count-2 preamble (unsigned 32-bit little-endian), then the
// encoder and decoder as consecutive nn-core records.
void save_autoencoder(const std::filesystem::path& path, const Autoencoder& ae);
Autoencoder load_autoencoder(const std::filesystem::path& path);

}  // namespace fedtwin::autoenc
