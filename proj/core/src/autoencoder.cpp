#include "fedtwin/autoencoder.hpp"

#include <algorithm>
#include <cmath>

#include "fedtwin/errors.hpp"
#include "fedtwin/io.hpp"
#include "fedtwin/rng.hpp"

namespace fedtwin::autoenc {

namespace {

std::vector<int> hidden_widths(ArchKind arch, bool encoder) {
  if (arch == ArchKind::kKs) return {100, 100, 100};
  return encoder ? std::vector<int>{800, 400, 200}
                 : std::vector<int>{200, 400, 800};
}

std::vector<nn::LayerSpec> side_specs(int from, int to,
                                      const std::vector<int>& hidden) {
  std::vector<nn::LayerSpec> specs;
  int width = from;
  for (int h : hidden) {
    specs.push_back({width, h, nn::Activation::kElu});
    width = h;
  }
  specs.push_back({width, to, nn::Activation::kLinear});
  return specs;
}

void check_dims(int input_dim, int latent_dim) {
  if (latent_dim < 1) throw config_error("model.R: must be >= 1");
  if (input_dim <= latent_dim) {
    throw config_error("model.R: latent dimension " +
                       std::to_string(latent_dim) +
                       " must be smaller than the input dimension " +
                       std::to_string(input_dim));
  }
}

}  // namespace

ArchKind arch_from_name(const std::string& name) {
  if (name == "ks") return ArchKind::kKs;
  if (name == "sst") return ArchKind::kSst;
  throw config_error("model.arch: unknown architecture '" + name + "'");
}

const char* arch_name(ArchKind arch) {
  return arch == ArchKind::kKs ? "ks" : "sst";
}

std::vector<nn::LayerSpec> encoder_specs(int input_dim, int latent_dim,
                                         ArchKind arch) {
  check_dims(input_dim, latent_dim);
  return side_specs(input_dim, latent_dim, hidden_widths(arch, true));
}

std::vector<nn::LayerSpec> decoder_specs(int input_dim, int latent_dim,
                                         ArchKind arch) {
  check_dims(input_dim, latent_dim);
  return side_specs(latent_dim, input_dim, hidden_widths(arch, false));
}

std::vector<nn::LayerSpec> combined_specs(int input_dim, int latent_dim,
                                          ArchKind arch) {
  auto specs = encoder_specs(input_dim, latent_dim, arch);
  auto dec = decoder_specs(input_dim, latent_dim, arch);
  specs.insert(specs.end(), dec.begin(), dec.end());
  return specs;
}

Autoencoder build_autoencoder(int input_dim, int latent_dim, ArchKind arch,
                              std::uint64_t seed) {
  Autoencoder ae;
  ae.encoder =
      nn::build_network(encoder_specs(input_dim, latent_dim, arch), seed);
  ae.decoder = nn::build_network(decoder_specs(input_dim, latent_dim, arch),
                                 mix64(seed) ^ 1);
  return ae;
}

Autoencoder split_combined(const nn::Network& combined, ArchKind arch) {
  const std::size_t encoder_layers = hidden_widths(arch, true).size() + 1;
  if (combined.layers.size() <= encoder_layers) {
    throw std::invalid_argument("split_combined: network too shallow");
  }
  Autoencoder ae;
  auto take = [&](std::size_t begin, std::size_t end) {
    nn::Network part;
    for (std::size_t l = begin; l < end; ++l) {
      part.layers.push_back(combined.layers[l]);
      part.weights.push_back(combined.weights[l]);
      part.biases.push_back(combined.biases[l]);
    }
    return part;
  };
  ae.encoder = take(0, encoder_layers);
  ae.decoder = take(encoder_layers, combined.layers.size());
  return ae;
}

nn::Network combined_network(const Autoencoder& ae) {
  if (ae.encoder.output_width() != ae.decoder.input_width() ||
      ae.encoder.input_width() != ae.decoder.output_width()) {
    throw std::invalid_argument("autoencoder: encoder/decoder do not chain");
  }
  nn::Network net = ae.encoder;
  net.layers.insert(net.layers.end(), ae.decoder.layers.begin(),
                    ae.decoder.layers.end());
  net.weights.insert(net.weights.end(), ae.decoder.weights.begin(),
                     ae.decoder.weights.end());
  net.biases.insert(net.biases.end(), ae.decoder.biases.begin(),
                    ae.decoder.biases.end());
  return net;
}

Eigen::VectorXd encode(const Autoencoder& ae, const Eigen::VectorXd& u) {
  return nn::forward(ae.encoder, u);
}

Eigen::VectorXd decode(const Autoencoder& ae, const Eigen::VectorXd& z) {
  return nn::forward(ae.decoder, z);
}

Eigen::VectorXd reconstruct(const Autoencoder& ae, const Eigen::VectorXd& u) {
  return decode(ae, encode(ae, u));
}

TrainedAutoencoder train_autoencoder(const Eigen::MatrixXd& data,
                                     const TrainConfig& config,
                                     fed::TrainMode mode,
                                     const Eigen::MatrixXd& external_validation,
                                     const fed::RoundObserver& on_round) {
  const int input_dim = static_cast<int>(data.rows());
  const int n = static_cast<int>(data.cols());
  if (n < 1) throw config_error("autoencoder: no training columns");
  if (n < config.fed.clients && mode == fed::TrainMode::kFederated) {
    throw config_error("autoencoder: fewer columns than clients");
  }
  if (!(config.train_fraction > 0.0) || config.train_fraction > 1.0) {
    throw config_error("train_fraction: must lie in (0, 1]");
  }
  const bool external_val = external_validation.cols() > 0;
  if (external_val && external_validation.rows() != input_dim) {
    throw std::invalid_argument("autoencoder: validation dimension mismatch");
  }

  TrainedAutoencoder trained;

  // Held-out validation split unless an external set was supplied.
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  int n_train = n;
  if (!external_val) {
    Rng split_rng(stream_seed(config.fed.seed, 2, 0));
    split_rng.shuffle(order);
    n_train =
        std::max(1, static_cast<int>(std::floor(config.train_fraction * n)));
    if (n_train >= n && n > 1) n_train = n - 1;
  }

  Eigen::MatrixXd train(input_dim, n_train);
  for (int i = 0; i < n_train; ++i) {
    train.col(i) = data.col(order[static_cast<std::size_t>(i)]);
  }

  if (config.normalize) {
    const double max_abs = train.cwiseAbs().maxCoeff();
    if (!(max_abs > 0.0)) {
      throw config_error("autoencoder: training data is identically zero");
    }
    trained.input_scale = max_abs;
    train /= max_abs;
  }

  Eigen::MatrixXd validation_cols;
  if (external_val) {
    validation_cols = external_validation / trained.input_scale;
  } else {
    validation_cols.resize(input_dim, n - n_train);
    for (int i = n_train; i < n; ++i) {
      validation_cols.col(i - n_train) =
          data.col(order[static_cast<std::size_t>(i)]) / trained.input_scale;
    }
  }

  fed::Dataset train_set{train, train};
  fed::Dataset val_set{validation_cols, validation_cols};

  auto specs = combined_specs(input_dim, config.latent_dim, config.arch);
  fed::TrainResult result;
  if (mode == fed::TrainMode::kFederated) {
    auto shards =
        fed::partition_iid(train_set, config.fed.clients, config.fed.seed);
    result = fed::run_federated(specs, shards, config.fed, val_set, on_round);
  } else {
    result = fed::run_centralized(specs, train_set, config.fed.rounds,
                                  config.centralized_batch, config.fed.lr,
                                  config.fed.seed, val_set, on_round);
  }
  trained.model = split_combined(result.model, config.arch);
  trained.logs = std::move(result.logs);
  trained.warnings = std::move(result.warnings);
  return trained;
}

Eigen::MatrixXd reconstruct_columns(const TrainedAutoencoder& trained,
                                    const Eigen::MatrixXd& fields) {
  const double s = trained.input_scale;
  Eigen::MatrixXd normalized = fields / s;
  Eigen::MatrixXd out(fields.rows(), fields.cols());
  constexpr Eigen::Index kChunk = 512;
  for (Eigen::Index c0 = 0; c0 < fields.cols(); c0 += kChunk) {
    Eigen::Index cols = std::min<Eigen::Index>(kChunk, fields.cols() - c0);
    Eigen::MatrixXd z =
        nn::forward_batch(trained.model.encoder, normalized.middleCols(c0, cols));
    out.middleCols(c0, cols) = nn::forward_batch(trained.model.decoder, z) * s;
  }
  return out;
}

double reconstruction_mse(const TrainedAutoencoder& trained,
                          const Eigen::MatrixXd& fields) {
  if (fields.cols() == 0) {
    throw std::invalid_argument("reconstruction_mse: empty field set");
  }
  Eigen::MatrixXd recon = reconstruct_columns(trained, fields);
  return (recon - fields).squaredNorm() /
         static_cast<double>(fields.size());
}

void save_autoencoder(const std::filesystem::path& path,
                      const Autoencoder& ae) {
  auto os = io::open_output(path);
  io::write_u32(os, 2);
  nn::write_network_record(os, ae.encoder);
  nn::write_network_record(os, ae.decoder);
  if (!os) throw config_error("failed writing " + path.string());
}

Autoencoder load_autoencoder(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  const auto count = io::read_u32(is, "network count");
  if (count != 2) {
    throw config_error("autoencoder checkpoint must hold 2 networks, found " +
                       std::to_string(count));
  }
  Autoencoder ae;
  ae.encoder = nn::read_network_record(is);
  ae.decoder = nn::read_network_record(is);
  if (ae.encoder.output_width() != ae.decoder.input_width()) {
    throw config_error("autoencoder checkpoint: encoder/decoder mismatch");
  }
  return ae;
}

}  // namespace fedtwin::autoenc
