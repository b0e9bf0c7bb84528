#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace fedtwin::nn {

enum class Activation : std::uint32_t { kRelu = 0, kElu = 1, kLinear = 2 };

std::uint32_t activation_code(Activation a);
Activation activation_from_code(std::uint32_t code);
const char* activation_name(Activation a);

struct LayerSpec {
  int input_width = 0;
  int output_width = 0;
  Activation activation = Activation::kLinear;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Throws config_error if widths are < 1 or consecutive layers do not chain.
void validate_specs(const std::vector<LayerSpec>& specs);

std::int64_t parameter_count(const std::vector<LayerSpec>& specs);

// Flat parameter vector in the canonical layout: per layer, the weight matrix
// row by row, then the bias vector.
using ParamVector = Eigen::VectorXd;

struct Network {
  std::vector<LayerSpec> layers;
  std::vector<Eigen::MatrixXd> weights;  // output_width x input_width
  std::vector<Eigen::VectorXd> biases;   // output_width

  int input_width() const { return layers.front().input_width; }
  int output_width() const { return layers.back().output_width; }
  std::int64_t parameter_count() const;
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
// Deterministic for a fixed seed.
Network build_network(const std::vector<LayerSpec>& specs, std::uint64_t seed);

Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x);

// Column-per-example variant; all training goes through this path.
Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& xs);

// Mean over components of the squared difference.
double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

// Mean per-example MSE over a dataset, evaluated in bounded-size chunks.
double mean_loss(const Network& net, const Eigen::MatrixXd& xs,
                 const Eigen::MatrixXd& ys);

// Gradient of the mean per-example MSE over the batch, in flatten() layout.
ParamVector backward(const Network& net, const Eigen::MatrixXd& xs,
                     const Eigen::MatrixXd& ys);

void sgd_step_inplace(Network& net, const ParamVector& grad, double lr);
Network sgd_step(const Network& net, const ParamVector& grad, double lr);

ParamVector flatten(const Network& net);
Network unflatten(const ParamVector& values, const std::vector<LayerSpec>& specs);
// Writes into an existing network of matching shape (no allocation).
void unflatten_into(const ParamVector& values, Network& net);

// Checkpoint format: magic "FROM1"; layer count, then per layer
// input width / output width / activation code, all unsigned 32-bit
// little-endian; then the flat parameters as little-endian binary64.
void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);
void write_network_record(std::ostream& os, const Network& net);
Network read_network_record(std::istream& is);

}  // namespace fedtwin::nn
