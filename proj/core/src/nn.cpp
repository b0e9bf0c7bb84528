#include "fedtwin/nn.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "fedtwin/errors.hpp"
#include "fedtwin/io.hpp"
#include "fedtwin/rng.hpp"

namespace fedtwin::nn {

namespace {

constexpr char kMagic[6] = "FROM1";
constexpr int kLossChunk = 1024;

void apply_activation(Activation act, Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kElu:
      z = (z.array() >= 0.0).select(z.array(), z.array().exp() - 1.0);
      break;
    case Activation::kLinear:
      break;
  }
}

// Derivative evaluated from the pre-activation values.
Eigen::ArrayXXd activation_derivative(Activation act,
                                      const Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::kRelu:
      return (z.array() > 0.0).cast<double>();
    case Activation::kElu:
      return (z.array() >= 0.0).select(Eigen::ArrayXXd::Ones(z.rows(), z.cols()),
                                       z.array().exp());
    case Activation::kLinear:
      return Eigen::ArrayXXd::Ones(z.rows(), z.cols());
  }
  return Eigen::ArrayXXd::Ones(z.rows(), z.cols());
}

}  // namespace

std::uint32_t activation_code(Activation a) {
  return static_cast<std::uint32_t>(a);
}

Activation activation_from_code(std::uint32_t code) {
  if (code > 2) {
    throw config_error("unknown activation code " + std::to_string(code));
  }
  return static_cast<Activation>(code);
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kElu:
      return "elu";
    case Activation::kLinear:
      return "linear";
  }
  return "?";
}

void validate_specs(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw config_error("network needs at least one layer");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].input_width < 1 || specs[i].output_width < 1) {
      throw config_error("layer " + std::to_string(i) + ": widths must be >= 1");
    }
    if (i > 0 && specs[i - 1].output_width != specs[i].input_width) {
      throw config_error("layer " + std::to_string(i) + ": input width " +
                         std::to_string(specs[i].input_width) +
                         " does not chain with previous output width " +
                         std::to_string(specs[i - 1].output_width));
    }
  }
}

std::int64_t parameter_count(const std::vector<LayerSpec>& specs) {
  std::int64_t n = 0;
  for (const auto& s : specs) {
    n += static_cast<std::int64_t>(s.output_width) * s.input_width +
         s.output_width;
  }
  return n;
}

std::int64_t Network::parameter_count() const {
  return nn::parameter_count(layers);
}

Network build_network(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  validate_specs(specs);
  Network net;
  net.layers = specs;
  net.weights.reserve(specs.size());
  net.biases.reserve(specs.size());
  Rng rng(mix64(seed));
  for (const auto& s : specs) {
    double bound = std::sqrt(6.0 / (s.input_width + s.output_width));
    Eigen::MatrixXd w(s.output_width, s.input_width);
    // Row-major fill so the draw order matches the flatten() layout.
    for (int r = 0; r < s.output_width; ++r) {
      for (int c = 0; c < s.input_width; ++c) {
        w(r, c) = rng.uniform(-bound, bound);
      }
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(s.output_width));
  }
  return net;
}

Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& xs) {
  if (xs.rows() != net.input_width()) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  Eigen::MatrixXd a = xs;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Eigen::MatrixXd z = net.weights[l] * a;
    z.colwise() += net.biases[l];
    apply_activation(net.layers[l].activation, z);
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x) {
  return forward_batch(net, x);
}

double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("mse_loss: length mismatch");
  }
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double mean_loss(const Network& net, const Eigen::MatrixXd& xs,
                 const Eigen::MatrixXd& ys) {
  if (xs.cols() != ys.cols()) {
    throw std::invalid_argument("mean_loss: example count mismatch");
  }
  if (xs.cols() == 0) throw std::invalid_argument("mean_loss: empty dataset");
  const auto n = xs.cols();
  const auto d = ys.rows();
  double total = 0.0;
  for (Eigen::Index c0 = 0; c0 < n; c0 += kLossChunk) {
    Eigen::Index cols = std::min<Eigen::Index>(kLossChunk, n - c0);
    Eigen::MatrixXd pred = forward_batch(net, xs.middleCols(c0, cols));
    total += (pred - ys.middleCols(c0, cols)).squaredNorm();
  }
  return total / static_cast<double>(n * d);
}

ParamVector backward(const Network& net, const Eigen::MatrixXd& xs,
                     const Eigen::MatrixXd& ys) {
  if (xs.cols() == 0) throw std::invalid_argument("backward: empty batch");
  if (xs.cols() != ys.cols()) {
    throw std::invalid_argument("backward: example count mismatch");
  }
  if (xs.rows() != net.input_width() || ys.rows() != net.output_width()) {
    throw std::invalid_argument("backward: dimension mismatch");
  }

  const std::size_t depth = net.layers.size();
  std::vector<Eigen::MatrixXd> activations(depth + 1);
  std::vector<Eigen::MatrixXd> pre(depth);
  activations[0] = xs;
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l] = net.weights[l] * activations[l];
    pre[l].colwise() += net.biases[l];
    activations[l + 1] = pre[l];
    apply_activation(net.layers[l].activation, activations[l + 1]);
  }

  const double batch = static_cast<double>(xs.cols());
  const double dim = static_cast<double>(ys.rows());
  // d(mean-over-examples, mean-over-components MSE)/d(output)
  Eigen::MatrixXd delta =
      (activations[depth] - ys) * (2.0 / (batch * dim));

  ParamVector grad(parameter_count(net.layers));
  Eigen::Index offset = grad.size();
  for (std::size_t l = depth; l-- > 0;) {
    delta.array() *= activation_derivative(net.layers[l].activation, pre[l]);
    const auto& s = net.layers[l];
    offset -= s.output_width;
    grad.segment(offset, s.output_width) = delta.rowwise().sum();
    offset -= static_cast<Eigen::Index>(s.output_width) * s.input_width;
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>
        gw(grad.data() + offset, s.output_width, s.input_width);
    gw.noalias() = delta * activations[l].transpose();
    if (l > 0) {
      delta = net.weights[l].transpose() * delta;
    }
  }
  return grad;
}

void sgd_step_inplace(Network& net, const ParamVector& grad, double lr) {
  if (lr <= 0.0) throw std::invalid_argument("sgd_step: lr must be > 0");
  if (grad.size() != net.parameter_count()) {
    throw std::invalid_argument("sgd_step: gradient layout mismatch");
  }
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& s = net.layers[l];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        gw(grad.data() + offset, s.output_width, s.input_width);
    net.weights[l] -= lr * gw;
    offset += static_cast<Eigen::Index>(s.output_width) * s.input_width;
    net.biases[l] -= lr * grad.segment(offset, s.output_width);
    offset += s.output_width;
  }
}

Network sgd_step(const Network& net, const ParamVector& grad, double lr) {
  Network out = net;
  sgd_step_inplace(out, grad, lr);
  return out;
}

ParamVector flatten(const Network& net) {
  ParamVector values(net.parameter_count());
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& s = net.layers[l];
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>
        w(values.data() + offset, s.output_width, s.input_width);
    w = net.weights[l];
    offset += static_cast<Eigen::Index>(s.output_width) * s.input_width;
    values.segment(offset, s.output_width) = net.biases[l];
    offset += s.output_width;
  }
  return values;
}

void unflatten_into(const ParamVector& values, Network& net) {
  if (values.size() != net.parameter_count()) {
    throw std::invalid_argument("unflatten: length " +
                                std::to_string(values.size()) +
                                " does not match layout length " +
                                std::to_string(net.parameter_count()));
  }
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& s = net.layers[l];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        w(values.data() + offset, s.output_width, s.input_width);
    net.weights[l] = w;
    offset += static_cast<Eigen::Index>(s.output_width) * s.input_width;
    net.biases[l] = values.segment(offset, s.output_width);
    offset += s.output_width;
  }
}

Network unflatten(const ParamVector& values,
                  const std::vector<LayerSpec>& specs) {
  validate_specs(specs);
  Network net;
  net.layers = specs;
  net.weights.resize(specs.size());
  net.biases.resize(specs.size());
  for (std::size_t l = 0; l < specs.size(); ++l) {
    net.weights[l].resize(specs[l].output_width, specs[l].input_width);
    net.biases[l].resize(specs[l].output_width);
  }
  unflatten_into(values, net);
  return net;
}

void write_network_record(std::ostream& os, const Network& net) {
  io::write_magic(os, kMagic);
  io::write_u32(os, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& s : net.layers) {
    io::write_u32(os, static_cast<std::uint32_t>(s.input_width));
    io::write_u32(os, static_cast<std::uint32_t>(s.output_width));
    io::write_u32(os, activation_code(s.activation));
  }
  ParamVector values = flatten(net);
  io::write_f64_array(os, std::span(values.data(),
                                    static_cast<std::size_t>(values.size())));
}

Network read_network_record(std::istream& is) {
  io::expect_magic(is, kMagic, "network checkpoint");
  std::uint32_t layer_count = io::read_u32(is, "layer count");
  if (layer_count == 0 || layer_count > 1024) {
    throw config_error("implausible layer count " +
                       std::to_string(layer_count));
  }
  std::vector<LayerSpec> specs(layer_count);
  for (auto& s : specs) {
    s.input_width = static_cast<int>(io::read_u32(is, "input width"));
    s.output_width = static_cast<int>(io::read_u32(is, "output width"));
    s.activation = activation_from_code(io::read_u32(is, "activation code"));
  }
  validate_specs(specs);
  ParamVector values(parameter_count(specs));
  io::read_f64_array(
      is, std::span(values.data(), static_cast<std::size_t>(values.size())),
      "network parameters");
  return unflatten(values, specs);
}

void save_network(const std::filesystem::path& path, const Network& net) {
  auto os = io::open_output(path);
  write_network_record(os, net);
  if (!os) throw config_error("failed writing " + path.string());
}

Network load_network(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  return read_network_record(is);
}

}  // namespace fedtwin::nn
