#include "fedtwin/pod.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

#include "fedtwin/errors.hpp"
#include "fedtwin/io.hpp"
#include "fedtwin/rng.hpp"

namespace fedtwin::pod {

namespace {
constexpr char kMagic[6] = "PODB1";
}

PodBasis compute_pod(const Eigen::MatrixXd& snapshots, int rank) {
  const int max_rank =
      static_cast<int>(std::min(snapshots.rows(), snapshots.cols()));
  if (snapshots.size() == 0) {
    throw std::invalid_argument("compute_pod: empty snapshot matrix");
  }
  if (rank < 1 || rank > max_rank) {
    throw config_error("pod.R: rank " + std::to_string(rank) +
                       " outside [1, " + std::to_string(max_rank) + "]");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(snapshots, Eigen::ComputeThinU);

  PodBasis basis;
  basis.snapshot_count = static_cast<int>(snapshots.cols());
  basis.singular_values = svd.singularValues();
  basis.modes = svd.matrixU().leftCols(rank);
  // Sign convention: the largest-magnitude entry of each mode is positive.
  for (int k = 0; k < rank; ++k) {
    Eigen::Index imax;
    basis.modes.col(k).cwiseAbs().maxCoeff(&imax);
    if (basis.modes(imax, k) < 0.0) basis.modes.col(k) = -basis.modes.col(k);
  }
  return basis;
}

int rank_for_energy(const Eigen::VectorXd& singular_values, double fraction) {
  if (singular_values.size() == 0) {
    throw std::invalid_argument("rank_for_energy: empty spectrum");
  }
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw config_error("pod.energy_fraction: must lie in (0, 1]");
  }
  const double total = singular_values.squaredNorm();
  if (total == 0.0) return 1;
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < singular_values.size(); ++k) {
    cumulative += singular_values[k] * singular_values[k];
    if (cumulative >= fraction * total) return static_cast<int>(k) + 1;
  }
  return static_cast<int>(singular_values.size());
}

Eigen::VectorXd project(const PodBasis& basis, const Eigen::VectorXd& field) {
  if (field.size() != basis.modes.rows()) {
    throw std::invalid_argument("project: field length mismatch");
  }
  return basis.modes.transpose() * field;
}

Eigen::MatrixXd project_columns(const PodBasis& basis,
                                const Eigen::MatrixXd& fields) {
  if (fields.rows() != basis.modes.rows()) {
    throw std::invalid_argument("project: field length mismatch");
  }
  return basis.modes.transpose() * fields;
}

Eigen::VectorXd reconstruct(const PodBasis& basis,
                            const Eigen::VectorXd& coeffs) {
  if (coeffs.size() != basis.rank()) {
    throw std::invalid_argument("reconstruct: coefficient length mismatch");
  }
  return basis.modes * coeffs;
}

CoefficientScaler CoefficientScaler::fit(const Eigen::MatrixXd& coeffs) {
  if (coeffs.cols() == 0) {
    throw std::invalid_argument("scaler: no coefficient samples");
  }
  CoefficientScaler s;
  s.lo = coeffs.rowwise().minCoeff();
  s.hi = coeffs.rowwise().maxCoeff();
  return s;
}

Eigen::VectorXd CoefficientScaler::scale(const Eigen::VectorXd& coeffs) const {
  Eigen::VectorXd out(coeffs.size());
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    const double range = hi[i] - lo[i];
    out[i] = range > 0.0 ? 2.0 * (coeffs[i] - lo[i]) / range - 1.0 : 0.0;
  }
  return out;
}

Eigen::MatrixXd CoefficientScaler::scale_columns(
    const Eigen::MatrixXd& coeffs) const {
  Eigen::MatrixXd out(coeffs.rows(), coeffs.cols());
  for (Eigen::Index c = 0; c < coeffs.cols(); ++c) {
    out.col(c) = scale(coeffs.col(c));
  }
  return out;
}

Eigen::VectorXd CoefficientScaler::unscale(
    const Eigen::VectorXd& scaled) const {
  Eigen::VectorXd out(scaled.size());
  for (Eigen::Index i = 0; i < scaled.size(); ++i) {
    const double range = hi[i] - lo[i];
    out[i] = range > 0.0 ? lo[i] + 0.5 * (scaled[i] + 1.0) * range : lo[i];
  }
  return out;
}

ParamScaler ParamScaler::fit(const std::vector<dynsys::ParamPoint>& params) {
  if (params.empty()) throw std::invalid_argument("scaler: no parameters");
  ParamScaler s;
  s.t_lo = s.t_hi = params.front().t;
  s.nu_lo = s.nu_hi = params.front().nu;
  for (const auto& p : params) {
    s.t_lo = std::min(s.t_lo, p.t);
    s.t_hi = std::max(s.t_hi, p.t);
    s.nu_lo = std::min(s.nu_lo, p.nu);
    s.nu_hi = std::max(s.nu_hi, p.nu);
  }
  return s;
}

Eigen::Vector2d ParamScaler::scale(const dynsys::ParamPoint& p) const {
  const double t_range = t_hi - t_lo;
  const double nu_range = nu_hi - nu_lo;
  return {t_range > 0.0 ? (p.t - t_lo) / t_range : 0.0,
          nu_range > 0.0 ? (p.nu - nu_lo) / nu_range : 0.0};
}

bool ParamScaler::in_range(const dynsys::ParamPoint& p) const {
  return p.t >= t_lo && p.t <= t_hi && p.nu >= nu_lo && p.nu <= nu_hi;
}

TrainedRom train_rom(const Eigen::MatrixXd& snapshots,
                     const std::vector<dynsys::ParamPoint>& params,
                     const RomConfig& config, fed::TrainMode mode,
                     const fed::RoundObserver& on_round) {
  if (static_cast<std::size_t>(snapshots.cols()) != params.size()) {
    throw std::invalid_argument("train_rom: snapshots/params misaligned");
  }
  if (!(config.train_fraction > 0.0) || config.train_fraction > 1.0) {
    throw config_error("rom.train_fraction: must lie in (0, 1]");
  }

  // Shuffled train/validation split (dedicated stream off the run seed).
  const int n = static_cast<int>(params.size());
  Rng split_rng(stream_seed(config.fed.seed, 2, 0));
  std::vector<int> order = split_rng.permutation(n);
  int n_train = std::max(1, static_cast<int>(std::floor(
                                config.train_fraction * n)));
  if (n_train >= n && n > 1) n_train = n - 1;

  TrainedRom rom;

  Eigen::MatrixXd train_snaps(snapshots.rows(), n_train);
  std::vector<dynsys::ParamPoint> train_params(
      static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i) {
    train_snaps.col(i) = snapshots.col(order[static_cast<std::size_t>(i)]);
    train_params[static_cast<std::size_t>(i)] =
        params[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
  }

  const int max_rank =
      static_cast<int>(std::min(train_snaps.rows(), train_snaps.cols()));
  PodBasis full = compute_pod(train_snaps, max_rank);
  const int rank =
      config.rank > 0
          ? config.rank
          : rank_for_energy(full.singular_values, config.energy_fraction);
  if (rank > max_rank) {
    throw config_error("rom.R: rank " + std::to_string(rank) +
                       " exceeds max rank " + std::to_string(max_rank));
  }
  rom.basis.modes = full.modes.leftCols(rank);
  rom.basis.singular_values = std::move(full.singular_values);
  rom.basis.snapshot_count = full.snapshot_count;
  rom.mu_scaler = ParamScaler::fit(train_params);

  Eigen::MatrixXd train_coeffs = project_columns(rom.basis, train_snaps);
  rom.coeff_scaler = CoefficientScaler::fit(train_coeffs);

  auto make_dataset = [&](int begin, int count) {
    fed::Dataset d;
    d.inputs.resize(2, count);
    d.targets.resize(rank, count);
    for (int i = 0; i < count; ++i) {
      const int col = order[static_cast<std::size_t>(begin + i)];
      d.inputs.col(i) =
          rom.mu_scaler.scale(params[static_cast<std::size_t>(col)]);
      d.targets.col(i) = rom.coeff_scaler.scale(
          project(rom.basis, snapshots.col(col)));
    }
    return d;
  };

  fed::Dataset train = make_dataset(0, n_train);
  fed::Dataset validation =
      n_train < n ? make_dataset(n_train, n - n_train) : train;

  std::vector<nn::LayerSpec> specs;
  specs.push_back({2, config.hidden_width, nn::Activation::kRelu});
  for (int l = 1; l < config.hidden_layers; ++l) {
    specs.push_back(
        {config.hidden_width, config.hidden_width, nn::Activation::kRelu});
  }
  specs.push_back({config.hidden_width, rank, nn::Activation::kLinear});

  fed::TrainResult trained;
  if (mode == fed::TrainMode::kFederated) {
    auto shards =
        fed::partition_iid(train, config.fed.clients, config.fed.seed);
    trained = fed::run_federated(specs, shards, config.fed, validation,
                                 on_round);
  } else {
    trained = fed::run_centralized(specs, train, config.fed.rounds,
                                   config.centralized_batch, config.fed.lr,
                                   config.fed.seed, validation, on_round);
  }
  rom.net = std::move(trained.model);
  rom.logs = std::move(trained.logs);
  rom.warnings = std::move(trained.warnings);
  return rom;
}

RomPrediction rom_predict(const TrainedRom& rom, const dynsys::ParamPoint& p) {
  RomPrediction out;
  out.extrapolated = !rom.mu_scaler.in_range(p);
  Eigen::VectorXd scaled = nn::forward(rom.net, rom.mu_scaler.scale(p));
  out.coefficients = rom.coeff_scaler.unscale(scaled);
  out.field = reconstruct(rom.basis, out.coefficients);
  return out;
}

void save_basis(const std::filesystem::path& path, const PodBasis& basis) {
  auto os = io::open_output(path);
  io::write_magic(os, kMagic);
  io::write_u64(os, static_cast<std::uint64_t>(basis.modes.rows()));
  io::write_u64(os, static_cast<std::uint64_t>(basis.snapshot_count));
  io::write_u64(os, static_cast<std::uint64_t>(basis.rank()));
  io::write_f64_array(
      os, std::span(basis.modes.data(),
                    static_cast<std::size_t>(basis.modes.size())));
  io::write_f64_array(
      os, std::span(basis.singular_values.data(),
                    static_cast<std::size_t>(basis.singular_values.size())));
  if (!os) throw config_error("failed writing " + path.string());
}

PodBasis load_basis(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  io::expect_magic(is, kMagic, path.string());
  const auto rows = io::read_u64(is, "basis rows");
  const auto count = io::read_u64(is, "basis snapshot count");
  const auto rank = io::read_u64(is, "basis rank");
  if (rows == 0 || count == 0 || rank == 0 || rank > std::min(rows, count)) {
    throw config_error("implausible basis header in " + path.string());
  }
  PodBasis basis;
  basis.snapshot_count = static_cast<int>(count);
  basis.modes.resize(static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(rank));
  io::read_f64_array(
      is,
      std::span(basis.modes.data(), static_cast<std::size_t>(basis.modes.size())),
      "basis modes");
  const auto spectrum = std::min(rows, count);
  basis.singular_values.resize(static_cast<Eigen::Index>(spectrum));
  io::read_f64_array(is,
                     std::span(basis.singular_values.data(),
                               static_cast<std::size_t>(spectrum)),
                     "singular values");
  return basis;
}

}  // namespace fedtwin::pod
