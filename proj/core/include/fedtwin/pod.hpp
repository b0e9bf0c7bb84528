#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <vector>

#include "fedtwin/dynsys.hpp"
#include "fedtwin/fed.hpp"
#include "fedtwin/nn.hpp"

namespace fedtwin::pod {

struct PodBasis {
  Eigen::MatrixXd modes;            // N_x x R, orthonormal columns
  Eigen::VectorXd singular_values;  // full spectrum, descending
  int snapshot_count = 0;           // N of the source matrix

  int rank() const { return static_cast<int>(modes.cols()); }
};

// Thin SVD of the snapshot matrix; keeps the first `rank` left singular
// vectors with the sign fixed so each mode's largest-magnitude entry is
// positive. The full singular spectrum is retained for diagnostics.
PodBasis compute_pod(const Eigen::MatrixXd& snapshots, int rank);

// Smallest rank whose cumulative squared singular values reach the fraction.
int rank_for_energy(const Eigen::VectorXd& singular_values, double fraction);

Eigen::VectorXd project(const PodBasis& basis, const Eigen::VectorXd& field);
Eigen::MatrixXd project_columns(const PodBasis& basis,
                                const Eigen::MatrixXd& fields);
Eigen::VectorXd reconstruct(const PodBasis& basis,
                            const Eigen::VectorXd& coeffs);

// Per-mode min/max map onto [-1, 1]; constant modes map to 0.
struct CoefficientScaler {
  Eigen::VectorXd lo, hi;

  static CoefficientScaler fit(const Eigen::MatrixXd& coeffs);
  Eigen::VectorXd scale(const Eigen::VectorXd& coeffs) const;
  Eigen::MatrixXd scale_columns(const Eigen::MatrixXd& coeffs) const;
  Eigen::VectorXd unscale(const Eigen::VectorXd& scaled) const;
};

// (t, nu) onto [0, 1]^2 from the training ranges; points outside the fitted
// box are still mapped but reported as extrapolation.
struct ParamScaler {
  double t_lo = 0.0, t_hi = 1.0;
  double nu_lo = 0.0, nu_hi = 1.0;

  static ParamScaler fit(const std::vector<dynsys::ParamPoint>& params);
  Eigen::Vector2d scale(const dynsys::ParamPoint& p) const;
  bool in_range(const dynsys::ParamPoint& p) const;
};

struct RomConfig {
  int rank = 0;                    // 0 -> choose by energy_fraction
  double energy_fraction = 0.9999;
  double train_fraction = 0.8;
  int hidden_layers = 4;
  int hidden_width = 40;
  fed::FedConfig fed;              // K/E/B/lr/rounds/seed/threads
  int centralized_batch = 320;
};

struct TrainedRom {
  PodBasis basis;
  nn::Network net;
  CoefficientScaler coeff_scaler;
  ParamScaler mu_scaler;
  std::vector<fed::RoundLog> logs;
  std::vector<std::string> warnings;
};

// POD from the training split, then a parameter-to-coefficients regression
// network trained centralized or federated on the scaled pairs.
TrainedRom train_rom(const Eigen::MatrixXd& snapshots,
                     const std::vector<dynsys::ParamPoint>& params,
                     const RomConfig& config, fed::TrainMode mode,
                     const fed::RoundObserver& on_round = {});

struct RomPrediction {
  Eigen::VectorXd field;
  Eigen::VectorXd coefficients;  // unscaled modal coefficients
  bool extrapolated = false;
};

RomPrediction rom_predict(const TrainedRom& rom, const dynsys::ParamPoint& p);

// Basis file: magic "PODB1"; N_x, N, R as unsigned 64-bit little-endian;
// modes column-major binary64; then the full singular-value vector.
void save_basis(const std::filesystem::path& path, const PodBasis& basis);
PodBasis load_basis(const std::filesystem::path& path);

}  // namespace fedtwin::pod
