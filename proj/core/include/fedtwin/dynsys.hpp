#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace fedtwin::dynsys {

struct ParamPoint {
  double t = 0.0;   // time
  double nu = 0.0;  // viscosity
};

// Sampling plan for the viscous ramp solution on x in [0,1], parameterized
// by (t, nu). Defaults give a 256 x 1024 snapshot matrix.
struct BurgersSampling {
  int grid_points = 256;
  int t_samples = 64;
  int nu_samples = 16;
  double t_min = 0.0, t_max = 2.0;
  double nu_min = 0.001, nu_max = 0.01;

  void validate() const;
  Eigen::VectorXd spatial_grid() const;  // equispaced, endpoints included
  std::vector<ParamPoint> parameter_grid() const;  // t outer, nu inner
};

// Closed-form solution u(x; t, nu). The decay factor is evaluated in
// log space so small viscosities cannot overflow the intermediate exp.
double burgers_exact(double x, const ParamPoint& p);

Eigen::VectorXd burgers_field(const Eigen::VectorXd& grid, const ParamPoint& p);

// Column n holds u(., params[n]).
Eigen::MatrixXd burgers_snapshots(const Eigen::VectorXd& grid,
                                  const std::vector<ParamPoint>& params);

// Fourth-order exponential time differencing setup for the L-periodic
// flame-front equation u_t = -u_xx - u_xxxx - u u_x.
struct KsConfig {
  double domain = 22.0;  // L
  int grid_points = 64;  // N, power of two
  double dt = 2.5e-3;
  double sample_dt = 0.25;
  double spinup_from = -250.0;
  double t_end = 2500.0;

  void validate() const;
  int steps_per_sample() const;
  int spinup_steps() const;
  int sample_count() const;  // samples at t = k*sample_dt, k = 1..count
};

struct Etdrk4Coefficients {
  Eigen::VectorXd wavenumbers;        // 2*pi*m/L for m = 0..N/2
  Eigen::VectorXd linear_factor;      // q^2 - q^4 per wavenumber
  Eigen::VectorXd exp_full, exp_half; // exp(dt*L), exp(dt*L/2)
  Eigen::VectorXd q, f1, f2, f3;      // contour-averaged weights (include dt)
  Eigen::VectorXcd nonlinear_factor;  // -i k / 2, Nyquist zeroed
};

// Weights are evaluated by averaging the closed-form expressions over
// `contour_points` points on a unit circle centered at each dt*L value.
Etdrk4Coefficients etdrk4_coefficients(const KsConfig& config,
                                       int contour_points = 32);

// Zero-mean random start: independent normal Fourier coefficients for
// wavenumbers 1..8, scaled to RMS amplitude 0.1.
Eigen::VectorXd ks_random_initial_condition(int grid_points, double domain,
                                            std::uint64_t seed);

// Advances u0 and records a column after every sample interval. Throws
// numeric_error with the failure time if the field stops being finite.
Eigen::MatrixXd ks_integrate(const KsConfig& config, const Eigen::VectorXd& u0,
                             double t_start, int samples);

// Spin-up from a random state at t = spinup_from, then one column per
// sample_dt over (0, t_end].
Eigen::MatrixXd ks_generate(const KsConfig& config, std::uint64_t seed);

// Snapshot file format: magic "SNAP1"; rows, cols as unsigned 64-bit
// little-endian; column-major little-endian binary64 payload.
void save_snapshots(const std::filesystem::path& path,
                    const Eigen::MatrixXd& snapshots);
Eigen::MatrixXd load_snapshots(const std::filesystem::path& path);

}  // namespace fedtwin::dynsys
