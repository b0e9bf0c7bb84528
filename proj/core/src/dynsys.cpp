#include "fedtwin/dynsys.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "fedtwin/errors.hpp"
#include "fedtwin/fft.hpp"
#include "fedtwin/io.hpp"
#include "fedtwin/rng.hpp"

namespace fedtwin::dynsys {

namespace {

constexpr char kMagic[6] = "SNAP1";

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// round(a/b) with a guard that the ratio really is an integer
int exact_ratio(double a, double b, const char* what) {
  double ratio = a / b;
  int n = static_cast<int>(std::llround(ratio));
  if (n < 1 || std::abs(ratio - n) > 1e-9 * std::max(1.0, std::abs(ratio))) {
    throw config_error(std::string(what) + ": " + std::to_string(a) +
                       " is not an integer multiple of " + std::to_string(b));
  }
  return n;
}

}  // namespace

void BurgersSampling::validate() const {
  if (grid_points < 2) throw config_error("burgers.grid_points: must be >= 2");
  if (t_samples < 1) throw config_error("burgers.t_samples: must be >= 1");
  if (nu_samples < 1) throw config_error("burgers.nu_samples: must be >= 1");
  if (!(t_min >= 0.0) || !(t_max >= t_min)) {
    throw config_error("burgers.t range: need 0 <= t_min <= t_max");
  }
  if (!(nu_min > 0.0) || !(nu_max >= nu_min)) {
    throw config_error("burgers.nu range: need 0 < nu_min <= nu_max");
  }
}

Eigen::VectorXd BurgersSampling::spatial_grid() const {
  return Eigen::VectorXd::LinSpaced(grid_points, 0.0, 1.0);
}

std::vector<ParamPoint> BurgersSampling::parameter_grid() const {
  validate();
  std::vector<ParamPoint> params;
  params.reserve(static_cast<std::size_t>(t_samples) * nu_samples);
  auto linspace_at = [](double lo, double hi, int count, int i) {
    if (count == 1 || i == 0) return lo;
    if (i == count - 1) return hi;  // exact endpoints
    return lo + (hi - lo) * i / (count - 1.0);
  };
  for (int i = 0; i < t_samples; ++i) {
    const double t = linspace_at(t_min, t_max, t_samples, i);
    for (int j = 0; j < nu_samples; ++j) {
      params.push_back({t, linspace_at(nu_min, nu_max, nu_samples, j)});
    }
  }
  return params;
}

double burgers_exact(double x, const ParamPoint& p) {
  if (!(p.nu > 0.0)) throw std::invalid_argument("burgers: nu must be > 0");
  if (!(p.t >= 0.0)) throw std::invalid_argument("burgers: t must be >= 0");
  if (x < 0.0 || x > 1.0) {
    throw std::invalid_argument("burgers: x must lie in [0,1]");
  }
  const double tp1 = p.t + 1.0;
  // sqrt((t+1)/t0) * exp(x^2/(4 nu (t+1))) with t0 = exp(1/(8 nu)),
  // combined in log space; exp may overflow to +inf for far
  // out-of-range nu, which still yields the correct limit u -> 0.
  const double log_term =
      0.5 * std::log(tp1) - 1.0 / (16.0 * p.nu) + x * x / (4.0 * p.nu * tp1);
  return (x / tp1) / (1.0 + std::exp(log_term));
}

Eigen::VectorXd burgers_field(const Eigen::VectorXd& grid,
                              const ParamPoint& p) {
  Eigen::VectorXd u(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    u[i] = burgers_exact(grid[i], p);
  }
  return u;
}

Eigen::MatrixXd burgers_snapshots(const Eigen::VectorXd& grid,
                                  const std::vector<ParamPoint>& params) {
  if (grid.size() == 0) throw std::invalid_argument("burgers: empty grid");
  if (params.empty()) throw std::invalid_argument("burgers: no parameters");
  Eigen::MatrixXd snapshots(grid.size(), static_cast<Eigen::Index>(params.size()));
  for (std::size_t n = 0; n < params.size(); ++n) {
    snapshots.col(static_cast<Eigen::Index>(n)) = burgers_field(grid, params[n]);
  }
  return snapshots;
}

void KsConfig::validate() const {
  if (!(domain > 0.0)) throw config_error("ks.L: must be > 0");
  if (!is_power_of_two(grid_points)) {
    throw config_error("ks.N: must be a power of two");
  }
  if (!(dt > 0.0)) throw config_error("ks.dt: must be > 0");
  if (!(sample_dt > 0.0)) throw config_error("ks.sample_dt: must be > 0");
  exact_ratio(sample_dt, dt, "ks.sample_dt");
  if (!(spinup_from <= 0.0)) throw config_error("ks.spinup_from: must be <= 0");
  if (!(t_end > 0.0)) throw config_error("ks.t_end: must be > 0");
}

int KsConfig::steps_per_sample() const {
  return exact_ratio(sample_dt, dt, "ks.sample_dt");
}

int KsConfig::spinup_steps() const {
  if (spinup_from == 0.0) return 0;
  return exact_ratio(-spinup_from, dt, "ks.spinup_from");
}

int KsConfig::sample_count() const {
  return exact_ratio(t_end, sample_dt, "ks.t_end");
}

Etdrk4Coefficients etdrk4_coefficients(const KsConfig& config,
                                       int contour_points) {
  config.validate();
  if (contour_points < 1) {
    throw config_error("ks.contour_points: must be >= 1");
  }
  const int n = config.grid_points;
  const int spectrum = n / 2 + 1;
  const double h = config.dt;

  Etdrk4Coefficients c;
  c.wavenumbers.resize(spectrum);
  c.linear_factor.resize(spectrum);
  c.exp_full.resize(spectrum);
  c.exp_half.resize(spectrum);
  c.q.resize(spectrum);
  c.f1.resize(spectrum);
  c.f2.resize(spectrum);
  c.f3.resize(spectrum);
  c.nonlinear_factor.resize(spectrum);

  using cd = std::complex<double>;
  for (int m = 0; m < spectrum; ++m) {
    const double k = 2.0 * std::numbers::pi * m / config.domain;
    c.wavenumbers[m] = k;
    const double lin = k * k - k * k * k * k;
    c.linear_factor[m] = lin;
    c.exp_full[m] = std::exp(h * lin);
    c.exp_half[m] = std::exp(0.5 * h * lin);

    // Mean of the closed forms over a unit circle around z = h*lin; the
    // contour average stays accurate through the removable z = 0 point.
    cd q{}, f1{}, f2{}, f3{};
    for (int j = 1; j <= contour_points; ++j) {
      const double angle =
          std::numbers::pi * (j - 0.5) / contour_points;
      const cd z = h * lin + std::exp(cd(0.0, angle));
      const cd ez = std::exp(z);
      const cd z3 = z * z * z;
      q += (std::exp(0.5 * z) - 1.0) / z;
      f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
      f2 += (2.0 + z + ez * (-2.0 + z)) / z3;
      f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
    }
    const double scale = h / contour_points;
    c.q[m] = scale * q.real();
    c.f1[m] = scale * f1.real();
    c.f2[m] = scale * f2.real();
    c.f3[m] = scale * f3.real();

    // -0.5 i k, Nyquist zeroed (odd-order derivative of real data)
    c.nonlinear_factor[m] =
        (n % 2 == 0 && m == n / 2) ? cd(0.0, 0.0) : cd(0.0, -0.5 * k);
  }
  return c;
}

Eigen::VectorXd ks_random_initial_condition(int grid_points, double domain,
                                            std::uint64_t seed) {
  if (!is_power_of_two(grid_points) || grid_points < 32) {
    throw config_error("ks.N: must be a power of two >= 32");
  }
  Rng rng(stream_seed(seed, 0x4b53, 0));  // dedicated stream
  RealFft fft(grid_points);
  Eigen::VectorXcd spectrum = Eigen::VectorXcd::Zero(fft.spectrum_size());
  for (int m = 1; m <= 8; ++m) {
    spectrum[m] = std::complex<double>(rng.normal(), rng.normal());
  }
  Eigen::VectorXd u = fft.inverse(spectrum);
  const double rms = std::sqrt(u.squaredNorm() / grid_points);
  if (rms > 0.0) u *= 0.1 / rms;
  return u;
}

Eigen::MatrixXd ks_integrate(const KsConfig& config, const Eigen::VectorXd& u0,
                             double t_start, int samples) {
  config.validate();
  if (u0.size() != config.grid_points) {
    throw std::invalid_argument("ks_integrate: initial condition length");
  }
  if (samples < 0) throw std::invalid_argument("ks_integrate: samples < 0");

  const Etdrk4Coefficients c = etdrk4_coefficients(config);
  RealFft fft(config.grid_points);
  const int spectrum = fft.spectrum_size();
  const int steps = config.steps_per_sample();

  const Eigen::ArrayXcd exp_full = c.exp_full.cast<std::complex<double>>();
  const Eigen::ArrayXcd exp_half = c.exp_half.cast<std::complex<double>>();
  const Eigen::ArrayXcd q = c.q.cast<std::complex<double>>();
  const Eigen::ArrayXcd f1 = c.f1.cast<std::complex<double>>();
  const Eigen::ArrayXcd f2 = c.f2.cast<std::complex<double>>();
  const Eigen::ArrayXcd f3 = c.f3.cast<std::complex<double>>();
  const Eigen::ArrayXcd g = c.nonlinear_factor.array();

  Eigen::VectorXcd v = fft.forward(u0);
  Eigen::VectorXcd nv(spectrum), na(spectrum), nb(spectrum), nc(spectrum);
  Eigen::VectorXcd a(spectrum), b(spectrum), cc(spectrum);

  auto nonlinear = [&](const Eigen::VectorXcd& spec, Eigen::VectorXcd& out) {
    Eigen::VectorXd u = fft.inverse(spec);
    out = fft.forward((u.array() * u.array()).matrix());
    out.array() *= g;
  };

  Eigen::MatrixXd result(config.grid_points, samples);
  for (int s = 0; s < samples; ++s) {
    for (int step = 0; step < steps; ++step) {
      nonlinear(v, nv);
      a = exp_half * v.array() + q * nv.array();
      nonlinear(a, na);
      b = exp_half * v.array() + q * na.array();
      nonlinear(b, nb);
      cc = exp_half * a.array() + q * (2.0 * nb.array() - nv.array());
      nonlinear(cc, nc);
      v = exp_full * v.array() + f1 * nv.array() +
          f2 * 2.0 * (na.array() + nb.array()) + f3 * nc.array();
    }
    Eigen::VectorXd u = fft.inverse(v);
    if (!u.allFinite()) {
      throw numeric_error(
          "ks_integrate: field blew up near t = " +
          std::to_string(t_start + (s + 1) * config.sample_dt));
    }
    result.col(s) = u;
  }
  return result;
}

Eigen::MatrixXd ks_generate(const KsConfig& config, std::uint64_t seed) {
  config.validate();
  Eigen::VectorXd u0 =
      ks_random_initial_condition(config.grid_points, config.domain, seed);

  // Spin-up onto the attractor; reuse the sampling loop with a config whose
  // sample interval covers the whole window so no columns are stored early.
  if (config.spinup_steps() > 0) {
    KsConfig spin = config;
    spin.sample_dt = -config.spinup_from;
    spin.t_end = -config.spinup_from;
    Eigen::MatrixXd end_state = ks_integrate(spin, u0, config.spinup_from, 1);
    u0 = end_state.col(0);
  }
  return ks_integrate(config, u0, 0.0, config.sample_count());
}

void save_snapshots(const std::filesystem::path& path,
                    const Eigen::MatrixXd& snapshots) {
  auto os = io::open_output(path);
  io::write_magic(os, kMagic);
  io::write_u64(os, static_cast<std::uint64_t>(snapshots.rows()));
  io::write_u64(os, static_cast<std::uint64_t>(snapshots.cols()));
  io::write_f64_array(
      os, std::span(snapshots.data(),
                    static_cast<std::size_t>(snapshots.size())));
  if (!os) throw config_error("failed writing " + path.string());
}

Eigen::MatrixXd load_snapshots(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  io::expect_magic(is, kMagic, path.string());
  const auto rows = io::read_u64(is, "snapshot rows");
  const auto cols = io::read_u64(is, "snapshot cols");
  if (rows == 0 || cols == 0 || rows > (1ull << 32) || cols > (1ull << 32)) {
    throw config_error("implausible snapshot shape in " + path.string());
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  io::read_f64_array(is,
                     std::span(m.data(), static_cast<std::size_t>(m.size())),
                     "snapshot payload");
  return m;
}

}  // namespace fedtwin::dynsys
