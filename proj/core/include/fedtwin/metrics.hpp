#pragma once

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <utility>
#include <vector>

namespace fedtwin::metrics {

// ||truth - approx||_2 / ||truth||_2; zero-norm truth is an error.
double relative_l2(const Eigen::VectorXd& truth, const Eigen::VectorXd& approx);

// Spectral first and second derivatives of a periodic 1D field with grid
// spacing dx (domain length = n * dx). The Nyquist mode of the odd-order
// derivative is zeroed.
std::pair<Eigen::VectorXd, Eigen::VectorXd> derivative_fields(
    const Eigen::VectorXd& u, double dx);

// Pointwise (u_x, u_xx) pairs pooled over all columns.
std::vector<std::array<double, 2>> derivative_samples(
    const Eigen::MatrixXd& fields, double dx);

struct AxisRange {
  double lo = 0.0;
  double hi = 0.0;
};

AxisRange sample_range(const std::vector<std::array<double, 2>>& samples,
                       int axis);

struct JointHistogram {
  Eigen::VectorXd x_edges;  // bins_x + 1
  Eigen::VectorXd y_edges;  // bins_y + 1
  Eigen::MatrixXd counts;   // bins_x x bins_y
  Eigen::MatrixXd density;  // counts normalized so sum(density * area) == 1
  double clip_fraction = 0.0;
  std::int64_t total = 0;
};

// Out-of-range samples are clipped into the edge bins and reported via
// clip_fraction.
JointHistogram joint_pdf(const std::vector<std::array<double, 2>>& samples,
                         int bins_x, int bins_y, AxisRange x, AxisRange y);

// Jensen-Shannon divergence in nats over the bin masses; requires identical
// binning. Always in [0, ln 2].
double js_divergence(const JointHistogram& p, const JointHistogram& q);

// Long-format CSV: ux_lo,ux_hi,uxx_lo,uxx_hi,count,density.
void write_histogram_csv(const std::filesystem::path& path,
                         const JointHistogram& h);
void write_histogram_json(const std::filesystem::path& path,
                          const JointHistogram& h);

}  // namespace fedtwin::metrics
