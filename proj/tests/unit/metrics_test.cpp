#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "fedtwin/errors.hpp"
#include "fedtwin/metrics.hpp"
#include "fedtwin/rng.hpp"

using namespace fedtwin;
using metrics::AxisRange;

namespace {

// band-limited periodic field on [0, L)
Eigen::VectorXd band_limited_field(int n, double length, int max_mode,
                                   std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  for (int m = 1; m <= max_mode; ++m) {
    const double a = rng.uniform(-1.0, 1.0);
    const double b = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
      const double x = length * i / n;
      u[i] += a * std::cos(2.0 * std::numbers::pi * m * x / length) +
              b * std::sin(2.0 * std::numbers::pi * m * x / length);
    }
  }
  return u;
}

// fourth-order central differences on the periodic grid
Eigen::VectorXd fd4_first_derivative(const Eigen::VectorXd& u, double dx) {
  const int n = static_cast<int>(u.size());
  Eigen::VectorXd out(n);
  auto at = [&](int i) { return u[((i % n) + n) % n]; };
  for (int i = 0; i < n; ++i) {
    out[i] = (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) /
             (12.0 * dx);
  }
  return out;
}

}  // namespace

TEST_CASE("relative_l2 examples and loop oracle") {
  Eigen::VectorXd truth(3);
  truth << 1.0, -2.0, 2.0;
  CHECK(metrics::relative_l2(truth, truth) == 0.0);
  CHECK(metrics::relative_l2(truth, Eigen::VectorXd::Zero(3)) == 1.0);

  Rng rng(3);
  Eigen::VectorXd a(9), b(9);
  for (int i = 0; i < 9; ++i) {
    a[i] = rng.uniform(-2.0, 2.0);
    b[i] = rng.uniform(-2.0, 2.0);
  }
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 9; ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += a[i] * a[i];
  }
  CHECK(metrics::relative_l2(a, b) ==
        doctest::Approx(std::sqrt(num / den)).epsilon(1e-12));

  // triangle-consistency through an intermediate field
  Eigen::VectorXd c(9);
  for (int i = 0; i < 9; ++i) c[i] = rng.uniform(-2.0, 2.0);
  CHECK(metrics::relative_l2(a, c) <=
        ((a - b).norm() + (b - c).norm()) / a.norm() + 1e-15);

  CHECK_THROWS_AS(metrics::relative_l2(Eigen::VectorXd::Zero(3), truth),
                  std::invalid_argument);
  CHECK_THROWS_AS(metrics::relative_l2(truth, Eigen::VectorXd::Zero(4)),
                  std::invalid_argument);
}

TEST_CASE("spectral derivatives: constants, pure modes, FD oracle") {
  const int n = 64;
  const double length = 22.0;
  const double dx = length / n;

  auto [cx, cxx] =
      metrics::derivative_fields(Eigen::VectorXd::Constant(n, 3.7), dx);
  CHECK(cx.cwiseAbs().maxCoeff() < 1e-13);
  CHECK(cxx.cwiseAbs().maxCoeff() < 1e-13);

  Eigen::VectorXd sine(n);
  for (int i = 0; i < n; ++i) {
    sine[i] = std::sin(2.0 * std::numbers::pi * (i * dx) / length);
  }
  auto [sx, sxx] = metrics::derivative_fields(sine, dx);
  const double k = 2.0 * std::numbers::pi / length;
  for (int i = 0; i < n; ++i) {
    CHECK(sx[i] == doctest::Approx(k * std::cos(k * i * dx)).epsilon(1e-10));
    CHECK(sxx[i] == doctest::Approx(-k * k * sine[i]).epsilon(1e-10));
  }

  // 4th-order FD oracle with a resolution-doubling convergence check
  double err_coarse = 0.0, err_fine = 0.0;
  for (int scale : {1, 2}) {
    const int nn = 128 * scale;
    const double ddx = length / nn;
    Eigen::VectorXd u = band_limited_field(nn, length, 6, 77);
    auto [ux, uxx] = metrics::derivative_fields(u, ddx);
    const double err =
        (ux - fd4_first_derivative(u, ddx)).cwiseAbs().maxCoeff();
    (scale == 1 ? err_coarse : err_fine) = err;
  }
  CHECK(err_coarse < 1e-2);
  CHECK(err_fine < err_coarse / 8.0);  // ~16x for a 4th-order method

  CHECK_THROWS_AS(metrics::derivative_fields(Eigen::VectorXd::Zero(3), dx),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      metrics::derivative_fields(Eigen::VectorXd::Zero(8), 0.0),
      std::invalid_argument);
}

TEST_CASE("joint_pdf examples") {
  // constant derivative samples: all mass in the bin containing (0,0)
  std::vector<std::array<double, 2>> zeros(100, {0.0, 0.0});
  auto h = metrics::joint_pdf(zeros, 4, 4, {-1.0, 1.0}, {-1.0, 1.0});
  CHECK(h.counts.sum() == 100.0);
  CHECK(h.counts(2, 2) == 100.0);  // (0,0) falls into the upper-middle bin
  CHECK(h.clip_fraction == 0.0);

  // affine field: u_x == c, u_xx == 0 -> single bin at (c, 0)
  std::vector<std::array<double, 2>> affine(50, {0.6, 0.0});
  auto ha = metrics::joint_pdf(affine, 4, 4, {-1.0, 1.0}, {-1.0, 1.0});
  CHECK(ha.counts(3, 2) == 50.0);

  // mass conservation: sum(density) * bin_area == 1
  Rng rng(8);
  std::vector<std::array<double, 2>> samples(5000);
  for (auto& s : samples) s = {rng.normal(), rng.normal()};
  auto hr = metrics::joint_pdf(samples, 16, 16, {-3.0, 3.0}, {-3.0, 3.0});
  const double area = (hr.x_edges[1] - hr.x_edges[0]) *
                      (hr.y_edges[1] - hr.y_edges[0]);
  CHECK(hr.density.sum() * area == doctest::Approx(1.0).epsilon(1e-12));

  // counting oracle: every sample lands in exactly the bin the naive
  // per-sample loop puts it in
  Eigen::MatrixXd naive = Eigen::MatrixXd::Zero(16, 16);
  std::int64_t clipped = 0;
  for (const auto& s : samples) {
    int ix = static_cast<int>(std::floor((s[0] + 3.0) / 6.0 * 16));
    int iy = static_cast<int>(std::floor((s[1] + 3.0) / 6.0 * 16));
    if (s[0] < -3.0 || s[0] > 3.0 || s[1] < -3.0 || s[1] > 3.0) ++clipped;
    ix = std::clamp(ix, 0, 15);
    iy = std::clamp(iy, 0, 15);
    naive(ix, iy) += 1.0;
  }
  CHECK(hr.counts == naive);
  CHECK(hr.clip_fraction ==
        doctest::Approx(static_cast<double>(clipped) / 5000.0));

  CHECK_THROWS_AS(
      metrics::joint_pdf(samples, 1, 8, {-1.0, 1.0}, {-1.0, 1.0}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      metrics::joint_pdf(samples, 8, 8, {1.0, 1.0}, {-1.0, 1.0}),
      std::invalid_argument);
  CHECK_THROWS_AS(metrics::joint_pdf({}, 8, 8, {0.0, 1.0}, {0.0, 1.0}),
                  std::invalid_argument);
}

TEST_CASE("js divergence: identity, disjoint supports, formula oracle") {
  Rng rng(4);
  std::vector<std::array<double, 2>> left, right;
  for (int i = 0; i < 4000; ++i) {
    left.push_back({rng.uniform(-1.0, 0.0), rng.uniform(-1.0, 1.0)});
    right.push_back({rng.uniform(0.0, 1.0), rng.uniform(-1.0, 1.0)});
  }
  AxisRange rx{-1.0, 1.0}, ry{-1.0, 1.0};
  auto hl = metrics::joint_pdf(left, 8, 8, rx, ry);
  auto hr = metrics::joint_pdf(right, 8, 8, rx, ry);

  CHECK(metrics::js_divergence(hl, hl) == 0.0);
  CHECK(metrics::js_divergence(hl, hr) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // symmetry under the fixed summation order
  CHECK(metrics::js_divergence(hl, hr) == metrics::js_divergence(hr, hl));

  // direct-summation oracle on overlapping histograms
  std::vector<std::array<double, 2>> mixed = left;
  mixed.insert(mixed.end(), right.begin(), right.begin() + 1000);
  auto hm = metrics::joint_pdf(mixed, 8, 8, rx, ry);
  double oracle = 0.0;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const double p = hl.counts(i, j) / static_cast<double>(hl.total);
      const double q = hm.counts(i, j) / static_cast<double>(hm.total);
      const double m = 0.5 * (p + q);
      if (p > 0) oracle += 0.5 * p * std::log(p / m);
      if (q > 0) oracle += 0.5 * q * std::log(q / m);
    }
  }
  const double js = metrics::js_divergence(hl, hm);
  CHECK(js == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(js > 0.0);
  CHECK(js < std::log(2.0));

  auto coarse = metrics::joint_pdf(left, 4, 4, rx, ry);
  CHECK_THROWS_AS(metrics::js_divergence(hl, coarse), std::invalid_argument);
}

TEST_CASE("histogram exports") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fedtwin_metrics_test";
  fs::create_directories(dir);

  std::vector<std::array<double, 2>> samples(64, {0.25, -0.25});
  auto h = metrics::joint_pdf(samples, 2, 2, {-1.0, 1.0}, {-1.0, 1.0});
  metrics::write_histogram_csv(dir / "h.csv", h);
  metrics::write_histogram_json(dir / "h.json", h);

  std::ifstream csv(dir / "h.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "ux_lo,ux_hi,uxx_lo,uxx_hi,count,density");
  int rows = 0;
  std::string line;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);

  std::ifstream json_file(dir / "h.json");
  std::string text((std::istreambuf_iterator<char>(json_file)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("\"clip_fraction\"") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("derivative_samples pools every grid point of every column") {
  Eigen::MatrixXd fields(64, 3);
  for (int c = 0; c < 3; ++c) {
    fields.col(c) = band_limited_field(64, 22.0, 4, 10 + c);
  }
  auto samples = metrics::derivative_samples(fields, 22.0 / 64);
  CHECK(samples.size() == 64 * 3);
}
