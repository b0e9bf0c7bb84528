#include "fedtwin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "fedtwin/errors.hpp"
#include "fedtwin/fft.hpp"
#include "json.hpp"

namespace fedtwin::metrics {

double relative_l2(const Eigen::VectorXd& truth,
                   const Eigen::VectorXd& approx) {
  if (truth.size() != approx.size()) {
    throw std::invalid_argument("relative_l2: shape mismatch");
  }
  const double norm = truth.norm();
  if (!(norm > 0.0)) {
    throw std::invalid_argument("relative_l2: zero-norm truth");
  }
  return (truth - approx).norm() / norm;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> derivative_fields(
    const Eigen::VectorXd& u, double dx) {
  const int n = static_cast<int>(u.size());
  if (n < 4) throw std::invalid_argument("derivative_fields: need N >= 4");
  if (!(dx > 0.0)) throw std::invalid_argument("derivative_fields: dx <= 0");

  RealFft fft(n);
  Eigen::VectorXcd spectrum = fft.forward(u);
  const double length = n * dx;
  Eigen::VectorXcd first(spectrum.size());
  Eigen::VectorXcd second(spectrum.size());
  for (int m = 0; m < spectrum.size(); ++m) {
    const double k = 2.0 * std::numbers::pi * m / length;
    const bool nyquist = (n % 2 == 0 && m == n / 2);
    first[m] = nyquist ? std::complex<double>(0.0, 0.0)
                       : std::complex<double>(0.0, k) * spectrum[m];
    second[m] = -k * k * spectrum[m];
  }
  return {fft.inverse(first), fft.inverse(second)};
}

std::vector<std::array<double, 2>> derivative_samples(
    const Eigen::MatrixXd& fields, double dx) {
  std::vector<std::array<double, 2>> samples;
  samples.reserve(static_cast<std::size_t>(fields.size()));
  for (Eigen::Index c = 0; c < fields.cols(); ++c) {
    auto [ux, uxx] = derivative_fields(fields.col(c), dx);
    for (Eigen::Index i = 0; i < ux.size(); ++i) {
      samples.push_back({ux[i], uxx[i]});
    }
  }
  return samples;
}

AxisRange sample_range(const std::vector<std::array<double, 2>>& samples,
                       int axis) {
  if (samples.empty()) throw std::invalid_argument("sample_range: no samples");
  if (axis != 0 && axis != 1) {
    throw std::invalid_argument("sample_range: axis must be 0 or 1");
  }
  AxisRange r{samples.front()[static_cast<std::size_t>(axis)],
              samples.front()[static_cast<std::size_t>(axis)]};
  for (const auto& s : samples) {
    r.lo = std::min(r.lo, s[static_cast<std::size_t>(axis)]);
    r.hi = std::max(r.hi, s[static_cast<std::size_t>(axis)]);
  }
  return r;
}

JointHistogram joint_pdf(const std::vector<std::array<double, 2>>& samples,
                         int bins_x, int bins_y, AxisRange x, AxisRange y) {
  if (samples.empty()) throw std::invalid_argument("joint_pdf: no samples");
  if (bins_x < 2 || bins_y < 2) {
    throw std::invalid_argument("joint_pdf: need at least 2 bins per axis");
  }
  if (!(x.hi > x.lo) || !(y.hi > y.lo)) {
    throw std::invalid_argument("joint_pdf: degenerate axis range");
  }

  JointHistogram h;
  h.x_edges = Eigen::VectorXd::LinSpaced(bins_x + 1, x.lo, x.hi);
  h.y_edges = Eigen::VectorXd::LinSpaced(bins_y + 1, y.lo, y.hi);
  h.counts = Eigen::MatrixXd::Zero(bins_x, bins_y);
  h.total = static_cast<std::int64_t>(samples.size());

  const double sx = bins_x / (x.hi - x.lo);
  const double sy = bins_y / (y.hi - y.lo);
  std::int64_t clipped = 0;
  for (const auto& s : samples) {
    int ix = static_cast<int>(std::floor((s[0] - x.lo) * sx));
    int iy = static_cast<int>(std::floor((s[1] - y.lo) * sy));
    bool in_x = s[0] >= x.lo && s[0] <= x.hi;
    bool in_y = s[1] >= y.lo && s[1] <= y.hi;
    if (!in_x || !in_y) ++clipped;
    ix = std::clamp(ix, 0, bins_x - 1);
    iy = std::clamp(iy, 0, bins_y - 1);
    h.counts(ix, iy) += 1.0;
  }
  h.clip_fraction = static_cast<double>(clipped) / static_cast<double>(h.total);

  const double area = (h.x_edges[1] - h.x_edges[0]) *
                      (h.y_edges[1] - h.y_edges[0]);
  h.density = h.counts / (static_cast<double>(h.total) * area);
  return h;
}

double js_divergence(const JointHistogram& p, const JointHistogram& q) {
  const bool same_binning =
      p.counts.rows() == q.counts.rows() &&
      p.counts.cols() == q.counts.cols() &&
      p.x_edges.size() == q.x_edges.size() &&
      p.y_edges.size() == q.y_edges.size() &&
      (p.x_edges.array() == q.x_edges.array()).all() &&
      (p.y_edges.array() == q.y_edges.array()).all();
  if (!same_binning) {
    throw std::invalid_argument("js_divergence: binning mismatch");
  }
  const double pt = static_cast<double>(p.total);
  const double qt = static_cast<double>(q.total);
  double js = 0.0;
  for (Eigen::Index j = 0; j < p.counts.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.counts.rows(); ++i) {
      const double pm = p.counts(i, j) / pt;
      const double qm = q.counts(i, j) / qt;
      const double m = 0.5 * (pm + qm);
      if (pm > 0.0) js += 0.5 * pm * std::log(pm / m);
      if (qm > 0.0) js += 0.5 * qm * std::log(qm / m);
    }
  }
  return std::max(0.0, js);
}

void write_histogram_csv(const std::filesystem::path& path,
                         const JointHistogram& h) {
  std::ofstream os(path);
  if (!os) throw config_error("cannot write " + path.string());
  os << "ux_lo,ux_hi,uxx_lo,uxx_hi,count,density\n";
  char line[200];
  for (Eigen::Index i = 0; i < h.counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.counts.cols(); ++j) {
      std::snprintf(line, sizeof(line), "%.12g,%.12g,%.12g,%.12g,%.0f,%.12g\n",
                    h.x_edges[i], h.x_edges[i + 1], h.y_edges[j],
                    h.y_edges[j + 1], h.counts(i, j), h.density(i, j));
      os << line;
    }
  }
  if (!os) throw config_error("failed writing " + path.string());
}

void write_histogram_json(const std::filesystem::path& path,
                          const JointHistogram& h) {
  nlohmann::json doc;
  doc["ux_edges"] = std::vector<double>(h.x_edges.data(),
                                        h.x_edges.data() + h.x_edges.size());
  doc["uxx_edges"] = std::vector<double>(h.y_edges.data(),
                                         h.y_edges.data() + h.y_edges.size());
  auto to_rows = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        row[static_cast<std::size_t>(j)] = m(i, j);
      }
      rows.push_back(std::move(row));
    }
    return rows;
  };
  doc["counts"] = to_rows(h.counts);
  doc["density"] = to_rows(h.density);
  doc["clip_fraction"] = h.clip_fraction;
  doc["total"] = h.total;
  std::ofstream os(path);
  if (!os) throw config_error("cannot write " + path.string());
  os << doc.dump(2) << "\n";
  if (!os) throw config_error("failed writing " + path.string());
}

}  // namespace fedtwin::metrics
