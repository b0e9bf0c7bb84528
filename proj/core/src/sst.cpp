#include "fedtwin/sst.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fedtwin/errors.hpp"
#include "fedtwin/io.hpp"
#include "fedtwin/rng.hpp"

namespace fedtwin::ingest {

namespace {

constexpr char kMagic[6] = "SSTG1";

double latitude_deg(int row, int height) {
  return 90.0 - (row + 0.5) * 180.0 / height;
}

double longitude_deg(int col, int width) {
  return (col + 0.5) * 360.0 / width;
}

// Polar caps plus two meridional continental bands; ocean fraction ~ 0.68.
bool is_land(double lat, double lon) {
  if (std::abs(lat) > 78.0) return true;
  if (lon >= 20.0 && lon < 55.0) return true;
  if (lon >= 200.0 && lon < 245.0) return true;
  return false;
}

struct WaveMode {
  double amplitude;
  int cycles_per_year;  // integer so whole-year averages vanish
  int kx, ky;
  double phase;
};

std::vector<WaveMode> wave_modes(std::uint64_t seed) {
  Rng rng(stream_seed(seed, 0x5357, 0));
  std::vector<WaveMode> modes;
  for (int m = 0; m < 3; ++m) {
    WaveMode w;
    w.amplitude = rng.uniform(0.3, 0.8);
    w.cycles_per_year = 1 + static_cast<int>(rng.bounded(4));
    w.kx = 1 + static_cast<int>(rng.bounded(3));
    w.ky = 1 + static_cast<int>(rng.bounded(2));
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    modes.push_back(w);
  }
  return modes;
}

}  // namespace

FieldGrid SstArchive::frame_grid(int week) const {
  if (week < 0 || week >= weeks()) {
    throw std::invalid_argument("frame_grid: week out of range");
  }
  FieldGrid grid;
  grid.values = frames[static_cast<std::size_t>(week)];
  grid.y_axis.resize(height);
  grid.x_axis.resize(width);
  for (int i = 0; i < height; ++i) grid.y_axis[i] = latitude_deg(i, height);
  for (int j = 0; j < width; ++j) grid.x_axis[j] = longitude_deg(j, width);
  return grid;
}

SstArchive load_sst(const std::filesystem::path& path) {
  auto is = io::open_input(path);
  io::expect_magic(is, kMagic, path.string());
  const auto h = io::read_u64(is, "grid height");
  const auto w = io::read_u64(is, "grid width");
  const auto t = io::read_u64(is, "snapshot count");
  if (h == 0 || w == 0 || t == 0 || h > 4096 || w > 8192 || t > (1u << 20)) {
    throw config_error("implausible grid header in " + path.string());
  }
  SstArchive archive;
  archive.height = static_cast<int>(h);
  archive.width = static_cast<int>(w);
  archive.fill_value = io::read_f64(is, "fill value");
  archive.frames.reserve(t);

  // Frames are stored row-major; Eigen matrices are column-major, so read
  // through a row buffer.
  std::vector<double> row(static_cast<std::size_t>(w));
  for (std::uint64_t frame = 0; frame < t; ++frame) {
    Eigen::MatrixXd values(archive.height, archive.width);
    for (int i = 0; i < archive.height; ++i) {
      io::read_f64_array(is, std::span(row), "grid frame");
      for (int j = 0; j < archive.width; ++j) values(i, j) = row[static_cast<std::size_t>(j)];
    }
    archive.frames.push_back(std::move(values));
  }

  archive.ocean_mask =
      archive.frames.front().array() != archive.fill_value;
  if (archive.ocean_point_count() == 0) {
    throw config_error(path.string() + ": no valid points (all fill value)");
  }
  for (std::size_t f = 0; f < archive.frames.size(); ++f) {
    const auto& values = archive.frames[f];
    for (int i = 0; i < archive.height; ++i) {
      for (int j = 0; j < archive.width; ++j) {
        const bool ocean = archive.ocean_mask(i, j);
        const double v = values(i, j);
        if (ocean && !std::isfinite(v)) {
          throw config_error(path.string() + ": non-finite value at ocean point (" +
                             std::to_string(i) + "," + std::to_string(j) +
                             ") in frame " + std::to_string(f));
        }
        if (ocean != (v != archive.fill_value)) {
          throw config_error(path.string() + ": mask inconsistency at (" +
                             std::to_string(i) + "," + std::to_string(j) +
                             ") in frame " + std::to_string(f));
        }
      }
    }
  }
  return archive;
}

void save_sst(const std::filesystem::path& path, const SstArchive& archive) {
  if (archive.frames.empty()) {
    throw std::invalid_argument("save_sst: no frames");
  }
  auto os = io::open_output(path);
  io::write_magic(os, kMagic);
  io::write_u64(os, static_cast<std::uint64_t>(archive.height));
  io::write_u64(os, static_cast<std::uint64_t>(archive.width));
  io::write_u64(os, static_cast<std::uint64_t>(archive.frames.size()));
  io::write_f64(os, archive.fill_value);
  std::vector<double> row(static_cast<std::size_t>(archive.width));
  for (const auto& values : archive.frames) {
    for (int i = 0; i < archive.height; ++i) {
      for (int j = 0; j < archive.width; ++j) row[static_cast<std::size_t>(j)] = values(i, j);
      io::write_f64_array(os, std::span(row));
    }
  }
  if (!os) throw config_error("failed writing " + path.string());
}

MaskedSnapshots flatten_masked(const SstArchive& archive) {
  if (archive.frames.empty()) {
    throw std::invalid_argument("flatten_masked: empty archive");
  }
  MaskedSnapshots masked;
  masked.height = archive.height;
  masked.width = archive.width;
  masked.fill_value = archive.fill_value;
  masked.point_index.reserve(static_cast<std::size_t>(archive.ocean_point_count()));
  for (int i = 0; i < archive.height; ++i) {
    for (int j = 0; j < archive.width; ++j) {
      if (archive.ocean_mask(i, j)) {
        masked.point_index.push_back(i * archive.width + j);
      }
    }
  }
  const auto points = static_cast<Eigen::Index>(masked.point_index.size());
  masked.matrix.resize(points, archive.weeks());
  for (int week = 0; week < archive.weeks(); ++week) {
    const auto& values = archive.frames[static_cast<std::size_t>(week)];
    for (Eigen::Index r = 0; r < points; ++r) {
      const int idx = masked.point_index[static_cast<std::size_t>(r)];
      masked.matrix(r, week) = values(idx / archive.width, idx % archive.width);
    }
  }
  return masked;
}

Eigen::MatrixXd inflate(const MaskedSnapshots& masked,
                        const Eigen::VectorXd& column) {
  if (column.size() != static_cast<Eigen::Index>(masked.point_index.size())) {
    throw std::invalid_argument("inflate: column length mismatch");
  }
  Eigen::MatrixXd grid = Eigen::MatrixXd::Constant(
      masked.height, masked.width, masked.fill_value);
  for (Eigen::Index r = 0; r < column.size(); ++r) {
    const int idx = masked.point_index[static_cast<std::size_t>(r)];
    grid(idx / masked.width, idx % masked.width) = column[r];
  }
  return grid;
}

Eigen::MatrixXd AnomalyNormalization::apply(
    const Eigen::MatrixXd& columns) const {
  return (columns.colwise() - temporal_mean) / scale;
}

Eigen::MatrixXd AnomalyNormalization::invert(
    const Eigen::MatrixXd& normalized) const {
  return (normalized * scale).colwise() + temporal_mean;
}

std::pair<Eigen::MatrixXd, AnomalyNormalization> normalize_anomaly(
    const Eigen::MatrixXd& columns, int training_columns) {
  if (columns.cols() < 2) {
    throw std::invalid_argument("normalize_anomaly: need >= 2 snapshots");
  }
  if (training_columns < 2 || training_columns > columns.cols()) {
    throw std::invalid_argument("normalize_anomaly: bad training column count");
  }
  AnomalyNormalization norm;
  norm.temporal_mean =
      columns.leftCols(training_columns).rowwise().mean();
  const double max_abs = (columns.leftCols(training_columns).colwise() -
                          norm.temporal_mean)
                             .cwiseAbs()
                             .maxCoeff();
  if (!(max_abs > 0.0)) {
    throw config_error("normalize_anomaly: zero anomaly range");
  }
  norm.scale = max_abs;
  return {norm.apply(columns), norm};
}

SstArchive synth_sst(const SynthConfig& config) {
  if (config.weeks < 1) throw config_error("sst.synth_weeks: must be >= 1");
  if (config.height < 8 || config.width < 8) {
    throw config_error("sst.synth grid: must be at least 8 x 8");
  }
  const auto modes = wave_modes(config.seed);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  SstArchive archive;
  archive.height = config.height;
  archive.width = config.width;
  archive.fill_value = -999.0;
  archive.ocean_mask.resize(config.height, config.width);
  for (int i = 0; i < config.height; ++i) {
    for (int j = 0; j < config.width; ++j) {
      archive.ocean_mask(i, j) = !is_land(latitude_deg(i, config.height),
                                          longitude_deg(j, config.width));
    }
  }

  archive.frames.reserve(static_cast<std::size_t>(config.weeks));
  for (int week = 0; week < config.weeks; ++week) {
    Eigen::MatrixXd values = Eigen::MatrixXd::Constant(
        config.height, config.width, archive.fill_value);
    for (int i = 0; i < config.height; ++i) {
      const double lat = latitude_deg(i, config.height);
      const double lat_rad = lat * std::numbers::pi / 180.0;
      const double clim = synth_climatology(config, i, 0);
      const double seasonal_amp =
          1.0 + 7.0 * std::sin(lat_rad) * std::sin(lat_rad);
      const double hemisphere_phase = lat < 0.0 ? std::numbers::pi : 0.0;
      const double seasonal =
          seasonal_amp * std::cos(two_pi * week / 52.0 + hemisphere_phase);
      for (int j = 0; j < config.width; ++j) {
        if (!archive.ocean_mask(i, j)) continue;
        double v = clim + seasonal;
        for (const auto& m : modes) {
          v += m.amplitude *
               std::cos(two_pi * m.cycles_per_year * week / 52.0 +
                        two_pi * m.kx * j / config.width +
                        two_pi * m.ky * i / config.height + m.phase);
        }
        values(i, j) = v;
      }
    }
    archive.frames.push_back(std::move(values));
  }
  return archive;
}

double synth_climatology(const SynthConfig& config, int row, int col) {
  (void)col;  // zonally symmetric base state
  const double lat_rad =
      latitude_deg(row, config.height) * std::numbers::pi / 180.0;
  const double c = std::cos(lat_rad);
  return -1.0 + 29.0 * c * c;
}

}  // namespace fedtwin::ingest
