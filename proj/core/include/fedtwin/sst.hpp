#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace fedtwin::ingest {

using MaskGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// A 2D physical field with axis metadata; for gridded temperature data the
// axes are degrees latitude (rows) and longitude (columns).
struct FieldGrid {
  Eigen::MatrixXd values;  // H x W
  Eigen::VectorXd y_axis;  // H
  Eigen::VectorXd x_axis;  // W
};

// Weekly gridded temperature archive with one shared ocean mask. Values at
// masked-out (land) points carry the fill value and are ignored downstream.
struct SstArchive {
  int height = 0;
  int width = 0;
  double fill_value = -999.0;
  MaskGrid ocean_mask;                  // true = ocean
  std::vector<Eigen::MatrixXd> frames;  // H x W, one per week

  int weeks() const { return static_cast<int>(frames.size()); }
  int ocean_point_count() const { return static_cast<int>(ocean_mask.count()); }
  FieldGrid frame_grid(int week) const;
};

// Grid file format: magic "SSTG1"; H, W, T as unsigned 64-bit little-endian;
// fill value as binary64; then T frames, row-major binary64, degrees Celsius.
// The mask is derived from the fill-value sentinel of the first frame and
// must be consistent across frames.
SstArchive load_sst(const std::filesystem::path& path);
void save_sst(const std::filesystem::path& path, const SstArchive& archive);

// Snapshot matrix restricted to ocean points, in fixed row-major grid order,
// plus the index map needed to re-inflate vectors onto the grid.
struct MaskedSnapshots {
  Eigen::MatrixXd matrix;        // ocean_points x T
  std::vector<int> point_index;  // row-major grid index per matrix row
  int height = 0;
  int width = 0;
  double fill_value = -999.0;
};

MaskedSnapshots flatten_masked(const SstArchive& archive);
// Ocean points from the column, fill value elsewhere.
Eigen::MatrixXd inflate(const MaskedSnapshots& masked,
                        const Eigen::VectorXd& column);

// Subtract the per-point temporal mean of the training columns and divide by
// the global max-abs anomaly. The inverse transform is exact.
struct AnomalyNormalization {
  Eigen::VectorXd temporal_mean;
  double scale = 1.0;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& columns) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& normalized) const;
};

std::pair<Eigen::MatrixXd, AnomalyNormalization> normalize_anomaly(
    const Eigen::MatrixXd& columns, int training_columns);

// Synthetic stand-in archive: latitude climatology + seasonal cycle
// (period 52, hemisphere phase flip) + seed-dependent traveling-wave
// anomalies, with a fixed banded land mask.
struct SynthConfig {
  int weeks = 1500;
  std::uint64_t seed = 0;
  int height = 180;
  int width = 360;
};

SstArchive synth_sst(const SynthConfig& config);

// Closed-form time average of the generator at a grid point (the seasonal
// and wave terms average to zero over whole periods).
double synth_climatology(const SynthConfig& config, int row, int col);

}  // namespace fedtwin::ingest
