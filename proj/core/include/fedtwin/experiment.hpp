#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedtwin/dynsys.hpp"
#include "fedtwin/fed.hpp"

namespace fedtwin::experiment {

enum class ExperimentKind { kBurgersRom, kKsAutoencoder, kSstAutoencoder };
enum class RunMode { kCentralized, kFederated, kBoth };

ExperimentKind experiment_from_name(const std::string& name);
const char* experiment_name(ExperimentKind kind);
RunMode run_mode_from_name(const std::string& name);
const char* run_mode_name(RunMode mode);

struct SstSection {
  std::string path;  // SSTG1 file; empty = synthesize
  int synth_weeks = 1890;
  int synth_height = 180;
  int synth_width = 360;
  int train_snapshots = 1500;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::kBurgersRom;
  RunMode mode = RunMode::kBoth;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/out";
  std::filesystem::path cache_dir;  // empty = <out>/cache
  bool regen = false;
  int checkpoint_interval = 0;  // rounds between checkpoints, 0 = final only
  int centralized_batch = 320;

  fed::FedConfig fed;  // fed.rounds doubles as the centralized epoch count

  // [model]
  int latent_dim = 0;  // R; 0 lets burgers_rom pick by energy
  double energy_fraction = 0.9999;
  double train_fraction = 0.8;
  int hidden_layers = 4;
  int hidden_width = 40;

  // [burgers]
  dynsys::BurgersSampling burgers;
  dynsys::ParamPoint showcase{0.02, 0.00475};

  // [ks]
  dynsys::KsConfig ks{22.0, 64, 2.5e-3, 0.25, -250.0, 3750.0};
  int ks_train_samples = 10000;
  int max_train_columns = 0;  // 0 = all; otherwise an evenly strided subset

  // [metrics]
  int pdf_bins = 64;

  SstSection sst;

  std::filesystem::path effective_cache_dir() const {
    return cache_dir.empty() ? out_dir / "cache" : cache_dir;
  }
};

// Parses the key/value config file; collects every schema and cross-field
// problem instead of stopping at the first.
struct ParseResult {
  ExperimentConfig config;
  std::vector<std::string> errors;
};

ParseResult parse_config_file(const std::filesystem::path& path);

// parse_config_file + throw config_error listing every problem.
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<std::string> validate(const ExperimentConfig& config);

struct ManifestEntry {
  std::string path;  // relative to the run directory
  std::uint64_t bytes = 0;
  std::string hash;  // fnv1a64 hex; round CSVs hashed without wall_ms
};

struct RunManifest {
  std::vector<ManifestEntry> files;  // sorted by path
};

// Executes the configured experiment and writes every artifact (round logs,
// reconstructions, histograms, metrics.json, checkpoints, manifest.json)
// into the output directory. Returns the manifest that was written.
RunManifest run_experiment(const ExperimentConfig& config);

RunManifest read_manifest(const std::filesystem::path& path);

// Content hash used by the manifest; wall-clock columns of round logs are
// excluded so reruns of a deterministic config hash identically.
std::uint64_t artifact_hash(const std::filesystem::path& file);

}  // namespace fedtwin::experiment
