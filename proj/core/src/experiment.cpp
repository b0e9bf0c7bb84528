#include "fedtwin/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "fedtwin/autoencoder.hpp"
#include "fedtwin/errors.hpp"
#include "fedtwin/io.hpp"
#include "fedtwin/metrics.hpp"
#include "fedtwin/pod.hpp"
#include "fedtwin/sst.hpp"
#include "json.hpp"

namespace fedtwin::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

struct RawConfig {
  std::map<std::string, std::string> values;
  std::vector<std::string> errors;
};

RawConfig parse_ini(const fs::path& path) {
  RawConfig raw;
  std::ifstream is(path);
  if (!is) {
    raw.errors.push_back("cannot open config file " + path.string());
    return raw;
  }
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']' || text.size() < 3) {
        raw.errors.push_back("line " + std::to_string(line_no) +
                             ": malformed section header");
        continue;
      }
      section = trim(text.substr(1, text.size() - 2));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      raw.errors.push_back("line " + std::to_string(line_no) +
                           ": expected key = value");
      continue;
    }
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (key.empty()) {
      raw.errors.push_back("line " + std::to_string(line_no) + ": empty key");
      continue;
    }
    std::string full = section.empty() ? key : section + "." + key;
    if (!raw.values.emplace(full, value).second) {
      raw.errors.push_back("line " + std::to_string(line_no) +
                           ": duplicate key " + full);
    }
  }
  return raw;
}

// Typed access over the raw key/value map; every conversion failure is
// recorded against its field path so validation reports all problems at once.
class Reader {
 public:
  Reader(RawConfig& raw, std::vector<std::string>& errors)
      : raw_(raw), errors_(errors) {}

  std::string get_string(const std::string& key, std::string fallback) {
    auto it = raw_.values.find(key);
    if (it == raw_.values.end()) return fallback;
    consumed_.insert(key);
    return it->second;
  }

  template <typename T, typename Parse>
  T get_number(const std::string& key, T fallback, Parse parse) {
    auto it = raw_.values.find(key);
    if (it == raw_.values.end()) return fallback;
    consumed_.insert(key);
    T out{};
    if (!parse(it->second, out)) {
      errors_.push_back(key + ": cannot parse '" + it->second + "'");
      return fallback;
    }
    return out;
  }

  int get_int(const std::string& key, int fallback) {
    return get_number<int>(key, fallback, [](const std::string& s, int& out) {
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      return ec == std::errc() && p == s.data() + s.size();
    });
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    return get_number<std::uint64_t>(
        key, fallback, [](const std::string& s, std::uint64_t& out) {
          auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
          return ec == std::errc() && p == s.data() + s.size();
        });
  }

  double get_double(const std::string& key, double fallback) {
    return get_number<double>(
        key, fallback, [](const std::string& s, double& out) {
          char* end = nullptr;
          out = std::strtod(s.c_str(), &end);
          return end == s.c_str() + s.size() && !s.empty();
        });
  }

  void report_unknown_keys() {
    for (const auto& [key, value] : raw_.values) {
      if (!consumed_.contains(key)) {
        errors_.push_back(key + ": unknown key");
      }
    }
  }

 private:
  RawConfig& raw_;
  std::vector<std::string>& errors_;
  std::set<std::string> consumed_;
};

std::vector<fed::TrainMode> modes_for(RunMode mode) {
  switch (mode) {
    case RunMode::kCentralized:
      return {fed::TrainMode::kCentralized};
    case RunMode::kFederated:
      return {fed::TrainMode::kFederated};
    case RunMode::kBoth:
      return {fed::TrainMode::kCentralized, fed::TrainMode::kFederated};
  }
  return {};
}

const char* mode_label(fed::TrainMode mode) {
  return mode == fed::TrainMode::kCentralized ? "centralized" : "federated";
}

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Eigen::MatrixXd cached_snapshots(const fs::path& file, bool regen,
                                 const std::function<Eigen::MatrixXd()>& gen) {
  if (!regen && fs::exists(file)) return dynsys::load_snapshots(file);
  Eigen::MatrixXd m = gen();
  dynsys::save_snapshots(file, m);
  return m;
}

// Evenly strided subset of the columns (budget control).
Eigen::MatrixXd subsample_columns(const Eigen::MatrixXd& m, int max_columns) {
  if (max_columns <= 0 || m.cols() <= max_columns) return m;
  Eigen::MatrixXd out(m.rows(), max_columns);
  const double stride =
      static_cast<double>(m.cols()) / static_cast<double>(max_columns);
  for (int i = 0; i < max_columns; ++i) {
    out.col(i) = m.col(static_cast<Eigen::Index>(i * stride));
  }
  return out;
}

json mode_metrics(const std::vector<fed::RoundLog>& logs) {
  json out;
  out["initial_train_loss"] = logs.front().train_loss;
  out["initial_val_loss"] = logs.front().val_loss;
  out["final_train_loss"] = logs.back().train_loss;
  out["final_val_loss"] = logs.back().val_loss;
  out["rounds"] = logs.back().round;
  if (logs.back().val_loss > 0.0) {
    out["val_loss_drop_factor"] = logs.front().val_loss / logs.back().val_loss;
  }
  return out;
}

void add_parity(json& metrics) {
  if (!metrics["modes"].contains("centralized") ||
      !metrics["modes"].contains("federated")) {
    return;
  }
  const double c = metrics["modes"]["centralized"]["final_val_loss"];
  const double f = metrics["modes"]["federated"]["final_val_loss"];
  if (c > 0.0 && f > 0.0) {
    metrics["parity"]["final_val_loss_ratio"] =
        std::max(c, f) / std::min(c, f);
  }
}

void write_csv(const fs::path& path, const std::string& header,
               const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path);
  if (!os) throw config_error("cannot write " + path.string());
  os << header << "\n";
  body(os);
  if (!os) throw config_error("failed writing " + path.string());
}

fed::RoundObserver checkpoint_observer(
    const ExperimentConfig& cfg, const std::string& stem,
    const std::function<void(const fs::path&, const nn::Network&)>& save) {
  if (cfg.checkpoint_interval <= 0) return {};
  const fs::path dir = cfg.out_dir;
  const int interval = cfg.checkpoint_interval;
  return [dir, stem, interval, save](int round, const nn::Network& net) {
    if (round % interval != 0) return;
    char name[128];
    std::snprintf(name, sizeof(name), "%s_round%05d.bin", stem.c_str(), round);
    save(dir / name, net);
  };
}

void run_burgers(const ExperimentConfig& cfg, json& metrics) {
  const Eigen::VectorXd grid = cfg.burgers.spatial_grid();
  const auto params = cfg.burgers.parameter_grid();

  std::string key = "burgers";
  for (double v : {static_cast<double>(cfg.burgers.grid_points),
                   static_cast<double>(cfg.burgers.t_samples),
                   static_cast<double>(cfg.burgers.nu_samples),
                   cfg.burgers.t_min, cfg.burgers.t_max, cfg.burgers.nu_min,
                   cfg.burgers.nu_max}) {
    key += "|" + format_double(v);
  }
  const fs::path cache = cfg.effective_cache_dir() /
                         ("burgers_" + io::hex64(io::fnv1a64(key)) + ".snap");
  const Eigen::MatrixXd snapshots = cached_snapshots(
      cache, cfg.regen, [&] { return dynsys::burgers_snapshots(grid, params); });

  pod::RomConfig rom_config;
  rom_config.rank = cfg.latent_dim;
  rom_config.energy_fraction = cfg.energy_fraction;
  rom_config.train_fraction = cfg.train_fraction;
  rom_config.hidden_layers = cfg.hidden_layers;
  rom_config.hidden_width = cfg.hidden_width;
  rom_config.fed = cfg.fed;
  rom_config.centralized_batch = cfg.centralized_batch;

  const Eigen::VectorXd truth = dynsys::burgers_field(grid, cfg.showcase);
  std::map<std::string, Eigen::VectorXd> showcase_fields;
  bool basis_written = false;

  for (fed::TrainMode mode : modes_for(cfg.mode)) {
    const std::string label = mode_label(mode);
    auto observer = checkpoint_observer(
        cfg, "rom_" + label,
        [](const fs::path& p, const nn::Network& net) {
          nn::save_network(p, net);
        });
    pod::TrainedRom rom =
        pod::train_rom(snapshots, params, rom_config, mode, observer);

    fed::write_round_logs(cfg.out_dir / ("rounds_" + label + ".csv"), rom.logs);
    nn::save_network(cfg.out_dir / ("rom_" + label + ".bin"), rom.net);
    if (!basis_written) {
      pod::save_basis(cfg.out_dir / "basis.podb", rom.basis);
      json scalers;
      scalers["coeff_lo"] = std::vector<double>(
          rom.coeff_scaler.lo.data(),
          rom.coeff_scaler.lo.data() + rom.coeff_scaler.lo.size());
      scalers["coeff_hi"] = std::vector<double>(
          rom.coeff_scaler.hi.data(),
          rom.coeff_scaler.hi.data() + rom.coeff_scaler.hi.size());
      scalers["t_range"] = {rom.mu_scaler.t_lo, rom.mu_scaler.t_hi};
      scalers["nu_range"] = {rom.mu_scaler.nu_lo, rom.mu_scaler.nu_hi};
      std::ofstream os(cfg.out_dir / "scalers.json");
      os << scalers.dump(2) << "\n";
      basis_written = true;

      const int rank = rom.basis.rank();
      const double total = rom.basis.singular_values.squaredNorm();
      const double kept =
          rom.basis.singular_values.head(rank).squaredNorm();
      metrics["pod"]["rank"] = rank;
      metrics["pod"]["energy_captured"] = total > 0.0 ? kept / total : 1.0;
      Eigen::VectorXd truncated =
          pod::reconstruct(rom.basis, pod::project(rom.basis, truth));
      metrics["pod"]["truncation_rel_l2_showcase"] =
          metrics::relative_l2(truth, truncated);
    }

    pod::RomPrediction prediction = pod::rom_predict(rom, cfg.showcase);
    showcase_fields[label] = prediction.field;

    json m = mode_metrics(rom.logs);
    m["rel_l2_showcase"] = metrics::relative_l2(truth, prediction.field);
    m["showcase_extrapolated"] = prediction.extrapolated;
    for (const auto& w : rom.warnings) m["warnings"].push_back(w);
    metrics["modes"][label] = std::move(m);
  }

  std::string header = "x,truth";
  for (const auto& [label, field] : showcase_fields) header += "," + label;
  write_csv(cfg.out_dir / "reconstruction_burgers.csv", header,
            [&](std::ostream& os) {
              char buf[64];
              for (Eigen::Index i = 0; i < grid.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.12g,%.12g", grid[i],
                              truth[i]);
                os << buf;
                for (const auto& [label, field] : showcase_fields) {
                  std::snprintf(buf, sizeof(buf), ",%.12g", field[i]);
                  os << buf;
                }
                os << "\n";
              }
            });
  metrics["showcase"]["t"] = cfg.showcase.t;
  metrics["showcase"]["nu"] = cfg.showcase.nu;
  add_parity(metrics);
}

void run_ks(const ExperimentConfig& cfg, json& metrics) {
  std::string key = "ks";
  for (double v :
       {cfg.ks.domain, static_cast<double>(cfg.ks.grid_points), cfg.ks.dt,
        cfg.ks.sample_dt, cfg.ks.spinup_from, cfg.ks.t_end,
        static_cast<double>(cfg.seed)}) {
    key += "|" + format_double(v);
  }
  const fs::path cache = cfg.effective_cache_dir() /
                         ("ks_" + io::hex64(io::fnv1a64(key)) + ".snap");
  const Eigen::MatrixXd data = cached_snapshots(
      cache, cfg.regen, [&] { return dynsys::ks_generate(cfg.ks, cfg.seed); });

  const int total = static_cast<int>(data.cols());
  const int train_total = cfg.ks_train_samples;
  const Eigen::MatrixXd train_pool = data.leftCols(train_total);
  const Eigen::MatrixXd test = data.rightCols(total - train_total);
  const Eigen::MatrixXd train =
      subsample_columns(train_pool, cfg.max_train_columns);

  autoenc::TrainConfig ae_config;
  ae_config.latent_dim = cfg.latent_dim;
  ae_config.arch = autoenc::ArchKind::kKs;
  ae_config.train_fraction = cfg.train_fraction;
  ae_config.normalize = true;
  ae_config.fed = cfg.fed;
  ae_config.centralized_batch = cfg.centralized_batch;

  const double dx = cfg.ks.domain / cfg.ks.grid_points;
  const auto truth_samples = metrics::derivative_samples(test, dx);
  const auto range_x = metrics::sample_range(truth_samples, 0);
  const auto range_y = metrics::sample_range(truth_samples, 1);
  const auto hist_truth = metrics::joint_pdf(truth_samples, cfg.pdf_bins,
                                             cfg.pdf_bins, range_x, range_y);
  metrics::write_histogram_csv(cfg.out_dir / "jointpdf_truth.csv", hist_truth);
  metrics::write_histogram_json(cfg.out_dir / "jointpdf_truth.json",
                                hist_truth);

  const Eigen::Index mid_test = test.cols() / 2;
  std::map<std::string, Eigen::VectorXd> recon_mid;

  for (fed::TrainMode mode : modes_for(cfg.mode)) {
    const std::string label = mode_label(mode);
    autoenc::ArchKind arch = ae_config.arch;
    auto observer = checkpoint_observer(
        cfg, "ae_" + label,
        [arch](const fs::path& p, const nn::Network& net) {
          autoenc::save_autoencoder(p, autoenc::split_combined(net, arch));
        });
    autoenc::TrainedAutoencoder trained = autoenc::train_autoencoder(
        train, ae_config, mode, Eigen::MatrixXd(), observer);

    fed::write_round_logs(cfg.out_dir / ("rounds_" + label + ".csv"),
                          trained.logs);
    autoenc::save_autoencoder(cfg.out_dir / ("ae_" + label + ".bin"),
                              trained.model);

    Eigen::MatrixXd recon = autoenc::reconstruct_columns(trained, test);
    recon_mid[label] = recon.col(mid_test);
    const double test_mse =
        (recon - test).squaredNorm() / static_cast<double>(test.size());

    const auto samples = metrics::derivative_samples(recon, dx);
    const auto hist = metrics::joint_pdf(samples, cfg.pdf_bins, cfg.pdf_bins,
                                         range_x, range_y);
    metrics::write_histogram_csv(cfg.out_dir / ("jointpdf_" + label + ".csv"),
                                 hist);
    metrics::write_histogram_json(
        cfg.out_dir / ("jointpdf_" + label + ".json"), hist);

    json m = mode_metrics(trained.logs);
    m["test_mse"] = test_mse;
    m["input_scale"] = trained.input_scale;
    m["js_divergence_vs_truth"] = metrics::js_divergence(hist_truth, hist);
    m["pdf_clip_fraction"] = hist.clip_fraction;
    for (const auto& w : trained.warnings) m["warnings"].push_back(w);
    metrics["modes"][label] = std::move(m);
  }

  std::string header = "x,truth";
  for (const auto& [label, field] : recon_mid) header += "," + label;
  write_csv(cfg.out_dir / "reconstruction_ks.csv", header,
            [&](std::ostream& os) {
              char buf[64];
              for (int i = 0; i < cfg.ks.grid_points; ++i) {
                std::snprintf(buf, sizeof(buf), "%.12g,%.12g", i * dx,
                              test(i, mid_test));
                os << buf;
                for (const auto& [label, field] : recon_mid) {
                  std::snprintf(buf, sizeof(buf), ",%.12g", field[i]);
                  os << buf;
                }
                os << "\n";
              }
            });
  metrics["ks"]["train_columns"] = static_cast<int>(train.cols());
  metrics["ks"]["test_columns"] = static_cast<int>(test.cols());
  add_parity(metrics);
}

void run_sst(const ExperimentConfig& cfg, json& metrics) {
  ingest::SstArchive archive;
  if (!cfg.sst.path.empty()) {
    archive = ingest::load_sst(cfg.sst.path);
  } else {
    ingest::SynthConfig synth;
    synth.weeks = cfg.sst.synth_weeks;
    synth.seed = cfg.seed;
    synth.height = cfg.sst.synth_height;
    synth.width = cfg.sst.synth_width;
    std::string key = "sst";
    for (double v : {static_cast<double>(synth.weeks),
                     static_cast<double>(synth.height),
                     static_cast<double>(synth.width),
                     static_cast<double>(synth.seed)}) {
      key += "|" + format_double(v);
    }
    const fs::path cache = cfg.effective_cache_dir() /
                           ("sst_" + io::hex64(io::fnv1a64(key)) + ".sstg");
    if (cfg.regen || !fs::exists(cache)) {
      archive = ingest::synth_sst(synth);
      ingest::save_sst(cache, archive);
    } else {
      archive = ingest::load_sst(cache);
    }
  }

  const ingest::MaskedSnapshots masked = ingest::flatten_masked(archive);
  const int weeks = static_cast<int>(masked.matrix.cols());
  const int train_n = cfg.sst.train_snapshots;
  auto [normalized, norm] = ingest::normalize_anomaly(masked.matrix, train_n);
  const Eigen::MatrixXd train = normalized.leftCols(train_n);
  const Eigen::MatrixXd test = normalized.rightCols(weeks - train_n);

  // Persist the normalization; the mean field is large, so it goes to a
  // binary sidecar and the scalar metadata to JSON.
  dynsys::save_snapshots(cfg.out_dir / "temporal_mean.snap",
                         norm.temporal_mean);
  {
    json n;
    n["scale"] = norm.scale;
    n["train_snapshots"] = train_n;
    n["ocean_points"] = static_cast<int>(masked.point_index.size());
    std::ofstream os(cfg.out_dir / "normalization.json");
    os << n.dump(2) << "\n";
  }

  autoenc::TrainConfig ae_config;
  ae_config.latent_dim = cfg.latent_dim;
  ae_config.arch = autoenc::ArchKind::kSst;
  ae_config.normalize = false;  // anomaly pipeline already scaled the data
  ae_config.fed = cfg.fed;
  ae_config.centralized_batch = cfg.centralized_batch;

  const Eigen::Index mid_test = test.cols() / 2;
  std::map<std::string, Eigen::VectorXd> recon_mid;

  for (fed::TrainMode mode : modes_for(cfg.mode)) {
    const std::string label = mode_label(mode);
    autoenc::ArchKind arch = ae_config.arch;
    auto observer = checkpoint_observer(
        cfg, "ae_" + label,
        [arch](const fs::path& p, const nn::Network& net) {
          autoenc::save_autoencoder(p, autoenc::split_combined(net, arch));
        });
    autoenc::TrainedAutoencoder trained = autoenc::train_autoencoder(
        train, ae_config, mode, test, observer);

    fed::write_round_logs(cfg.out_dir / ("rounds_" + label + ".csv"),
                          trained.logs);
    autoenc::save_autoencoder(cfg.out_dir / ("ae_" + label + ".bin"),
                              trained.model);

    const double test_mse = autoenc::reconstruction_mse(trained, test);
    Eigen::VectorXd recon_norm =
        autoenc::reconstruct(trained.model, test.col(mid_test));
    recon_mid[label] = (recon_norm * norm.scale) + norm.temporal_mean;

    json m = mode_metrics(trained.logs);
    m["test_mse_normalized"] = test_mse;
    for (const auto& w : trained.warnings) m["warnings"].push_back(w);
    metrics["modes"][label] = std::move(m);
  }

  const Eigen::VectorXd truth_mid =
      masked.matrix.col(train_n + static_cast<int>(mid_test));
  std::string header = "row,col,truth";
  for (const auto& [label, field] : recon_mid) header += "," + label;
  write_csv(cfg.out_dir / "reconstruction_sst.csv", header,
            [&](std::ostream& os) {
              char buf[64];
              for (std::size_t r = 0; r < masked.point_index.size(); ++r) {
                const int idx = masked.point_index[r];
                std::snprintf(buf, sizeof(buf), "%d,%d,%.12g",
                              idx / masked.width, idx % masked.width,
                              truth_mid[static_cast<Eigen::Index>(r)]);
                os << buf;
                for (const auto& [label, field] : recon_mid) {
                  std::snprintf(buf, sizeof(buf), ",%.12g",
                                field[static_cast<Eigen::Index>(r)]);
                  os << buf;
                }
                os << "\n";
              }
            });

  metrics["sst"]["weeks"] = weeks;
  metrics["sst"]["train_snapshots"] = train_n;
  metrics["sst"]["ocean_points"] =
      static_cast<int>(masked.point_index.size());
  add_parity(metrics);
}

}  // namespace

ExperimentKind experiment_from_name(const std::string& name) {
  if (name == "burgers_rom") return ExperimentKind::kBurgersRom;
  if (name == "ks_autoencoder") return ExperimentKind::kKsAutoencoder;
  if (name == "sst_autoencoder") return ExperimentKind::kSstAutoencoder;
  throw config_error("experiment: unknown experiment '" + name + "'");
}

const char* experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kBurgersRom:
      return "burgers_rom";
    case ExperimentKind::kKsAutoencoder:
      return "ks_autoencoder";
    case ExperimentKind::kSstAutoencoder:
      return "sst_autoencoder";
  }
  return "?";
}

RunMode run_mode_from_name(const std::string& name) {
  if (name == "centralized") return RunMode::kCentralized;
  if (name == "federated") return RunMode::kFederated;
  if (name == "both") return RunMode::kBoth;
  throw config_error("mode: unknown mode '" + name + "'");
}

const char* run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::kCentralized:
      return "centralized";
    case RunMode::kFederated:
      return "federated";
    case RunMode::kBoth:
      return "both";
  }
  return "?";
}

ParseResult parse_config_file(const fs::path& path) {
  ParseResult result;
  RawConfig raw = parse_ini(path);
  result.errors = raw.errors;
  Reader reader(raw, result.errors);
  ExperimentConfig& cfg = result.config;

  const std::string experiment = reader.get_string("experiment", "");
  if (experiment.empty()) {
    result.errors.push_back("experiment: required key missing");
  } else {
    try {
      cfg.experiment = experiment_from_name(experiment);
    } catch (const config_error& e) {
      result.errors.push_back(e.what());
    }
  }
  try {
    cfg.mode = run_mode_from_name(reader.get_string("mode", "both"));
  } catch (const config_error& e) {
    result.errors.push_back(e.what());
  }
  cfg.seed = reader.get_u64("seed", 0);
  cfg.out_dir = reader.get_string("out", "runs/out");
  cfg.cache_dir = reader.get_string("cache", "");
  cfg.fed.threads = reader.get_int("threads", 1);
  cfg.checkpoint_interval = reader.get_int("checkpoint_interval", 0);
  cfg.centralized_batch = reader.get_int("centralized_batch", 320);

  cfg.fed.clients = reader.get_int("fed.K", cfg.fed.clients);
  cfg.fed.local_epochs = reader.get_int("fed.E", cfg.fed.local_epochs);
  cfg.fed.batch_size = reader.get_int("fed.B", cfg.fed.batch_size);
  cfg.fed.lr = reader.get_double("fed.lr", cfg.fed.lr);
  cfg.fed.rounds = reader.get_int("fed.rounds", cfg.fed.rounds);
  cfg.fed.seed = cfg.seed;

  cfg.latent_dim = reader.get_int("model.R", cfg.latent_dim);
  cfg.energy_fraction =
      reader.get_double("model.energy_fraction", cfg.energy_fraction);
  cfg.train_fraction =
      reader.get_double("model.train_fraction", cfg.train_fraction);
  cfg.hidden_layers = reader.get_int("model.hidden_layers", cfg.hidden_layers);
  cfg.hidden_width = reader.get_int("model.hidden_width", cfg.hidden_width);

  cfg.burgers.grid_points =
      reader.get_int("burgers.grid_points", cfg.burgers.grid_points);
  cfg.burgers.t_samples =
      reader.get_int("burgers.t_samples", cfg.burgers.t_samples);
  cfg.burgers.nu_samples =
      reader.get_int("burgers.nu_samples", cfg.burgers.nu_samples);
  cfg.burgers.t_min = reader.get_double("burgers.t_min", cfg.burgers.t_min);
  cfg.burgers.t_max = reader.get_double("burgers.t_max", cfg.burgers.t_max);
  cfg.burgers.nu_min = reader.get_double("burgers.nu_min", cfg.burgers.nu_min);
  cfg.burgers.nu_max = reader.get_double("burgers.nu_max", cfg.burgers.nu_max);
  cfg.showcase.t = reader.get_double("burgers.showcase_t", cfg.showcase.t);
  cfg.showcase.nu = reader.get_double("burgers.showcase_nu", cfg.showcase.nu);

  cfg.ks.domain = reader.get_double("ks.L", cfg.ks.domain);
  cfg.ks.grid_points = reader.get_int("ks.N", cfg.ks.grid_points);
  cfg.ks.dt = reader.get_double("ks.dt", cfg.ks.dt);
  cfg.ks.sample_dt = reader.get_double("ks.sample_dt", cfg.ks.sample_dt);
  cfg.ks.spinup_from = reader.get_double("ks.spinup_from", cfg.ks.spinup_from);
  cfg.ks.t_end = reader.get_double("ks.t_end", cfg.ks.t_end);
  cfg.ks_train_samples =
      reader.get_int("ks.train_samples", cfg.ks_train_samples);
  cfg.max_train_columns =
      reader.get_int("ks.max_train_columns", cfg.max_train_columns);

  cfg.pdf_bins = reader.get_int("metrics.pdf_bins", cfg.pdf_bins);

  cfg.sst.path = reader.get_string("sst.path", "");
  cfg.sst.synth_weeks = reader.get_int("sst.synth_weeks", cfg.sst.synth_weeks);
  cfg.sst.synth_height =
      reader.get_int("sst.synth_height", cfg.sst.synth_height);
  cfg.sst.synth_width = reader.get_int("sst.synth_width", cfg.sst.synth_width);
  cfg.sst.train_snapshots =
      reader.get_int("sst.train_snapshots", cfg.sst.train_snapshots);

  reader.report_unknown_keys();

  auto semantic = validate(cfg);
  result.errors.insert(result.errors.end(), semantic.begin(), semantic.end());
  return result;
}

ExperimentConfig load_config(const fs::path& path) {
  ParseResult result = parse_config_file(path);
  if (!result.errors.empty()) {
    std::string message = "invalid config " + path.string() + ":";
    for (const auto& e : result.errors) message += "\n  " + e;
    throw config_error(message);
  }
  return result.config;
}

std::vector<std::string> validate(const ExperimentConfig& cfg) {
  std::vector<std::string> errors;
  auto check = [&](bool ok, const std::string& message) {
    if (!ok) errors.push_back(message);
  };

  check(cfg.fed.clients >= 1, "fed.K: must be >= 1");
  check(cfg.fed.local_epochs >= 1, "fed.E: must be >= 1");
  check(cfg.fed.batch_size >= 1, "fed.B: must be >= 1");
  check(cfg.fed.lr >= 0.0, "fed.lr: must be >= 0");
  check(cfg.fed.rounds >= 1, "fed.rounds: must be >= 1");
  check(cfg.fed.threads >= 1, "threads: must be >= 1");
  check(cfg.checkpoint_interval >= 0, "checkpoint_interval: must be >= 0");
  check(cfg.centralized_batch >= 1, "centralized_batch: must be >= 1");
  check(cfg.energy_fraction > 0.0 && cfg.energy_fraction <= 1.0,
        "model.energy_fraction: must lie in (0, 1]");
  check(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0,
        "model.train_fraction: must lie in (0, 1]");
  check(cfg.hidden_layers >= 1, "model.hidden_layers: must be >= 1");
  check(cfg.hidden_width >= 1, "model.hidden_width: must be >= 1");
  check(cfg.pdf_bins >= 2, "metrics.pdf_bins: must be >= 2");
  check(!cfg.out_dir.empty(), "out: must not be empty");

  switch (cfg.experiment) {
    case ExperimentKind::kBurgersRom: {
      check(cfg.latent_dim >= 0, "model.R: must be >= 0");
      try {
        cfg.burgers.validate();
      } catch (const config_error& e) {
        errors.push_back(e.what());
      }
      break;
    }
    case ExperimentKind::kKsAutoencoder: {
      check(cfg.latent_dim >= 1, "model.R: must be >= 1 for autoencoders");
      check(cfg.latent_dim < cfg.ks.grid_points,
            "model.R: must be smaller than ks.N");
      try {
        cfg.ks.validate();
        const int total = cfg.ks.sample_count();
        check(cfg.ks_train_samples >= 1 && cfg.ks_train_samples < total,
              "ks.train_samples: must lie in [1, sample count)");
      } catch (const config_error& e) {
        errors.push_back(e.what());
      }
      check(cfg.max_train_columns >= 0, "ks.max_train_columns: must be >= 0");
      break;
    }
    case ExperimentKind::kSstAutoencoder: {
      check(cfg.latent_dim >= 1, "model.R: must be >= 1 for autoencoders");
      if (cfg.sst.path.empty()) {
        check(cfg.sst.synth_weeks >= 2, "sst.synth_weeks: must be >= 2");
        check(cfg.sst.synth_height >= 8 && cfg.sst.synth_width >= 8,
              "sst.synth grid: must be at least 8 x 8");
        check(cfg.sst.train_snapshots >= 2 &&
                  cfg.sst.train_snapshots < cfg.sst.synth_weeks,
              "sst.train_snapshots: must lie in [2, synth_weeks)");
      } else {
        check(cfg.sst.train_snapshots >= 2,
              "sst.train_snapshots: must be >= 2");
      }
      break;
    }
  }
  return errors;
}

std::uint64_t artifact_hash(const fs::path& file) {
  const std::string name = file.filename().string();
  const bool round_log =
      name.starts_with("rounds") && name.ends_with(".csv");
  if (!round_log) return io::fnv1a64_file(file);

  // Round logs are hashed without the trailing wall_ms column: wall-clock
  // jitter is not part of the reproducible surface.
  std::ifstream is(file);
  if (!is) throw config_error("cannot open " + file.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  std::string line;
  auto feed = [&h](const std::string& s) {
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= 0x100000001b3ull;
  };
  while (std::getline(is, line)) {
    const auto pos = line.rfind(',');
    feed(pos == std::string::npos ? line : line.substr(0, pos));
  }
  return h;
}

RunManifest run_experiment(const ExperimentConfig& cfg) {
  auto errors = validate(cfg);
  if (!errors.empty()) {
    std::string message = "invalid experiment config:";
    for (const auto& e : errors) message += "\n  " + e;
    throw config_error(message);
  }
  fs::create_directories(cfg.out_dir);
  fs::create_directories(cfg.effective_cache_dir());

  json metrics;
  metrics["experiment"] = experiment_name(cfg.experiment);
  metrics["mode"] = run_mode_name(cfg.mode);
  metrics["seed"] = cfg.seed;

  switch (cfg.experiment) {
    case ExperimentKind::kBurgersRom:
      run_burgers(cfg, metrics);
      break;
    case ExperimentKind::kKsAutoencoder:
      run_ks(cfg, metrics);
      break;
    case ExperimentKind::kSstAutoencoder:
      run_sst(cfg, metrics);
      break;
  }

  {
    std::ofstream os(cfg.out_dir / "metrics.json");
    if (!os) throw config_error("cannot write metrics.json");
    os << metrics.dump(2) << "\n";
  }

  RunManifest manifest;
  for (const auto& entry : fs::recursive_directory_iterator(cfg.out_dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), cfg.out_dir);
    if (rel == "manifest.json") continue;
    ManifestEntry m;
    m.path = rel.generic_string();
    m.bytes = static_cast<std::uint64_t>(entry.file_size());
    m.hash = io::hex64(artifact_hash(entry.path()));
    manifest.files.push_back(std::move(m));
  }
  std::sort(manifest.files.begin(), manifest.files.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return a.path < b.path;
            });

  json doc;
  doc["files"] = json::array();
  for (const auto& f : manifest.files) {
    doc["files"].push_back(
        {{"path", f.path}, {"bytes", f.bytes}, {"hash", f.hash}});
  }
  std::ofstream os(cfg.out_dir / "manifest.json");
  if (!os) throw config_error("cannot write manifest.json");
  os << doc.dump(2) << "\n";
  return manifest;
}

RunManifest read_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open " + path.string());
  json doc = json::parse(is, nullptr, true, true);
  RunManifest manifest;
  for (const auto& f : doc.at("files")) {
    manifest.files.push_back({f.at("path").get<std::string>(),
                              f.at("bytes").get<std::uint64_t>(),
                              f.at("hash").get<std::string>()});
  }
  return manifest;
}

}  // namespace fedtwin::experiment
