#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "fedtwin/errors.hpp"
#include "fedtwin/experiment.hpp"

using namespace fedtwin;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const fs::path& dir, const std::string& name,
                      const std::string& text) {
  fs::create_directories(dir);
  const fs::path file = dir / name;
  std::ofstream os(file);
  os << text;
  return file;
}

std::string tiny_burgers_config(const fs::path& out, double lr,
                                const std::string& mode = "both") {
  return "experiment = burgers_rom\n"
         "mode = " + mode + "\n"
         "seed = 11\n"
         "out = " + out.generic_string() + "\n"
         "\n"
         "[fed]\n"
         "K = 4\n"
         "E = 1\n"
         "B = 8\n"
         "lr = " + std::to_string(lr) + "\n"
         "rounds = 3\n"
         "\n"
         "[model]\n"
         "R = 3\n"
         "\n"
         "[burgers]\n"
         "grid_points = 32\n"
         "t_samples = 8\n"
         "nu_samples = 4\n";
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config validation reports every problem with field paths") {
  const fs::path dir = fs::temp_directory_path() / "fedtwin_exp_cfg";
  const fs::path file = write_config(dir, "bad.cfg",
                                     "experiment = burgers_rom\n"
                                     "mode = sideways\n"
                                     "[fed]\n"
                                     "K = 0\n"
                                     "rounds = -2\n"
                                     "lr = banana\n"
                                     "[mystery]\n"
                                     "what = 1\n");
  auto result = experiment::parse_config_file(file);
  REQUIRE_FALSE(result.errors.empty());
  auto has = [&](const std::string& needle) {
    for (const auto& e : result.errors) {
      if (e.find(needle) != std::string::npos) return true;
    }
    return false;
  };
  CHECK(has("fed.K"));
  CHECK(has("fed.rounds"));
  CHECK(has("fed.lr"));
  CHECK(has("mode"));
  CHECK(has("mystery.what"));

  CHECK_THROWS_AS(experiment::load_config(file), config_error);
  fs::remove_all(dir);
}

TEST_CASE("missing file and missing experiment key") {
  auto missing = experiment::parse_config_file("/nonexistent/path.cfg");
  CHECK_FALSE(missing.errors.empty());

  const fs::path dir = fs::temp_directory_path() / "fedtwin_exp_cfg2";
  const fs::path file = write_config(dir, "empty.cfg", "# nothing here\n");
  auto result = experiment::parse_config_file(file);
  bool found = false;
  for (const auto& e : result.errors) {
    if (e.find("experiment") != std::string::npos) found = true;
  }
  CHECK(found);
  fs::remove_all(dir);
}

TEST_CASE("shipped configs validate clean") {
  const fs::path configs = fs::path(FEDTWIN_SOURCE_DIR) / "configs";
  int checked = 0;
  for (const auto& entry : fs::directory_iterator(configs)) {
    if (entry.path().extension() != ".cfg") continue;
    auto result = experiment::parse_config_file(entry.path());
    INFO(entry.path().string());
    for (const auto& e : result.errors) {
      INFO(e);
    }
    CHECK(result.errors.empty());
    ++checked;
  }
  CHECK(checked >= 3);
}

TEST_CASE("tiny run produces a complete, deterministic artifact set") {
  const fs::path base = fs::temp_directory_path() / "fedtwin_exp_run";
  fs::remove_all(base);

  const fs::path cfg_file =
      write_config(base, "run.cfg", tiny_burgers_config(base / "out_a", 0.01));
  auto cfg = experiment::load_config(cfg_file);
  auto manifest_a = experiment::run_experiment(cfg);

  // completeness: every file in the run directory is listed
  std::set<std::string> on_disk;
  for (const auto& entry : fs::recursive_directory_iterator(base / "out_a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), base / "out_a").generic_string();
    if (rel != "manifest.json") on_disk.insert(rel);
  }
  std::set<std::string> listed;
  for (const auto& f : manifest_a.files) listed.insert(f.path);
  CHECK(on_disk == listed);
  CHECK(listed.contains("metrics.json"));
  CHECK(listed.contains("rounds_centralized.csv"));
  CHECK(listed.contains("rounds_federated.csv"));
  CHECK(listed.contains("reconstruction_burgers.csv"));
  CHECK(listed.contains("basis.podb"));

  // determinism: a second run into a fresh directory hashes identically
  cfg.out_dir = base / "out_b";
  auto manifest_b = experiment::run_experiment(cfg);
  REQUIRE(manifest_a.files.size() == manifest_b.files.size());
  for (std::size_t i = 0; i < manifest_a.files.size(); ++i) {
    CHECK(manifest_a.files[i].path == manifest_b.files[i].path);
    CHECK(manifest_a.files[i].hash == manifest_b.files[i].hash);
  }

  // the manifest on disk can be read back
  auto parsed = experiment::read_manifest(base / "out_a" / "manifest.json");
  CHECK(parsed.files.size() == manifest_a.files.size());

  fs::remove_all(base);
}

TEST_CASE("lr = 0 keeps both modes identical and losses constant") {
  const fs::path base = fs::temp_directory_path() / "fedtwin_exp_zero";
  fs::remove_all(base);
  const fs::path cfg_file =
      write_config(base, "run.cfg", tiny_burgers_config(base / "out", 0.0));
  auto cfg = experiment::load_config(cfg_file);
  experiment::run_experiment(cfg);

  const std::string cent = slurp(base / "out" / "rounds_centralized.csv");
  const std::string fede = slurp(base / "out" / "rounds_federated.csv");

  // strip wall_ms column, then the logs must agree line for line
  auto strip = [](const std::string& text) {
    std::string out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      out += line.substr(0, line.rfind(',')) + "\n";
    }
    return out;
  };
  CHECK(strip(cent) == strip(fede));

  // constant loss columns
  std::istringstream is(strip(cent));
  std::string header, first, line;
  std::getline(is, header);
  std::getline(is, first);
  const std::string tail = first.substr(first.find(','));
  int rows = 1;
  while (std::getline(is, line)) {
    CHECK(line.substr(line.find(',')) == tail);
    ++rows;
  }
  CHECK(rows == 4);  // round 0 + 3 rounds
  fs::remove_all(base);
}

TEST_CASE("artifact_hash ignores the wall_ms column of round logs") {
  const fs::path dir = fs::temp_directory_path() / "fedtwin_exp_hash";
  fs::create_directories(dir);
  {
    std::ofstream a(dir / "rounds_x.csv");
    a << "round,train_loss,val_loss,wall_ms\n0,1,2,17\n1,0.5,1,23\n";
    std::ofstream b(dir / "rounds_y.csv");
    b << "round,train_loss,val_loss,wall_ms\n0,1,2,400\n1,0.5,1,1\n";
    std::ofstream c(dir / "other.csv");
    c << "a,b\n1,17\n";
    std::ofstream d(dir / "other2.csv");
    d << "a,b\n1,23\n";
  }
  CHECK(experiment::artifact_hash(dir / "rounds_x.csv") ==
        experiment::artifact_hash(dir / "rounds_y.csv"));
  CHECK(experiment::artifact_hash(dir / "other.csv") !=
        experiment::artifact_hash(dir / "other2.csv"));
  fs::remove_all(dir);
}
