#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "fedtwin/errors.hpp"
#include "fedtwin/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

struct RunOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  int threads = 0;
  bool regen = false;
};

int do_validate(const std::string& path) {
  auto result = fedtwin::experiment::parse_config_file(path);
  if (result.errors.empty()) {
    std::printf("%s: ok\n", path.c_str());
    return kExitOk;
  }
  std::fprintf(stderr, "%s: %zu problem(s)\n", path.c_str(),
               result.errors.size());
  for (const auto& e : result.errors) {
    std::fprintf(stderr, "  %s\n", e.c_str());
  }
  return kExitConfigError;
}

int do_run(const RunOptions& options) {
  auto cfg = fedtwin::experiment::load_config(options.config_path);
  if (options.seed_set) {
    cfg.seed = options.seed;
    cfg.fed.seed = options.seed;
  }
  if (!options.out.empty()) cfg.out_dir = options.out;
  if (options.threads > 0) cfg.fed.threads = options.threads;
  cfg.regen = options.regen;

  auto manifest = fedtwin::experiment::run_experiment(cfg);
  std::printf("run complete: %zu artifact(s) in %s\n", manifest.files.size(),
              cfg.out_dir.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated training of neural surrogates for dynamical systems"};
  app.require_subcommand(1);

  RunOptions options;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("config", options.config_path, "Experiment config file")
      ->required();
  run->add_option("--seed", options.seed, "Override the config seed")
      ->trigger_on_parse()
      ->each([&](const std::string&) { options.seed_set = true; });
  run->add_option("--out", options.out, "Override the output directory");
  run->add_option("--threads", options.threads,
                  "Worker threads for per-round client updates");
  run->add_flag("--regen", options.regen,
                "Regenerate datasets instead of reusing cached files");

  std::string validate_path;
  auto* validate =
      app.add_subcommand("validate", "Validate a config file and exit");
  validate->add_option("config", validate_path, "Experiment config file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("validate")) return do_validate(validate_path);
    return do_run(options);
  } catch (const fedtwin::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntimeError;
  }
}
