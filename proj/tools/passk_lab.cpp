// Command-line driver: passk-lab <experiment> --config <path> [--seed] [--out] [--threads]

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "passk/errors.hpp"
#include "passk/experiments.hpp"

namespace {

int run(const std::string& experiment, const std::string& config_path,
        const std::optional<std::uint64_t>& seed, const std::optional<std::string>& out,
        const std::optional<unsigned>& threads) {
  using nlohmann::json;
  std::ifstream in(config_path);
  if (!in) throw passk::ConfigError("cannot open config file " + config_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw passk::ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object()) throw passk::ConfigError("config must be a JSON object");
  if (!doc.contains("experiment")) {
    doc["experiment"] = experiment;
  } else if (doc["experiment"] != experiment) {
    throw passk::ConfigError("config names experiment " + doc["experiment"].dump() +
                             " but subcommand is " + experiment);
  }

  passk::ExperimentConfig cfg = passk::parse_config(doc);
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = *threads;
  // Output directory precedence: --out, then the environment, then the config file.
  if (out) {
    cfg.output_dir = *out;
  } else if (const char* env = std::getenv(passk::kOutputDirEnv.data()); env && *env) {
    cfg.output_dir = env;
  }

  const auto start = std::chrono::steady_clock::now();
  const passk::CommandResult result = passk::run_command(cfg);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto manifest = passk::write_artifacts(cfg, result, cfg.output_dir, seconds);

  for (const auto& [name, hash] : manifest.files) {
    std::cout << cfg.output_dir << "/" << name << "  " << hash.substr(0, 16) << "\n";
  }
  if (result.validation_failure) {
    std::cerr << "validation failure: " << *result.validation_failure << "\n";
    return passk::kExitValidation;
  }
  return passk::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact pass@k laboratory on enumerable toy environments"};
  app.set_version_flag("--version", std::string(passk::kToolVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;

  for (std::string_view name : passk::experiment_names()) {
    auto* sub = app.add_subcommand(std::string(name), "Run the " + std::string(name) + " experiment");
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    sub->add_option("--out", out, "Output directory (overrides $PASSK_LAB_OUT and the config)");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : passk::kExitConfig;
  }

  const std::string experiment = app.get_subcommands().front()->get_name();
  try {
    return run(experiment, config_path, seed, out, threads);
  } catch (const passk::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return passk::kExitCapacity;
  } catch (const passk::ValidationError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return passk::kExitValidation;
  } catch (const passk::Error& e) {
    // Shape, partition and domain errors at this level all stem from the config.
    std::cerr << "config error: " << e.what() << "\n";
    return passk::kExitConfig;
  }
}
