#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "passk/dynamics.hpp"
#include "passk/environments.hpp"
#include "passk/estimators.hpp"

namespace passk {

inline constexpr std::string_view kToolName = "passk-lab";
inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kOutputDirEnv = "PASSK_LAB_OUT";

struct ScenarioConfig {
  std::string kind = "bandit";  // "bandit" or "sequence"
  std::size_t n_answers = 10;
  std::optional<IndexSet> correct;
  std::optional<ModeIndexSets> modes;
  std::optional<double> epsilon;
  std::optional<std::vector<double>> initial_logits;

  std::size_t vocab = 2;
  std::size_t horizon = 3;
  std::vector<std::vector<Token>> targets;
  std::optional<std::pair<std::vector<std::vector<Token>>, std::vector<std::vector<Token>>>>
      sequence_modes;

  std::size_t k = 4;
  double eta = 0.05;
  std::size_t steps = 0;
  std::size_t replicates = 1;
  bool reinforce_all = false;
  UpdateRule rule = UpdateRule::SampledReinforce;
};

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string output_dir = "out";
  ScenarioConfig scenario;

  std::vector<double> j1_grid;
  std::vector<std::size_t> k_list{2, 4, 8, 16};
  std::vector<double> epsilon_list;
  std::size_t trials = 100000;
  std::size_t groups = 100000;
  std::size_t cases = 100;
  std::size_t degenerate_cases = 0;
  std::size_t batch_size = 8;
  std::vector<EstimatorKind> estimators{EstimatorKind::Pass1MC, EstimatorKind::PassKJoint,
                                        EstimatorKind::PassKLeaveOneOut,
                                        EstimatorKind::AlphaPlugin};
  double fd_step = 1e-5;
  double fd_rel_tol = 1e-6;
  std::size_t max_fd_coords = 512;
  double gap_threshold = 1e-3;

  /// Echo of the effective configuration, written into the manifest.
  nlohmann::json to_json() const;
};

inline const std::vector<std::string_view>& experiment_names() {
  static const std::vector<std::string_view> names{"figure1",   "collinearity", "vanish",
                                                   "collapse",  "discovery",    "estimators"};
  return names;
}

/// Strict parse: unknown keys and wrong types raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Builds the policy, verifier and optional mode partition described by `cfg`.
Scenario build_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

/// `points` evenly spaced values i / (points - 1) on [0, 1].
std::vector<double> linear_grid(std::size_t points);

/// Every CSV number is written with 17 significant digits.
std::string format_number(double x);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(std::vector<std::string> row);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct Artifact {
  std::string name;
  std::string content;
};

struct CommandResult {
  std::vector<Artifact> artifacts;
  /// Set when a numerical oracle disagreed; the artifacts are still written.
  std::optional<std::string> validation_failure;
};

/// Seeded random policy/verifier pair used by the collinearity sweep.
/// Categorical with N <= 64 or autoregressive with V^T <= 4096; the correct
/// set is redrawn until pass@1 lies in [0.02, 0.6]. `degenerate` forces an
/// empty correct set.
struct RandomCase {
  Policy policy;
  Verifier verifier;
  std::size_t k;
};
RandomCase random_case(std::uint64_t seed, std::size_t index, std::size_t k, bool degenerate);

CommandResult cmd_figure1(const ExperimentConfig& cfg);
CommandResult cmd_collinearity(const ExperimentConfig& cfg);
CommandResult cmd_vanish(const ExperimentConfig& cfg);
CommandResult cmd_collapse(const ExperimentConfig& cfg);
CommandResult cmd_discovery(const ExperimentConfig& cfg);
CommandResult cmd_estimators(const ExperimentConfig& cfg);

CommandResult run_command(const ExperimentConfig& cfg);

std::string sha256_hex(std::string_view data);

struct RunManifest {
  nlohmann::json config;
  std::vector<std::pair<std::string, std::string>> files;  // name, sha256
  std::string tool_version;
  double duration_seconds = 0.0;

  nlohmann::json to_json() const;
};

/// Writes every artifact plus manifest.json into `out_dir`.
RunManifest write_artifacts(const ExperimentConfig& cfg, const CommandResult& result,
                            const std::filesystem::path& out_dir, double duration_seconds);

/// True when every file listed in out_dir/manifest.json exists with a matching hash.
bool verify_manifest(const std::filesystem::path& out_dir);

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitCapacity = 3,
  kExitValidation = 4,
};

}  // namespace passk
