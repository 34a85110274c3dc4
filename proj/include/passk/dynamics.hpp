#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "passk/environments.hpp"
#include "passk/policy.hpp"
#include "passk/rng.hpp"

namespace passk {

std::string_view to_string(UpdateRule rule);
UpdateRule update_rule_from_string(std::string_view name);

/// Exact metrics of the policy at step t, plus what happened in that step's batch.
struct StepRecord {
  std::size_t t = 0;
  double p_m1 = 0.0;
  double p_m2 = 0.0;
  double j1 = 0.0;
  double jk = 0.0;
  /// pass@k - pass@1 restricted to the discovered mode: d - d^k with d = 1 - p_m1.
  /// Equals jk - j1 whenever the undiscovered mode carries no mass.
  double gap = 0.0;
  bool discovered_m2 = false;
  double grad_norm = 0.0;
  std::size_t batch_correct = 0;
};

struct RunSummary {
  double final_p_m1 = 0.0;
  std::size_t total_discoveries = 0;
  /// First t with gap below the threshold, if any.
  std::optional<std::size_t> steps_to_gap_below;
};

struct RunHistory {
  std::string scenario;
  std::vector<StepRecord> records;
  RunSummary summary;
};

/// Metrics of `policy` without a batch (discovery false, norms zero).
StepRecord measure(const Policy& policy, const Verifier& verifier,
                   const std::optional<ModePartition>& partition, std::size_t k, std::size_t t = 0);

struct StepOptions {
  /// Reinforce every sample rather than only verified ones.
  bool reinforce_all = false;
};

/// One sampled RLVR step: draw k samples, ascend sum of grad log pi over the
/// verified ones. The record describes the pre-update policy and the batch.
std::pair<Policy, StepRecord> step_sampled(const Policy& policy, const Verifier& verifier,
                                           const std::optional<ModePartition>& partition,
                                           std::size_t k, double eta, Rng& rng,
                                           const StepOptions& opts = {});

/// theta += eta * grad p / p with p = pi(M1). Throws DegenerateModeError when p = 0.
std::pair<Policy, StepRecord> step_idealized_mass(const Policy& policy, const Verifier& verifier,
                                                  const ModePartition& partition,
                                                  std::size_t k, double eta);

/// Runs `scenario.steps` updates of replicate `replicate` and returns steps + 1
/// records (the last one describes the final policy). Random draws come from
/// Rng::stream(scenario.seed, replicate).
RunHistory run(const Scenario& scenario, UpdateRule rule, std::size_t replicate = 0,
               double gap_threshold = 1e-3);

/// All replicates of a scenario, evaluated on up to `threads` workers.
std::vector<RunHistory> run_replicates(const Scenario& scenario, UpdateRule rule,
                                       unsigned threads = 1, double gap_threshold = 1e-3);

struct DiscoverySummary {
  double epsilon = 0.0;
  std::size_t k = 0;
  std::size_t trials = 0;
  std::size_t discoveries = 0;
  double empirical_rate = 0.0;
  /// 1 - (1 - epsilon)^k
  double exact_rate = 0.0;
  /// k * epsilon
  double bound_keps = 0.0;
  /// Binomial standard deviation of the empirical rate around the exact rate.
  double sigma = 0.0;
};

/// Frequency with which a first batch of k samples hits M2, over `trials` batches.
DiscoverySummary discovery_experiment(const Scenario& scenario, std::size_t trials,
                                      unsigned threads = 1);

struct TaylorReport {
  double p = 0.0;
  /// (eta / p) * |grad p|^2
  double predicted_delta = 0.0;
  double actual_delta = 0.0;
  double discrepancy = 0.0;
};

/// Compares one idealized mass-ascent step with its first-order prediction.
TaylorReport taylor_check(const Policy& policy, const ModePartition& partition, double eta);

}  // namespace passk
