#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "passk/environments.hpp"
#include "passk/policy.hpp"

namespace passk {

enum class EstimatorKind { Pass1MC, PassKJoint, PassKLeaveOneOut, AlphaPlugin };

std::string_view to_string(EstimatorKind kind);
/// Accepts "pass1", "joint", "loo", "alpha_plugin" (and the enumerator names).
EstimatorKind estimator_from_string(std::string_view name);

/// Monte Carlo gradient estimate over `groups` independent groups.
struct GradEstimate {
  ParamVector mean;
  /// Per-coordinate sample variance of the per-group contributions.
  std::vector<double> variance;
  std::size_t groups = 0;
  /// Fraction of groups whose reward weighting made the contribution exactly zero.
  double zero_fraction = 0.0;

  double variance_trace() const;
  /// sqrt(variance / groups) per coordinate.
  std::vector<double> standard_errors() const;
};

/// Groups are drawn in fixed-size chunks; chunk c uses Rng::stream(seed, c).
/// Two estimators called with the same seed and k therefore see the same samples.
inline constexpr std::size_t kGroupsPerChunk = 4096;

struct MonteCarloOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Raw REINFORCE: mean of V(y) * grad log pi(y) over n samples.
GradEstimate estimate_pass1(const Policy& policy, const Verifier& verifier, std::size_t n,
                            const MonteCarloOptions& opts);

/// Joint score-function estimator of grad J_k: per group of k samples,
/// R * sum_i grad log pi(y_i) with R = 1 - prod_i (1 - V(y_i)).
GradEstimate estimate_passk_joint(const Policy& policy, const Verifier& verifier, std::size_t k,
                                  std::size_t groups, const MonteCarloOptions& opts);

/// Leave-one-out baseline: sum_i (R - R_{-i}) grad log pi(y_i). Requires k >= 2.
GradEstimate estimate_passk_loo(const Policy& policy, const Verifier& verifier, std::size_t k,
                                std::size_t groups, const MonteCarloOptions& opts);

/// alpha(J1_hat, k) times the pass@1 estimate from the same n samples.
/// The variance field is alpha_hat^2 times the pass@1 variance.
GradEstimate estimate_alpha_plugin(const Policy& policy, const Verifier& verifier,
                                   std::size_t k, std::size_t n, const MonteCarloOptions& opts);

/// Dispatch by kind. `groups` is the sample count for Pass1MC and AlphaPlugin.
GradEstimate estimate(EstimatorKind kind, const Policy& policy, const Verifier& verifier,
                      std::size_t k, std::size_t groups, const MonteCarloOptions& opts);

/// Contribution of one sampled group under the joint estimator.
std::vector<double> joint_group_contribution(const Policy& policy, const Verifier& verifier,
                                             std::span<const TrajectoryCode> group);
/// Contribution of one sampled group under the leave-one-out estimator.
std::vector<double> loo_group_contribution(const Policy& policy, const Verifier& verifier,
                                           std::span<const TrajectoryCode> group);

/// (1 - j1)^m: probability that all m samples fail, so the batch gradient is zero.
double zero_signal_prob(double j1, std::size_t m);

/// Unbiased pass@k from n samples with c correct: 1 - C(n-c, k) / C(n, k),
/// evaluated as a running product.
double passk_eval(std::size_t n, std::size_t c, std::size_t k);

}  // namespace passk
