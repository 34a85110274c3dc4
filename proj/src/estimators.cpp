#include "passk/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "passk/errors.hpp"
#include "passk/objectives.hpp"
#include "passk/parallel.hpp"
#include "passk/rng.hpp"

namespace passk {

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Pass1MC: return "Pass1MC";
    case EstimatorKind::PassKJoint: return "PassKJoint";
    case EstimatorKind::PassKLeaveOneOut: return "PassKLeaveOneOut";
    case EstimatorKind::AlphaPlugin: return "AlphaPlugin";
  }
  return "unknown";
}

EstimatorKind estimator_from_string(std::string_view name) {
  if (name == "pass1" || name == "Pass1MC") return EstimatorKind::Pass1MC;
  if (name == "joint" || name == "PassKJoint") return EstimatorKind::PassKJoint;
  if (name == "loo" || name == "PassKLeaveOneOut") return EstimatorKind::PassKLeaveOneOut;
  if (name == "alpha_plugin" || name == "AlphaPlugin") return EstimatorKind::AlphaPlugin;
  throw DomainError("unknown estimator '" + std::string(name) + "'");
}

double GradEstimate::variance_trace() const {
  double t = 0.0;
  for (double v : variance) t += v;
  return t;
}

std::vector<double> GradEstimate::standard_errors() const {
  std::vector<double> se(variance.size());
  for (std::size_t i = 0; i < se.size(); ++i) {
    se[i] = std::sqrt(variance[i] / static_cast<double>(groups));
  }
  return se;
}

namespace {

// One term of a group contribution: weight * grad log pi(code).
struct Term {
  TrajectoryCode code;
  double weight;
};

struct ChunkStats {
  std::size_t n = 0;
  std::size_t zeros = 0;
  std::vector<double> sum;
  std::vector<double> sumsq;
};

// Draws `groups` groups chunk by chunk. `draw(rng, terms)` samples one group,
// fills the nonzero terms of its contribution and returns true when the group
// is a zero-reward event.
template <class Draw>
GradEstimate run_groups(const Policy& policy, std::size_t groups, const MonteCarloOptions& opts,
                        Draw draw) {
  if (groups < 1) throw DomainError("Monte Carlo estimate needs at least one group");
  const PolicyShape& shape = policy.shape();
  const std::size_t dim = shape.param_count();
  const std::size_t V = shape.vocab();
  const std::size_t n_chunks = (groups + kGroupsPerChunk - 1) / kGroupsPerChunk;
  std::vector<ChunkStats> chunks(n_chunks);

  parallel_for(n_chunks, opts.threads, [&](std::size_t c) {
    Rng rng = Rng::stream(opts.seed, c);
    Draw local_draw = draw;
    ChunkStats& st = chunks[c];
    st.sum.assign(dim, 0.0);
    st.sumsq.assign(dim, 0.0);
    std::vector<double> scratch(dim, 0.0);
    std::vector<std::uint8_t> marked(shape.row_count(), 0);
    std::vector<std::size_t> rows;
    std::vector<Term> terms;
    const std::size_t begin = c * kGroupsPerChunk;
    const std::size_t end = std::min(groups, begin + kGroupsPerChunk);
    for (std::size_t g = begin; g < end; ++g) {
      terms.clear();
      if (local_draw(rng, terms)) ++st.zeros;
      ++st.n;
      if (terms.empty()) continue;
      rows.clear();
      for (const Term& t : terms) {
        policy.add_log_prob_grad(t.code, t.weight, scratch);
        for (std::size_t d = 0; d < shape.horizon(); ++d) {
          const std::size_t r = shape.row_of_prefix(t.code, d);
          if (!marked[r]) {
            marked[r] = 1;
            rows.push_back(r);
          }
        }
      }
      for (std::size_t r : rows) {
        marked[r] = 0;
        for (std::size_t i = r * V; i < (r + 1) * V; ++i) {
          st.sum[i] += scratch[i];
          st.sumsq[i] += scratch[i] * scratch[i];
          scratch[i] = 0.0;
        }
      }
    }
  });

  // Chan et al. pairwise merge, in chunk order.
  std::vector<double> mean(dim, 0.0);
  std::vector<double> m2(dim, 0.0);
  double total = 0.0;
  std::size_t zeros = 0;
  for (const ChunkStats& st : chunks) {
    const double nb = static_cast<double>(st.n);
    const double n_new = total + nb;
    for (std::size_t i = 0; i < dim; ++i) {
      const double mean_b = st.sum[i] / nb;
      const double m2_b = std::max(0.0, st.sumsq[i] - st.sum[i] * mean_b);
      const double delta = mean_b - mean[i];
      mean[i] += delta * nb / n_new;
      m2[i] += m2_b + delta * delta * total * nb / n_new;
    }
    total = n_new;
    zeros += st.zeros;
  }

  GradEstimate est;
  est.groups = groups;
  est.zero_fraction = static_cast<double>(zeros) / static_cast<double>(groups);
  est.variance.assign(dim, 0.0);
  if (groups > 1) {
    for (std::size_t i = 0; i < dim; ++i) est.variance[i] = m2[i] / (total - 1.0);
  }
  est.mean = ParamVector(std::move(mean));
  return est;
}

std::size_t draw_group(const Policy& policy, const Verifier& verifier, Rng& rng, std::size_t k,
                       std::vector<TrajectoryCode>& batch) {
  batch.resize(k);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < k; ++i) {
    batch[i] = policy.sample_code(rng);
    correct += static_cast<std::size_t>(verifier.verify(batch[i]));
  }
  return correct;
}

// Nonzero terms of the joint estimator for one group.
void joint_terms(const Verifier& verifier, std::span<const TrajectoryCode> group,
                 std::vector<Term>& terms) {
  const bool any = std::any_of(group.begin(), group.end(),
                               [&](TrajectoryCode c) { return verifier.verify(c) == 1; });
  if (!any) return;
  for (TrajectoryCode c : group) terms.push_back({c, 1.0});
}

// R - R_{-i} is 1 exactly when sample i is the only correct one.
void loo_terms(const Verifier& verifier, std::span<const TrajectoryCode> group,
               std::vector<Term>& terms) {
  std::size_t correct = 0;
  TrajectoryCode only = 0;
  for (TrajectoryCode c : group) {
    if (verifier.verify(c) == 1) {
      ++correct;
      only = c;
    }
  }
  if (correct == 1) terms.push_back({only, 1.0});
}

std::vector<double> dense(const Policy& policy, const std::vector<Term>& terms) {
  std::vector<double> g(policy.params().size(), 0.0);
  for (const Term& t : terms) policy.add_log_prob_grad(t.code, t.weight, g);
  return g;
}

}  // namespace

GradEstimate estimate_pass1(const Policy& policy, const Verifier& verifier, std::size_t n,
                            const MonteCarloOptions& opts) {
  return run_groups(policy, n, opts, [&](Rng& rng, std::vector<Term>& terms) {
    const TrajectoryCode y = policy.sample_code(rng);
    if (verifier.verify(y) == 0) return true;
    terms.push_back({y, 1.0});
    return false;
  });
}

GradEstimate estimate_passk_joint(const Policy& policy, const Verifier& verifier, std::size_t k,
                                  std::size_t groups, const MonteCarloOptions& opts) {
  check_k(k);
  return run_groups(policy, groups, opts,
                    [&, batch = std::vector<TrajectoryCode>()](Rng& rng,
                                                               std::vector<Term>& terms) mutable {
                      const std::size_t correct = draw_group(policy, verifier, rng, k, batch);
                      joint_terms(verifier, batch, terms);
                      return correct == 0;
                    });
}

GradEstimate estimate_passk_loo(const Policy& policy, const Verifier& verifier, std::size_t k,
                                std::size_t groups, const MonteCarloOptions& opts) {
  check_k(k);
  if (k < 2) throw DomainError("leave-one-out estimator needs k >= 2");
  return run_groups(policy, groups, opts,
                    [&, batch = std::vector<TrajectoryCode>()](Rng& rng,
                                                               std::vector<Term>& terms) mutable {
                      const std::size_t correct = draw_group(policy, verifier, rng, k, batch);
                      loo_terms(verifier, batch, terms);
                      return correct != 1;
                    });
}

GradEstimate estimate_alpha_plugin(const Policy& policy, const Verifier& verifier,
                                   std::size_t k, std::size_t n, const MonteCarloOptions& opts) {
  check_k(k);
  GradEstimate base = estimate_pass1(policy, verifier, n, opts);
  // zero_fraction counts failed samples, so the plug-in J1 is its complement.
  const double j1_hat = std::clamp(1.0 - base.zero_fraction, 0.0, 1.0);
  const double a = alpha(j1_hat, k);
  base.mean = base.mean.scaled(a);
  for (double& v : base.variance) v *= a * a;
  return base;
}

GradEstimate estimate(EstimatorKind kind, const Policy& policy, const Verifier& verifier,
                      std::size_t k, std::size_t groups, const MonteCarloOptions& opts) {
  switch (kind) {
    case EstimatorKind::Pass1MC: return estimate_pass1(policy, verifier, groups, opts);
    case EstimatorKind::PassKJoint: return estimate_passk_joint(policy, verifier, k, groups, opts);
    case EstimatorKind::PassKLeaveOneOut:
      return estimate_passk_loo(policy, verifier, k, groups, opts);
    case EstimatorKind::AlphaPlugin:
      return estimate_alpha_plugin(policy, verifier, k, groups, opts);
  }
  throw DomainError("unknown estimator kind");
}

std::vector<double> joint_group_contribution(const Policy& policy, const Verifier& verifier,
                                             std::span<const TrajectoryCode> group) {
  std::vector<Term> terms;
  joint_terms(verifier, group, terms);
  return dense(policy, terms);
}

std::vector<double> loo_group_contribution(const Policy& policy, const Verifier& verifier,
                                           std::span<const TrajectoryCode> group) {
  std::vector<Term> terms;
  loo_terms(verifier, group, terms);
  return dense(policy, terms);
}

double zero_signal_prob(double j1, std::size_t m) {
  check_probability(j1, "j1");
  if (m < 1) throw DomainError("zero_signal_prob: m must be at least 1");
  return ipow(1.0 - j1, m);
}

double passk_eval(std::size_t n, std::size_t c, std::size_t k) {
  if (k < 1) throw DomainError("passk_eval: k must be at least 1");
  if (k > n) throw DomainError("passk_eval: k > n");
  if (c > n) throw DomainError("passk_eval: c > n");
  // C(n-c, k) / C(n, k) = prod_{i<k} (n-c-i) / (n-i)
  double all_fail = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (n - c <= i) return 1.0;
    all_fail *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
  }
  return 1.0 - all_fail;
}

}  // namespace passk
