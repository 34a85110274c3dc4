#include "passk/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "passk/errors.hpp"
#include "passk/objectives.hpp"
#include "passk/parallel.hpp"

namespace passk {

std::string_view to_string(UpdateRule rule) {
  switch (rule) {
    case UpdateRule::SampledReinforce: return "sampled";
    case UpdateRule::IdealizedMassAscent: return "idealized";
  }
  return "unknown";
}

UpdateRule update_rule_from_string(std::string_view name) {
  if (name == "sampled" || name == "SampledReinforce") return UpdateRule::SampledReinforce;
  if (name == "idealized" || name == "IdealizedMassAscent") return UpdateRule::IdealizedMassAscent;
  throw DomainError("unknown update rule '" + std::string(name) + "'");
}

StepRecord measure(const Policy& policy, const Verifier& verifier,
                   const std::optional<ModePartition>& partition, std::size_t k, std::size_t t) {
  StepRecord rec;
  rec.t = t;
  rec.j1 = j1_exact(policy, verifier);
  rec.jk = jk_from_j1(rec.j1, k);
  if (partition) {
    rec.p_m1 = std::clamp(mass(policy, partition->m1()), 0.0, 1.0);
    rec.p_m2 = std::clamp(mass(policy, partition->m2()), 0.0, 1.0);
  } else {
    // Without a partition the whole correct set is the discovered mode.
    rec.p_m1 = rec.j1;
  }
  rec.gap = gap(rec.p_m1, k);
  return rec;
}

std::pair<Policy, StepRecord> step_sampled(const Policy& policy, const Verifier& verifier,
                                           const std::optional<ModePartition>& partition,
                                           std::size_t k, double eta, Rng& rng,
                                           const StepOptions& opts) {
  check_k(k);
  if (!(eta > 0.0)) throw DomainError("step_sampled: eta must be > 0");
  StepRecord rec = measure(policy, verifier, partition, k);

  std::vector<double> direction(policy.params().size(), 0.0);
  std::size_t reinforced = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const TrajectoryCode y = policy.sample_code(rng);
    const bool correct = verifier.verify(y) == 1;
    rec.batch_correct += correct ? 1 : 0;
    if (partition && partition->m2().contains(y)) rec.discovered_m2 = true;
    if (correct || opts.reinforce_all) {
      policy.add_log_prob_grad(y, 1.0, direction);
      ++reinforced;
    }
  }
  if (reinforced == 0) return {policy, rec};

  ParamVector dir(std::move(direction));
  rec.grad_norm = dir.norm();
  return {policy.apply_update(dir, eta), rec};
}

std::pair<Policy, StepRecord> step_idealized_mass(const Policy& policy, const Verifier& verifier,
                                                  const ModePartition& partition,
                                                  std::size_t k, double eta) {
  if (!(eta > 0.0)) throw DomainError("step_idealized_mass: eta must be > 0");
  StepRecord rec = measure(policy, verifier, partition, k);
  const double p = mass(policy, partition.m1());
  if (!(p > 0.0)) throw DegenerateModeError("discovered mode has zero probability");
  const ParamVector dir = mass_grad(policy, partition.m1()).scaled(1.0 / p);
  rec.grad_norm = dir.norm();
  if (rec.grad_norm == 0.0) return {policy, rec};
  return {policy.apply_update(dir, eta), rec};
}

RunHistory run(const Scenario& scenario, UpdateRule rule, std::size_t replicate,
               double gap_threshold) {
  scenario.validate();
  const Environment& env = scenario.env;
  if (rule == UpdateRule::IdealizedMassAscent && !env.modes) {
    throw PartitionError("mass-ascent rule needs a mode partition");
  }
  RunHistory history;
  history.scenario = env.policy.shape().describe() + " k=" + std::to_string(scenario.k) +
                     " rule=" + std::string(to_string(rule)) +
                     " replicate=" + std::to_string(replicate);
  history.records.reserve(scenario.steps + 1);

  Rng rng = Rng::stream(scenario.seed, replicate);
  Policy policy = env.policy;
  const StepOptions opts{scenario.reinforce_all};
  for (std::size_t t = 0; t < scenario.steps; ++t) {
    auto [next, rec] =
        rule == UpdateRule::SampledReinforce
            ? step_sampled(policy, env.verifier, env.modes, scenario.k, scenario.eta, rng, opts)
            : step_idealized_mass(policy, env.verifier, *env.modes, scenario.k, scenario.eta);
    rec.t = t;
    history.records.push_back(rec);
    policy = std::move(next);
  }
  history.records.push_back(measure(policy, env.verifier, env.modes, scenario.k, scenario.steps));

  RunSummary& s = history.summary;
  s.final_p_m1 = history.records.back().p_m1;
  for (const StepRecord& r : history.records) {
    if (r.discovered_m2) ++s.total_discoveries;
    if (!s.steps_to_gap_below && r.gap < gap_threshold) s.steps_to_gap_below = r.t;
  }
  return history;
}

std::vector<RunHistory> run_replicates(const Scenario& scenario, UpdateRule rule,
                                       unsigned threads, double gap_threshold) {
  std::vector<RunHistory> out(scenario.replicates);
  parallel_for(scenario.replicates, threads, [&](std::size_t r) {
    out[r] = run(scenario, rule, r, gap_threshold);
  });
  return out;
}

DiscoverySummary discovery_experiment(const Scenario& scenario, std::size_t trials,
                                      unsigned threads) {
  const Environment& env = scenario.env;
  if (!env.modes) throw PartitionError("discovery experiment needs a mode partition");
  if (trials < 1) throw DomainError("discovery experiment needs at least one trial");
  check_k(scenario.k);

  DiscoverySummary out;
  out.k = scenario.k;
  out.trials = trials;
  out.epsilon = mass(env.policy, env.modes->m2());
  out.exact_rate = 1.0 - ipow(1.0 - out.epsilon, scenario.k);
  out.bound_keps = static_cast<double>(scenario.k) * out.epsilon;
  out.sigma = std::sqrt(out.exact_rate * (1.0 - out.exact_rate) / static_cast<double>(trials));

  constexpr std::size_t kTrialsPerChunk = 4096;
  const std::size_t n_chunks = (trials + kTrialsPerChunk - 1) / kTrialsPerChunk;
  std::vector<std::size_t> hits(n_chunks, 0);
  const TrajectorySet& m2 = env.modes->m2();
  if (!m2.empty()) {
    std::vector<std::uint8_t> in_m2(env.policy.shape().space_size(), 0);
    for (TrajectoryCode c : m2.codes()) in_m2[c] = 1;
    parallel_for(n_chunks, threads, [&](std::size_t c) {
      Rng rng = Rng::stream(scenario.seed, c);
      const std::size_t end = std::min(trials, (c + 1) * kTrialsPerChunk);
      for (std::size_t trial = c * kTrialsPerChunk; trial < end; ++trial) {
        bool hit = false;
        // Draw the whole batch even after a hit so the stream layout is fixed.
        for (std::size_t i = 0; i < scenario.k; ++i) hit |= in_m2[env.policy.sample_code(rng)] != 0;
        hits[c] += hit ? 1 : 0;
      }
    });
  }
  for (std::size_t h : hits) out.discoveries += h;
  out.empirical_rate = static_cast<double>(out.discoveries) / static_cast<double>(trials);
  return out;
}

TaylorReport taylor_check(const Policy& policy, const ModePartition& partition, double eta) {
  if (!(eta > 0.0)) throw DomainError("taylor_check: eta must be > 0");
  TaylorReport rep;
  rep.p = mass(policy, partition.m1());
  if (!(rep.p > 0.0)) throw DegenerateModeError("discovered mode has zero probability");
  const ParamVector grad = mass_grad(policy, partition.m1());
  const double sq = grad.dot(grad);
  rep.predicted_delta = eta / rep.p * sq;
  if (sq > 0.0) {
    const Policy next = policy.apply_update(grad.scaled(1.0 / rep.p), eta);
    rep.actual_delta = mass(next, partition.m1()) - rep.p;
  }
  rep.discrepancy = std::abs(rep.actual_delta - rep.predicted_delta);
  return rep;
}

}  // namespace passk
