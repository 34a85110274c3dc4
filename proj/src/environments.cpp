#include "passk/environments.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "passk/errors.hpp"

namespace passk {

Verifier::Verifier(const PolicyShape& shape, TrajectorySet correct)
    : shape_(shape), correct_(std::move(correct)), indicator_(shape.space_size(), 0) {
  for (TrajectoryCode c : correct_.codes()) {
    if (c >= shape.space_size()) throw ShapeError("verifier: correct member outside space");
    indicator_[c] = 1;
  }
}

ModePartition::ModePartition(const Verifier& verifier, TrajectorySet discovered,
                             TrajectorySet undiscovered)
    : m1_(std::move(discovered)), m2_(std::move(undiscovered)) {
  if (!m1_.disjoint_from(m2_)) throw PartitionError("modes M1 and M2 overlap");
  if (!(m1_.united_with(m2_) == verifier.correct_set())) {
    throw PartitionError("modes M1 and M2 do not partition the correct set");
  }
}

namespace {

TrajectorySet index_set(const PolicyShape& shape, const IndexSet& indices) {
  std::vector<TrajectoryCode> codes(indices.begin(), indices.end());
  for (TrajectoryCode c : codes) {
    if (c >= shape.space_size()) {
      throw DomainError("answer index " + std::to_string(c) + " outside [0, " +
                        std::to_string(shape.space_size()) + ")");
    }
  }
  return TrajectorySet::from_codes(shape, std::move(codes));
}

std::vector<Trajectory> to_trajectories(const std::vector<std::vector<Token>>& seqs,
                                        std::size_t horizon) {
  std::vector<Trajectory> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    if (s.size() != horizon) {
      throw ShapeError("target of length " + std::to_string(s.size()) + ", expected " +
                       std::to_string(horizon));
    }
    out.push_back(Trajectory{s});
  }
  return out;
}

}  // namespace

Environment make_bandit(std::size_t n_answers, const IndexSet& correct,
                        const std::optional<ModeIndexSets>& modes,
                        const std::optional<std::vector<double>>& initial_logits) {
  const auto shape = PolicyShape::categorical(n_answers);
  Policy policy = initial_logits ? Policy(shape, ParamVector(*initial_logits))
                                 : Policy::uniform(shape);
  Verifier verifier(shape, index_set(shape, correct));
  std::optional<ModePartition> partition;
  if (modes) {
    partition.emplace(verifier, index_set(shape, modes->m1), index_set(shape, modes->m2));
  }
  return Environment{std::move(policy), std::move(verifier), std::move(partition)};
}

Environment make_sequence_env(
    std::size_t vocab, std::size_t horizon, const std::vector<std::vector<Token>>& targets,
    const std::optional<std::pair<std::vector<std::vector<Token>>, std::vector<std::vector<Token>>>>&
        modes,
    std::uint64_t cap) {
  const auto shape = PolicyShape::autoregressive(vocab, horizon, cap);
  Verifier verifier(shape, TrajectorySet(shape, to_trajectories(targets, horizon)));
  std::optional<ModePartition> partition;
  if (modes) {
    partition.emplace(verifier, TrajectorySet(shape, to_trajectories(modes->first, horizon)),
                      TrajectorySet(shape, to_trajectories(modes->second, horizon)));
  }
  return Environment{Policy::uniform(shape), std::move(verifier), std::move(partition)};
}

double mode_logit_for_mass(double epsilon, std::size_t m2_size, std::size_t rest) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
  if (m2_size == 0 || rest == 0) throw DomainError("mode and remainder must be nonempty");
  return std::log(epsilon * static_cast<double>(rest) /
                  (static_cast<double>(m2_size) * (1.0 - epsilon)));
}

Environment make_two_mode_bandit(std::size_t n_answers, const IndexSet& m1, const IndexSet& m2,
                                 double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in [0, 1)");
  IndexSet correct(m1);
  correct.insert(correct.end(), m2.begin(), m2.end());
  std::sort(correct.begin(), correct.end());
  correct.erase(std::unique(correct.begin(), correct.end()), correct.end());
  if (epsilon == 0.0) {
    if (!m2.empty()) {
      throw DomainError("epsilon = 0 needs an empty undiscovered mode (logits are finite)");
    }
    return make_bandit(n_answers, correct, ModeIndexSets{m1, m2});
  }
  if (m2.empty()) throw DomainError("epsilon > 0 needs a nonempty undiscovered mode");
  if (m2.size() >= n_answers) throw DomainError("undiscovered mode covers every answer");

  std::vector<double> logits(n_answers, 0.0);
  const double l = mode_logit_for_mass(epsilon, m2.size(), n_answers - m2.size());
  for (std::size_t i : m2) {
    if (i >= n_answers) throw DomainError("mode index outside answer range");
    logits[i] = l;
  }
  auto env = make_bandit(n_answers, correct, ModeIndexSets{m1, m2}, logits);
  const double achieved = mass(env.policy, env.modes->m2());
  if (std::abs(achieved - epsilon) > 1e-9) {
    throw ValidationError("engineered mode mass " + std::to_string(achieved) +
                          " misses target " + std::to_string(epsilon));
  }
  return env;
}

void Scenario::validate() const {
  if (k < 1) throw DomainError("scenario: k must be at least 1");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("scenario: eta must be > 0");
  if (replicates < 1) throw DomainError("scenario: replicates must be at least 1");
  if (!(env.verifier.shape() == env.policy.shape())) {
    throw ShapeError("scenario: verifier and policy shapes differ");
  }
  if (env.modes) ModePartition(env.verifier, env.modes->m1(), env.modes->m2());
}

}  // namespace passk
