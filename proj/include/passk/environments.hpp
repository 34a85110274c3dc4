#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "passk/policy.hpp"

namespace passk {

/// Extensional binary verifier: V(y) = 1 iff y is in the correct set.
class Verifier {
 public:
  Verifier(const PolicyShape& shape, TrajectorySet correct);

  const TrajectorySet& correct_set() const { return correct_; }
  int verify(const Trajectory& y) const { return verify(shape_.encode(y)); }
  int verify(TrajectoryCode code) const { return indicator_[code]; }

  const PolicyShape& shape() const { return shape_; }

 private:
  PolicyShape shape_;
  TrajectorySet correct_;
  std::vector<std::uint8_t> indicator_;
};

/// Two disjoint modes whose union is the verifier's correct set.
class ModePartition {
 public:
  /// Throws PartitionError if the sets overlap or do not cover the correct set.
  ModePartition(const Verifier& verifier, TrajectorySet discovered, TrajectorySet undiscovered);

  const TrajectorySet& m1() const { return m1_; }
  const TrajectorySet& m2() const { return m2_; }

 private:
  TrajectorySet m1_;
  TrajectorySet m2_;
};

struct Environment {
  Policy policy;
  Verifier verifier;
  std::optional<ModePartition> modes;
};

using IndexSet = std::vector<std::size_t>;

struct ModeIndexSets {
  IndexSet m1;
  IndexSet m2;
};

/// Categorical bandit with a uniform start unless `initial_logits` is given.
Environment make_bandit(std::size_t n_answers, const IndexSet& correct,
                        const std::optional<ModeIndexSets>& modes = std::nullopt,
                        const std::optional<std::vector<double>>& initial_logits = std::nullopt);

/// Depth-T sequence environment; the verifier accepts exactly `targets`.
Environment make_sequence_env(std::size_t vocab, std::size_t horizon,
                              const std::vector<std::vector<Token>>& targets,
                              const std::optional<std::pair<std::vector<std::vector<Token>>,
                                                            std::vector<std::vector<Token>>>>&
                                  modes = std::nullopt,
                              std::uint64_t cap = kDefaultSpaceCap);

/// Logit that gives every member of a size-`m2_size` set total mass `epsilon`
/// when the remaining `rest` answers have logit 0: ln(eps * rest / (m2_size * (1 - eps))).
double mode_logit_for_mass(double epsilon, std::size_t m2_size, std::size_t rest);

/// Two-mode bandit whose undiscovered mode starts with mass exactly `epsilon`
/// (checked to 1e-9). `epsilon` = 0 requires an empty undiscovered mode.
Environment make_two_mode_bandit(std::size_t n_answers, const IndexSet& m1, const IndexSet& m2,
                                 double epsilon);

enum class UpdateRule { SampledReinforce, IdealizedMassAscent };

/// Experiment container: environment plus training-loop settings.
struct Scenario {
  Environment env;
  std::size_t k = 1;
  double eta = 0.05;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::size_t replicates = 1;
  /// Reinforce every sampled trajectory instead of only verified ones.
  bool reinforce_all = false;

  /// Throws DomainError / PartitionError on violated invariants.
  void validate() const;
};

}  // namespace passk
