#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "passk/rng.hpp"

namespace passk {

inline constexpr std::uint64_t kDefaultSpaceCap = std::uint64_t{1} << 20;

using Token = std::uint32_t;
/// Lexicographic index of a full-length trajectory, in [0, V^T).
using TrajectoryCode = std::uint64_t;

/// Flat logit vector. Every entry is finite.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0);
  explicit ParamVector(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }

  double norm() const;
  double dot(const ParamVector& other) const;
  double max_abs() const;
  ParamVector scaled(double factor) const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

struct Trajectory {
  std::vector<Token> tokens;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
  friend auto operator<=>(const Trajectory&, const Trajectory&) = default;
};

std::string to_string(const Trajectory& y);

/// Categorical(N) is stored as vocab N, horizon 1: one logit row.
/// Autoregressive(V, T) has one logit row per node of the depth-T prefix tree,
/// rows ordered by depth and then lexicographically by prefix.
class PolicyShape {
 public:
  enum class Kind { Categorical, Autoregressive };

  static PolicyShape categorical(std::size_t n_answers, std::uint64_t cap = kDefaultSpaceCap);
  static PolicyShape autoregressive(std::size_t vocab, std::size_t horizon,
                                    std::uint64_t cap = kDefaultSpaceCap);

  Kind kind() const { return kind_; }
  std::size_t vocab() const { return vocab_; }
  std::size_t horizon() const { return horizon_; }
  std::uint64_t space_size() const { return space_size_; }
  std::size_t row_count() const { return row_count_; }
  std::size_t param_count() const { return row_count_ * vocab_; }

  /// Throws ShapeError when `y` has the wrong length or an out-of-range token.
  void check(const Trajectory& y) const;
  TrajectoryCode encode(const Trajectory& y) const;
  Trajectory decode(TrajectoryCode code) const;

  /// Row holding the conditional for the prefix y[0..depth) of a full-length code.
  std::size_t row_of_prefix(TrajectoryCode code, std::size_t depth) const;
  /// Row for a length-`depth` prefix given by its own lexicographic code.
  std::size_t row_at(std::size_t depth, TrajectoryCode prefix) const {
    return level_offset_[depth] + static_cast<std::size_t>(prefix);
  }

  std::string describe() const;

  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;

 private:
  PolicyShape(Kind kind, std::size_t vocab, std::size_t horizon, std::uint64_t cap);

  Kind kind_;
  std::size_t vocab_;
  std::size_t horizon_;
  std::uint64_t space_size_;
  std::size_t row_count_;
  // Offset of the first row at each depth, and V^(T-1-depth) for prefix extraction.
  std::vector<std::size_t> level_offset_;
  std::vector<std::uint64_t> suffix_size_;
};

/// Tabular softmax policy. Immutable; the softmax table is computed once.
class Policy {
 public:
  Policy(PolicyShape shape, ParamVector params);
  static Policy uniform(PolicyShape shape);

  const PolicyShape& shape() const { return shape_; }
  const ParamVector& params() const { return params_; }

  /// Softmax of logit row `row`.
  std::span<const double> row_probs(std::size_t row) const;

  double prob(const Trajectory& y) const;
  double prob(TrajectoryCode code) const;
  double log_prob(const Trajectory& y) const;

  ParamVector log_prob_grad(const Trajectory& y) const;
  /// out += weight * grad log pi(code); touches only the rows the trajectory visits.
  void add_log_prob_grad(TrajectoryCode code, double weight, std::span<double> out) const;

  /// Probabilities of every trajectory indexed by code (lexicographic order).
  std::vector<double> probabilities() const;
  std::vector<std::pair<Trajectory, double>> enumerate() const;

  TrajectoryCode sample_code(Rng& rng) const;
  std::vector<Trajectory> sample(Rng& rng, std::size_t n) const;

  /// params + eta * direction. The receiver is unchanged.
  Policy apply_update(const ParamVector& direction, double eta) const;

 private:
  PolicyShape shape_;
  ParamVector params_;
  std::vector<double> probs_;
};

/// Finite set of trajectories valid for one shape, stored as sorted codes.
class TrajectorySet {
 public:
  explicit TrajectorySet(const PolicyShape& shape) : space_size_(shape.space_size()) {}
  TrajectorySet(const PolicyShape& shape, const std::vector<Trajectory>& members);

  /// Throws ShapeError on out-of-range codes or duplicates.
  static TrajectorySet from_codes(const PolicyShape& shape, std::vector<TrajectoryCode> codes);
  static TrajectorySet full(const PolicyShape& shape);

  std::size_t size() const { return codes_.size(); }
  bool empty() const { return codes_.empty(); }
  bool is_full() const { return codes_.size() == space_size_; }
  bool contains(TrajectoryCode code) const;
  std::span<const TrajectoryCode> codes() const { return codes_; }

  bool disjoint_from(const TrajectorySet& other) const;
  TrajectorySet united_with(const TrajectorySet& other) const;

  friend bool operator==(const TrajectorySet&, const TrajectorySet&) = default;

 private:
  std::uint64_t space_size_ = 0;
  std::vector<TrajectoryCode> codes_;
};

/// pi(s). Exactly 1 for the full space and 0 for the empty set.
double mass(const Policy& policy, const TrajectorySet& s);

/// Exact gradient of pi(s); exactly zero for the full space.
ParamVector mass_grad(const Policy& policy, const TrajectorySet& s);

}  // namespace passk
