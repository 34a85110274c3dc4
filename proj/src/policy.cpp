#include "passk/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "passk/errors.hpp"

namespace passk {

// ---------------------------------------------------------------------------
// ParamVector

ParamVector::ParamVector(std::size_t n, double fill) : values_(n, fill) {
  if (!std::isfinite(fill)) throw DomainError("ParamVector: non-finite fill value");
}

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DomainError("ParamVector: entry " + std::to_string(i) + " is not finite");
    }
  }
}

double ParamVector::norm() const { return std::sqrt(dot(*this)); }

double ParamVector::dot(const ParamVector& other) const {
  if (other.size() != size()) throw ShapeError("ParamVector::dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < size(); ++i) acc += values_[i] * other.values_[i];
  return acc;
}

double ParamVector::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

ParamVector ParamVector::scaled(double factor) const {
  std::vector<double> out(values_);
  for (double& v : out) v *= factor;
  return ParamVector(std::move(out));
}

std::string to_string(const Trajectory& y) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < y.tokens.size(); ++i) os << (i ? "," : "") << y.tokens[i];
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------
// PolicyShape

PolicyShape PolicyShape::categorical(std::size_t n_answers, std::uint64_t cap) {
  return PolicyShape(Kind::Categorical, n_answers, 1, cap);
}

PolicyShape PolicyShape::autoregressive(std::size_t vocab, std::size_t horizon, std::uint64_t cap) {
  return PolicyShape(Kind::Autoregressive, vocab, horizon, cap);
}

PolicyShape::PolicyShape(Kind kind, std::size_t vocab, std::size_t horizon, std::uint64_t cap)
    : kind_(kind), vocab_(vocab), horizon_(horizon) {
  if (vocab == 0) throw ShapeError("policy shape: vocabulary must be nonempty");
  if (horizon == 0) throw ShapeError("policy shape: horizon must be at least 1");

  std::uint64_t space = 1;
  for (std::size_t t = 0; t < horizon; ++t) {
    if (space > cap / vocab) {
      throw CapacityError("trajectory space " + std::to_string(vocab) + "^" +
                          std::to_string(horizon) + " exceeds cap " + std::to_string(cap));
    }
    space *= vocab;
  }
  if (space > cap) {
    throw CapacityError("trajectory space " + std::to_string(space) + " exceeds cap " +
                        std::to_string(cap));
  }
  space_size_ = space;

  level_offset_.resize(horizon);
  suffix_size_.resize(horizon);
  std::size_t rows = 0;
  std::uint64_t level_width = 1;
  for (std::size_t d = 0; d < horizon; ++d) {
    level_offset_[d] = rows;
    rows += level_width;
    level_width *= vocab;
  }
  row_count_ = rows;
  std::uint64_t suffix = 1;
  for (std::size_t d = horizon; d-- > 0;) {
    suffix_size_[d] = suffix;
    suffix *= vocab;
  }
}

void PolicyShape::check(const Trajectory& y) const {
  if (y.tokens.size() != horizon_) {
    throw ShapeError("trajectory " + to_string(y) + " has length " +
                     std::to_string(y.tokens.size()) + ", expected " + std::to_string(horizon_));
  }
  for (Token a : y.tokens) {
    if (a >= vocab_) {
      throw ShapeError("trajectory " + to_string(y) + " has token outside vocabulary of size " +
                       std::to_string(vocab_));
    }
  }
}

TrajectoryCode PolicyShape::encode(const Trajectory& y) const {
  check(y);
  TrajectoryCode code = 0;
  for (Token a : y.tokens) code = code * vocab_ + a;
  return code;
}

Trajectory PolicyShape::decode(TrajectoryCode code) const {
  if (code >= space_size_) throw ShapeError("trajectory code out of range");
  Trajectory y;
  y.tokens.resize(horizon_);
  for (std::size_t d = horizon_; d-- > 0;) {
    y.tokens[d] = static_cast<Token>(code % vocab_);
    code /= vocab_;
  }
  return y;
}

std::size_t PolicyShape::row_of_prefix(TrajectoryCode code, std::size_t depth) const {
  // The prefix of length `depth` is the code with the last T-depth tokens dropped.
  return level_offset_[depth] + static_cast<std::size_t>(code / (suffix_size_[depth] * vocab_));
}

std::string PolicyShape::describe() const {
  if (kind_ == Kind::Categorical) return "categorical(N=" + std::to_string(vocab_) + ")";
  return "autoregressive(V=" + std::to_string(vocab_) + ",T=" + std::to_string(horizon_) + ")";
}

// ---------------------------------------------------------------------------
// Policy

Policy::Policy(PolicyShape shape, ParamVector params)
    : shape_(std::move(shape)), params_(std::move(params)) {
  if (params_.size() != shape_.param_count()) {
    throw ShapeError("policy " + shape_.describe() + " needs " +
                     std::to_string(shape_.param_count()) + " logits, got " +
                     std::to_string(params_.size()));
  }
  const std::size_t V = shape_.vocab();
  probs_.resize(params_.size());
  const auto logits = params_.values();
  for (std::size_t r = 0; r < shape_.row_count(); ++r) {
    const double* row = logits.data() + r * V;
    double* out = probs_.data() + r * V;
    const double mx = *std::max_element(row, row + V);
    double total = 0.0;
    for (std::size_t a = 0; a < V; ++a) {
      out[a] = std::exp(row[a] - mx);
      total += out[a];
    }
    for (std::size_t a = 0; a < V; ++a) out[a] /= total;
  }
}

Policy Policy::uniform(PolicyShape shape) {
  const std::size_t n = shape.param_count();
  return Policy(std::move(shape), ParamVector(n, 0.0));
}

std::span<const double> Policy::row_probs(std::size_t row) const {
  return std::span<const double>(probs_).subspan(row * shape_.vocab(), shape_.vocab());
}

double Policy::prob(const Trajectory& y) const { return prob(shape_.encode(y)); }

double Policy::prob(TrajectoryCode code) const {
  const std::size_t V = shape_.vocab();
  double p = 1.0;
  TrajectoryCode rest = code;
  // Walk tokens from last to first; row lookup uses the prefix code.
  for (std::size_t d = shape_.horizon(); d-- > 0;) {
    const auto a = static_cast<std::size_t>(rest % V);
    rest /= V;
    p *= probs_[shape_.row_of_prefix(code, d) * V + a];
  }
  return p;
}

double Policy::log_prob(const Trajectory& y) const {
  const TrajectoryCode code = shape_.encode(y);
  const std::size_t V = shape_.vocab();
  const auto logits = params_.values();
  double lp = 0.0;
  for (std::size_t d = 0; d < shape_.horizon(); ++d) {
    const std::size_t row = shape_.row_of_prefix(code, d);
    const double* r = logits.data() + row * V;
    const double mx = *std::max_element(r, r + V);
    double total = 0.0;
    for (std::size_t a = 0; a < V; ++a) total += std::exp(r[a] - mx);
    lp += r[y.tokens[d]] - mx - std::log(total);
  }
  return lp;
}

ParamVector Policy::log_prob_grad(const Trajectory& y) const {
  std::vector<double> g(params_.size(), 0.0);
  add_log_prob_grad(shape_.encode(y), 1.0, g);
  return ParamVector(std::move(g));
}

void Policy::add_log_prob_grad(TrajectoryCode code, double weight, std::span<double> out) const {
  const std::size_t V = shape_.vocab();
  const std::size_t T = shape_.horizon();
  TrajectoryCode rest = code;
  for (std::size_t d = T; d-- > 0;) {
    const auto chosen = static_cast<std::size_t>(rest % V);
    rest /= V;
    const std::size_t base = shape_.row_of_prefix(code, d) * V;
    for (std::size_t a = 0; a < V; ++a) out[base + a] -= weight * probs_[base + a];
    out[base + chosen] += weight;
  }
}

std::vector<double> Policy::probabilities() const {
  const std::size_t V = shape_.vocab();
  const std::size_t T = shape_.horizon();
  // Breadth-first expansion: level d holds the probability of every length-d prefix.
  std::vector<double> level{1.0};
  for (std::size_t d = 0; d < T; ++d) {
    std::vector<double> next(level.size() * V);
    for (std::size_t prefix = 0; prefix < level.size(); ++prefix) {
      const auto row = row_probs(shape_.row_at(d, prefix));
      for (std::size_t a = 0; a < V; ++a) next[prefix * V + a] = level[prefix] * row[a];
    }
    level = std::move(next);
  }
  return level;
}

std::vector<std::pair<Trajectory, double>> Policy::enumerate() const {
  const auto probs = probabilities();
  std::vector<std::pair<Trajectory, double>> out;
  out.reserve(probs.size());
  for (TrajectoryCode c = 0; c < probs.size(); ++c) out.emplace_back(shape_.decode(c), probs[c]);
  return out;
}

TrajectoryCode Policy::sample_code(Rng& rng) const {
  const std::size_t V = shape_.vocab();
  TrajectoryCode code = 0;
  std::size_t row = 0;
  for (std::size_t d = 0; d < shape_.horizon(); ++d) {
    const auto p = row_probs(row);
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t pick = V - 1;
    for (std::size_t a = 0; a < V; ++a) {
      cum += p[a];
      if (u < cum) {
        pick = a;
        break;
      }
    }
    code = code * V + pick;
    if (d + 1 < shape_.horizon()) row = shape_.row_at(d + 1, code);
  }
  return code;
}

std::vector<Trajectory> Policy::sample(Rng& rng, std::size_t n) const {
  if (n == 0) throw DomainError("sample: n must be at least 1");
  std::vector<Trajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(shape_.decode(sample_code(rng)));
  return out;
}

Policy Policy::apply_update(const ParamVector& direction, double eta) const {
  if (direction.size() != params_.size()) {
    throw ShapeError("apply_update: direction has length " + std::to_string(direction.size()) +
                     ", expected " + std::to_string(params_.size()));
  }
  if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("apply_update: eta must be > 0");
  std::vector<double> next(params_.vector());
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += eta * direction[i];
  return Policy(shape_, ParamVector(std::move(next)));
}

// ---------------------------------------------------------------------------
// TrajectorySet

TrajectorySet::TrajectorySet(const PolicyShape& shape, const std::vector<Trajectory>& members)
    : space_size_(shape.space_size()) {
  std::vector<TrajectoryCode> codes;
  codes.reserve(members.size());
  for (const auto& y : members) codes.push_back(shape.encode(y));
  *this = from_codes(shape, std::move(codes));
}

TrajectorySet TrajectorySet::from_codes(const PolicyShape& shape,
                                        std::vector<TrajectoryCode> codes) {
  TrajectorySet s(shape);
  std::sort(codes.begin(), codes.end());
  if (std::adjacent_find(codes.begin(), codes.end()) != codes.end()) {
    throw ShapeError("trajectory set contains duplicates");
  }
  if (!codes.empty() && codes.back() >= shape.space_size()) {
    throw ShapeError("trajectory set member outside the trajectory space");
  }
  s.codes_ = std::move(codes);
  return s;
}

TrajectorySet TrajectorySet::full(const PolicyShape& shape) {
  std::vector<TrajectoryCode> codes(shape.space_size());
  std::iota(codes.begin(), codes.end(), TrajectoryCode{0});
  return from_codes(shape, std::move(codes));
}

bool TrajectorySet::contains(TrajectoryCode code) const {
  return std::binary_search(codes_.begin(), codes_.end(), code);
}

bool TrajectorySet::disjoint_from(const TrajectorySet& other) const {
  auto a = codes_.begin();
  auto b = other.codes_.begin();
  while (a != codes_.end() && b != other.codes_.end()) {
    if (*a == *b) return false;
    if (*a < *b) ++a; else ++b;
  }
  return true;
}

TrajectorySet TrajectorySet::united_with(const TrajectorySet& other) const {
  TrajectorySet out = *this;
  out.codes_.clear();
  std::set_union(codes_.begin(), codes_.end(), other.codes_.begin(), other.codes_.end(),
                 std::back_inserter(out.codes_));
  return out;
}

double mass(const Policy& policy, const TrajectorySet& s) {
  if (s.empty()) return 0.0;
  if (s.is_full()) return 1.0;
  double total = 0.0;
  for (TrajectoryCode c : s.codes()) total += policy.prob(c);
  return total;
}

ParamVector mass_grad(const Policy& policy, const TrajectorySet& s) {
  std::vector<double> g(policy.params().size(), 0.0);
  if (!s.is_full()) {
    for (TrajectoryCode c : s.codes()) policy.add_log_prob_grad(c, policy.prob(c), g);
  }
  return ParamVector(std::move(g));
}

}  // namespace passk
