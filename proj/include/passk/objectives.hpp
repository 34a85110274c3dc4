#pragma once

#include <cstddef>

#include "passk/environments.hpp"
#include "passk/policy.hpp"

namespace passk {

inline constexpr std::size_t kMaxK = std::size_t{1} << 16;

/// x^n by repeated squaring.
double ipow(double x, std::size_t n);

/// Probability that one sample passes the verifier, summed exactly over the correct set.
double j1_exact(const Policy& policy, const Verifier& verifier);

/// 1 - (1 - j1)^k.
double jk_from_j1(double j1, std::size_t k);

/// k (1 - j1)^(k-1), the factor relating the pass@k and pass@1 gradients.
double alpha(double j1, std::size_t k);

ParamVector grad_j1_exact(const Policy& policy, const Verifier& verifier);

/// alpha(j1, k) * grad_j1_exact.
ParamVector grad_jk_exact(const Policy& policy, const Verifier& verifier, std::size_t k);

/// pass@k - pass@1 at pass@1 = p, evaluated as d - d^k with d = 1 - p so the
/// p -> 1 regime keeps full relative precision.
double gap(double p, std::size_t k);

struct ObjectiveReport {
  double j1;
  double jk;
  double alpha;
  double gap;
  std::size_t k;
};

ObjectiveReport objective_report(const Policy& policy, const Verifier& verifier, std::size_t k);

/// Throws DomainError unless 1 <= k <= kMaxK.
void check_k(std::size_t k);
/// Throws DomainError unless p is a probability.
void check_probability(double p, const char* what);

}  // namespace passk
