#include "passk/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "passk/errors.hpp"

namespace passk {

void check_k(std::size_t k) {
  if (k < 1 || k > kMaxK) {
    throw DomainError("k = " + std::to_string(k) + " outside [1, " + std::to_string(kMaxK) + "]");
  }
}

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError(std::string(what) + " = " + std::to_string(p) + " is not in [0, 1]");
  }
}

double ipow(double x, std::size_t n) {
  double result = 1.0;
  while (n > 0) {
    if (n & 1U) result *= x;
    x *= x;
    n >>= 1U;
  }
  return result;
}

double j1_exact(const Policy& policy, const Verifier& verifier) {
  return std::clamp(mass(policy, verifier.correct_set()), 0.0, 1.0);
}

double jk_from_j1(double j1, std::size_t k) {
  check_probability(j1, "j1");
  check_k(k);
  return 1.0 - ipow(1.0 - j1, k);
}

double alpha(double j1, std::size_t k) {
  check_probability(j1, "j1");
  check_k(k);
  return static_cast<double>(k) * ipow(1.0 - j1, k - 1);
}

ParamVector grad_j1_exact(const Policy& policy, const Verifier& verifier) {
  return mass_grad(policy, verifier.correct_set());
}

ParamVector grad_jk_exact(const Policy& policy, const Verifier& verifier, std::size_t k) {
  check_k(k);
  const double a = alpha(j1_exact(policy, verifier), k);
  return grad_j1_exact(policy, verifier).scaled(a);
}

double gap(double p, std::size_t k) {
  check_probability(p, "p");
  check_k(k);
  const double delta = 1.0 - p;
  return delta - ipow(delta, k);
}

ObjectiveReport objective_report(const Policy& policy, const Verifier& verifier, std::size_t k) {
  const double j1 = j1_exact(policy, verifier);
  return ObjectiveReport{j1, jk_from_j1(j1, k), alpha(j1, k), gap(j1, k), k};
}

}  // namespace passk
