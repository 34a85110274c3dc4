#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "passk/policy.hpp"

namespace passk {

struct FiniteDifferenceOptions {
  double step = 1e-5;
  double rel_tol = 1e-6;
};

/// Central-difference gradient of a scalar function of the policy logits.
/// Only the listed coordinates are probed; the rest of the result is zero.
template <class F>
std::vector<double> central_difference(const Policy& policy, F&& objective,
                                       std::span<const std::size_t> coords, double step) {
  std::vector<double> grad(policy.params().size(), 0.0);
  std::vector<double> theta(policy.params().vector());
  for (std::size_t i : coords) {
    const double orig = theta[i];
    theta[i] = orig + step;
    const double up = objective(Policy(policy.shape(), ParamVector(theta)));
    theta[i] = orig - step;
    const double down = objective(Policy(policy.shape(), ParamVector(theta)));
    theta[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// max_i |approx_i - exact_i| / max(max_i |exact_i|, floor), over `coords`.
/// Normwise relative error; componentwise ratios are meaningless on near-zero entries.
inline double relative_error(std::span<const double> approx, std::span<const double> exact,
                             std::span<const std::size_t> coords, double floor = 1e-300) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i : coords) {
    diff = std::max(diff, std::abs(approx[i] - exact[i]));
    scale = std::max(scale, std::abs(exact[i]));
  }
  if (diff == 0.0) return 0.0;
  return diff / std::max(scale, floor);
}

}  // namespace passk
