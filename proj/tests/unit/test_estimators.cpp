#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <vector>

#include "passk/environments.hpp"
#include "passk/errors.hpp"
#include "passk/estimators.hpp"
#include "passk/objectives.hpp"

using namespace passk;

namespace {

// Largest per-coordinate deviation from `exact`, in standard errors.
double max_sigmas(const GradEstimate& est, const ParamVector& exact) {
  const auto se = est.standard_errors();
  double worst = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double d = std::abs(est.mean[i] - exact[i]);
    worst = std::max(worst, se[i] > 0 ? d / se[i] : (d == 0 ? 0.0 : INFINITY));
  }
  return worst;
}

// Fraction of size-k subsets of n items (c of them correct) containing a correct one.
double subset_oracle(unsigned n, unsigned c, unsigned k) {
  std::size_t total = 0, hit = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<unsigned>(std::popcount(mask)) != k) continue;
    ++total;
    // Items [0, c) are the correct ones.
    if ((mask & ((1u << c) - 1)) != 0) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0 && !std::signbit(x); });
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("estimator names round-trip") {
    for (auto kind : {EstimatorKind::Pass1MC, EstimatorKind::PassKJoint,
                      EstimatorKind::PassKLeaveOneOut, EstimatorKind::AlphaPlugin}) {
      CHECK(estimator_from_string(to_string(kind)) == kind);
    }
    CHECK(estimator_from_string("loo") == EstimatorKind::PassKLeaveOneOut);
    CHECK_THROWS_AS(estimator_from_string("ppo"), DomainError);
  }

  TEST_CASE("pass@1 with a verifier that rejects everything") {
    const auto env = make_bandit(5, {});
    const auto est = estimate_pass1(env.policy, env.verifier, 1000, {.seed = 3});
    CHECK(est.mean.max_abs() == 0.0);
    CHECK(est.zero_fraction == 1.0);
    CHECK(est.variance_trace() == 0.0);
  }

  TEST_CASE("pass@1 single correct sample equals its score") {
    const auto env = make_bandit(3, {0, 1, 2});
    const auto est = estimate_pass1(env.policy, env.verifier, 1, {.seed = 5});
    Rng rng = Rng::stream(5, 0);
    const auto y = env.policy.sample_code(rng);
    CHECK(est.mean == env.policy.log_prob_grad(env.policy.shape().decode(y)));
  }

  TEST_CASE("pass@1 is unbiased on the uniform three-answer bandit") {
    const auto env = make_bandit(3, {0});
    const auto est = estimate_pass1(env.policy, env.verifier, 1000000, {.seed = 11});
    CHECK(max_sigmas(est, ParamVector(std::vector<double>{2.0 / 9, -1.0 / 9, -1.0 / 9})) < 3.0);
    CHECK(est.groups == 1000000);
  }

  TEST_CASE("joint estimator: all-fail groups contribute bitwise zero") {
    const auto env = make_bandit(10, {0});
    const std::vector<TrajectoryCode> fail{1, 2, 3, 9};
    CHECK(all_zero(joint_group_contribution(env.policy, env.verifier, fail)));
    const std::vector<TrajectoryCode> one{1, 0, 3, 9};
    CHECK_FALSE(all_zero(joint_group_contribution(env.policy, env.verifier, one)));
  }

  TEST_CASE("joint estimator is unbiased") {
    const auto env = make_bandit(10, {0});
    const auto exact = grad_jk_exact(env.policy, env.verifier, 4);
    int passed = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto est = estimate_passk_joint(env.policy, env.verifier, 4, 1000000, {.seed = seed});
      passed += max_sigmas(est, exact) < 3.0;
    }
    CHECK(passed >= 2);
  }

  TEST_CASE("joint estimator with k = 1 matches pass@1 on the same stream") {
    const auto env = make_bandit(6, {1, 4}, std::nullopt, std::vector<double>{0.3, -1, 2, 0, 0.5, 1});
    const auto a = estimate_passk_joint(env.policy, env.verifier, 1, 5000, {.seed = 8});
    const auto b = estimate_pass1(env.policy, env.verifier, 5000, {.seed = 8});
    CHECK(a.mean == b.mean);
    CHECK(a.zero_fraction == b.zero_fraction);
  }

  TEST_CASE("zero fraction of the joint estimator matches the zero-signal probability") {
    const auto env = make_bandit(100, {0});
    const std::size_t groups = 100000;
    const auto est = estimate_passk_joint(env.policy, env.verifier, 8, groups, {.seed = 21});
    const double q = zero_signal_prob(0.01, 8);
    CHECK(std::abs(est.zero_fraction - q) < 3 * std::sqrt(q * (1 - q) / groups));
  }

  TEST_CASE("leave-one-out contributions") {
    const auto env = make_bandit(10, {0, 1});
    const std::vector<TrajectoryCode> two{0, 1, 5, 6};
    CHECK(all_zero(loo_group_contribution(env.policy, env.verifier, two)));
    const std::vector<TrajectoryCode> none{4, 5, 6, 7};
    CHECK(all_zero(loo_group_contribution(env.policy, env.verifier, none)));
    const std::vector<TrajectoryCode> single{5, 6, 1, 7};
    const auto g = loo_group_contribution(env.policy, env.verifier, single);
    CHECK(ParamVector(g) == env.policy.log_prob_grad(Trajectory{{1}}));
    CHECK_THROWS_AS(estimate_passk_loo(env.policy, env.verifier, 1, 10, {}), DomainError);
  }

  TEST_CASE("leave-one-out is unbiased and has lower variance than joint") {
    const auto env = make_bandit(10, {0});
    const auto exact = grad_jk_exact(env.policy, env.verifier, 4);
    int passed = 0;
    for (std::uint64_t seed : {4, 5, 6}) {
      const auto loo = estimate_passk_loo(env.policy, env.verifier, 4, 1000000, {.seed = seed});
      const auto joint = estimate_passk_joint(env.policy, env.verifier, 4, 1000000, {.seed = seed});
      passed += max_sigmas(loo, exact) < 3.0;
      CHECK(loo.variance_trace() < joint.variance_trace());
    }
    CHECK(passed >= 2);
  }

  TEST_CASE("alpha plug-in examples") {
    const auto fail = make_bandit(4, {});
    const auto a = estimate_alpha_plugin(fail.policy, fail.verifier, 8, 100, {.seed = 1});
    CHECK(a.mean.max_abs() == 0.0);
    CHECK(a.zero_fraction == 1.0);

    const auto pass = make_bandit(4, {0, 1, 2, 3});
    const auto b = estimate_alpha_plugin(pass.policy, pass.verifier, 2, 100, {.seed = 1});
    CHECK(b.mean.max_abs() == 0.0);
  }

  TEST_CASE("alpha plug-in bias is small at large n") {
    const auto env = make_bandit(3, {0});
    const auto exact = grad_jk_exact(env.policy, env.verifier, 2);
    const auto est = estimate_alpha_plugin(env.policy, env.verifier, 2, 1000000, {.seed = 13});
    std::vector<double> diff(exact.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = est.mean[i] - exact[i];
    CHECK(ParamVector(diff).norm() < 0.01 * exact.norm());
  }

  TEST_CASE("zero_signal_prob examples") {
    for (std::size_t m : {1, 8, 100}) CHECK(zero_signal_prob(0.0, m) == 1.0);
    CHECK(zero_signal_prob(0.01, 8) == doctest::Approx(0.92274469442792).epsilon(1e-12));
    CHECK(zero_signal_prob(1e-4, 8) == doctest::Approx(std::pow(0.9999, 8)).epsilon(1e-14));
    CHECK_THROWS_AS(zero_signal_prob(0.5, 0), DomainError);
    CHECK_THROWS_AS(zero_signal_prob(-0.5, 2), DomainError);
  }

  TEST_CASE("passk_eval examples") {
    CHECK(passk_eval(4, 2, 2) == doctest::Approx(5.0 / 6).epsilon(1e-15));
    CHECK(passk_eval(10, 10, 3) == 1.0);
    CHECK(passk_eval(10, 0, 3) == 0.0);
    CHECK_THROWS_AS(passk_eval(4, 1, 5), DomainError);
    CHECK_THROWS_AS(passk_eval(4, 5, 2), DomainError);
    CHECK_THROWS_AS(passk_eval(4, 1, 0), DomainError);
    CHECK(passk_eval(1000000, 1, 1) == doctest::Approx(1e-6).epsilon(1e-12));
    CHECK(std::isfinite(passk_eval(1000000, 500000, 1000)));
  }

  TEST_CASE("passk_eval matches subset enumeration for n <= 12") {
    std::size_t cases = 0;
    for (unsigned n = 1; n <= 12; ++n) {
      for (unsigned c = 0; c <= n; ++c) {
        for (unsigned k = 1; k <= n; ++k) {
          CHECK(std::abs(passk_eval(n, c, k) - subset_oracle(n, c, k)) <= 1e-12);
          ++cases;
        }
      }
    }
    CHECK(cases == 728);
  }

  TEST_CASE("passk_eval on sampled batches is unbiased for pass@k") {
    const auto env = make_bandit(10, {0, 3});
    const std::size_t n = 10, k = 3, resamples = 100000;
    Rng rng(55);
    double sum = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < resamples; ++r) {
      std::size_t c = 0;
      for (std::size_t i = 0; i < n; ++i) c += env.verifier.verify(env.policy.sample_code(rng));
      const double v = passk_eval(n, c, k);
      sum += v;
      sq += v * v;
    }
    const double mean = sum / resamples;
    const double se = std::sqrt((sq / resamples - mean * mean) / resamples);
    CHECK(std::abs(mean - jk_from_j1(0.2, k)) < 3 * se);
  }

  TEST_CASE("results do not depend on the thread count") {
    const auto env = make_bandit(7, {2}, std::nullopt, std::vector<double>{0, 1, -1, 0.5, 0, 0, 2});
    for (auto kind : {EstimatorKind::Pass1MC, EstimatorKind::PassKJoint,
                      EstimatorKind::PassKLeaveOneOut, EstimatorKind::AlphaPlugin}) {
      const auto one = estimate(kind, env.policy, env.verifier, 4, 20000, {.seed = 9, .threads = 1});
      const auto four = estimate(kind, env.policy, env.verifier, 4, 20000, {.seed = 9, .threads = 4});
      CHECK(one.mean == four.mean);
      CHECK(one.variance == four.variance);
      CHECK(one.zero_fraction == four.zero_fraction);
    }
  }

  TEST_CASE("estimate invariants") {
    const auto env = make_bandit(5, {1});
    for (auto kind : {EstimatorKind::Pass1MC, EstimatorKind::PassKJoint,
                      EstimatorKind::PassKLeaveOneOut, EstimatorKind::AlphaPlugin}) {
      const auto e = estimate(kind, env.policy, env.verifier, 3, 5000, {.seed = 2});
      for (double v : e.variance) CHECK(v >= 0.0);
      CHECK(e.zero_fraction >= 0.0);
      CHECK(e.zero_fraction <= 1.0);
    }
    CHECK_THROWS_AS(estimate_pass1(env.policy, env.verifier, 0, {}), DomainError);
  }
}
