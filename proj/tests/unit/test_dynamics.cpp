#include <doctest.h>

#include <cmath>

#include "passk/dynamics.hpp"
#include "passk/errors.hpp"
#include "passk/objectives.hpp"

using namespace passk;

TEST_SUITE("dynamics") {
  TEST_CASE("rule names") {
    CHECK(update_rule_from_string("sampled") == UpdateRule::SampledReinforce);
    CHECK(update_rule_from_string(to_string(UpdateRule::IdealizedMassAscent)) ==
          UpdateRule::IdealizedMassAscent);
    CHECK_THROWS_AS(update_rule_from_string("ppo"), DomainError);
  }

  TEST_CASE("a batch without correct samples leaves the policy unchanged") {
    const auto env = make_bandit(10, {});
    Rng rng(1);
    const auto [next, rec] = step_sampled(env.policy, env.verifier, env.modes, 4, 0.5, rng);
    CHECK(next.params() == env.policy.params());
    CHECK(rec.batch_correct == 0);
    CHECK(rec.grad_norm == 0.0);
  }

  TEST_CASE("reinforcing a single correct sample raises its probability") {
    for (double eta : {1e-6, 1e-2, 0.5, 5.0, 100.0}) {
      // Every answer is correct, so a k = 1 batch reinforces exactly the one draw.
      Rng rng(3);
      const auto all = make_bandit(3, {0, 1, 2}, std::nullopt, std::vector<double>{-1.0, 0.5, 2.0});
      Rng probe = rng;
      const TrajectoryCode y = all.policy.sample_code(probe);
      const auto [next, rec] = step_sampled(all.policy, all.verifier, all.modes, 1, eta, rng);
      CHECK(rec.batch_correct == 1);
      CHECK(next.prob(y) > all.policy.prob(y));
    }
  }

  TEST_CASE("step records describe the pre-update policy") {
    const auto env = make_two_mode_bandit(20, {0}, {1}, 0.05);
    Rng rng(8);
    const auto [next, rec] = step_sampled(env.policy, env.verifier, env.modes, 4, 0.1, rng);
    const auto m = measure(env.policy, env.verifier, env.modes, 4);
    CHECK(rec.p_m1 == m.p_m1);
    CHECK(rec.p_m2 == m.p_m2);
    CHECK(rec.j1 == m.j1);
    CHECK(rec.jk == m.jk);
    CHECK(rec.p_m1 + rec.p_m2 <= 1.0);
    CHECK(rec.gap == gap(rec.p_m1, 4));
    (void)next;
  }

  TEST_CASE("per-step discovery probability and its bound") {
    const double exact = 1.0 - ipow(0.99, 8);
    CHECK(exact == doctest::Approx(0.0772553).epsilon(1e-6));
    CHECK(exact <= 0.08);
    const auto env = make_two_mode_bandit(100, {0}, {1}, 0.01);
    const Scenario sc{.env = env, .k = 8, .seed = 4};
    const auto d = discovery_experiment(sc, 100000);
    CHECK(d.exact_rate == doctest::Approx(exact).epsilon(1e-9));
    CHECK(d.bound_keps == doctest::Approx(0.08).epsilon(1e-9));
    CHECK(std::abs(d.empirical_rate - d.exact_rate) < 3 * d.sigma);
  }

  TEST_CASE("discovery edge cases") {
    const auto none = make_two_mode_bandit(10, {0}, {}, 0.0);
    const auto d0 = discovery_experiment(Scenario{.env = none, .k = 4}, 1000);
    CHECK(d0.empirical_rate == 0.0);
    CHECK(d0.exact_rate == 0.0);

    const auto env = make_two_mode_bandit(10, {0}, {1}, 0.2);
    const auto d1 = discovery_experiment(Scenario{.env = env, .k = 1}, 10);
    CHECK(d1.exact_rate == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(d1.bound_keps == d1.exact_rate);

    CHECK_THROWS_AS(discovery_experiment(Scenario{.env = make_bandit(10, {0}), .k = 2}, 10),
                    PartitionError);
  }

  TEST_CASE("discovery bound on a dense grid") {
    for (int i = 0; i <= 1000; ++i) {
      const double eps = i / 1000.0;
      for (std::size_t k = 1; k <= 64; ++k) {
        CHECK(1.0 - ipow(1.0 - eps, k) <= static_cast<double>(k) * eps + 1e-15);
      }
    }
  }

  TEST_CASE("idealized mass ascent examples") {
    const auto env = make_bandit(3, {0}, ModeIndexSets{{0}, {}});
    const auto [next, rec] = step_idealized_mass(env.policy, env.verifier, *env.modes, 1, 0.01);
    const double dp = mass(next, env.modes->m1()) - 1.0 / 3;
    CHECK(dp == doctest::Approx(0.03 * 6.0 / 81).epsilon(0.01));
    CHECK(0.03 * 6.0 / 81 == doctest::Approx(0.00222).epsilon(0.001));
    CHECK(rec.grad_norm > 0.0);

    const auto full = make_bandit(3, {0, 1, 2}, ModeIndexSets{{0, 1, 2}, {}});
    const auto [same, r2] = step_idealized_mass(full.policy, full.verifier, *full.modes, 1, 0.5);
    CHECK(same.params() == full.policy.params());

    const auto dead = make_bandit(3, {}, ModeIndexSets{{}, {}});
    CHECK_THROWS_AS(step_idealized_mass(dead.policy, dead.verifier, *dead.modes, 1, 0.1),
                    DegenerateModeError);
  }

  TEST_CASE("idealized mass ascent is monotone") {
    const auto env = make_two_mode_bandit(50, {0, 5, 9}, {3}, 0.01);
    const Scenario sc{.env = env, .k = 4, .eta = 1e-3, .steps = 1000};
    const auto h = run(sc, UpdateRule::IdealizedMassAscent);
    REQUIRE(h.records.size() == 1001);
    for (std::size_t t = 1; t < h.records.size(); ++t) {
      CHECK(h.records[t].p_m1 >= h.records[t - 1].p_m1 - 1e-12);
    }
    const auto long_run = run(Scenario{.env = env, .k = 4, .eta = 1.0, .steps = 500},
                              UpdateRule::IdealizedMassAscent);
    CHECK(long_run.summary.final_p_m1 > 0.99);
  }

  TEST_CASE("taylor check") {
    const auto env = make_bandit(3, {0}, ModeIndexSets{{0}, {}});
    const auto a = taylor_check(env.policy, *env.modes, 1e-3);
    const auto b = taylor_check(env.policy, *env.modes, 5e-4);
    CHECK(a.predicted_delta == doctest::Approx(1e-3 * 3 * 6.0 / 81).epsilon(1e-12));
    const double ratio = a.discrepancy / b.discrepancy;
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
    CHECK(a.actual_delta >= -1e-12);

    const auto full = make_bandit(3, {0, 1, 2}, ModeIndexSets{{0, 1, 2}, {}});
    const auto z = taylor_check(full.policy, *full.modes, 1e-3);
    CHECK(z.predicted_delta == 0.0);
    CHECK(z.actual_delta == 0.0);
  }

  TEST_CASE("small steps never lower the mode probability") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> logits(12);
      for (double& x : logits) x = rng.normal() * 2;
      const auto env = make_bandit(12, {0, 1, 2, 7}, ModeIndexSets{{0, 1, 2}, {7}}, logits);
      for (double eta : {1e-3, 1e-4}) {
        const auto r = taylor_check(env.policy, *env.modes, eta);
        CHECK(r.actual_delta >= -1e-12);
      }
    }
  }

  TEST_CASE("run with zero steps yields only the initial record") {
    const auto env = make_two_mode_bandit(10, {0}, {1}, 0.1);
    const auto h = run(Scenario{.env = env, .k = 2, .steps = 0}, UpdateRule::SampledReinforce);
    REQUIRE(h.records.size() == 1);
    CHECK(h.records[0].t == 0);
    CHECK(h.summary.final_p_m1 == h.records[0].p_m1);
  }

  TEST_CASE("no learning signal means no change") {
    const auto env = make_bandit(10, {});
    const auto h = run(Scenario{.env = env, .k = 4, .eta = 0.3, .steps = 50, .seed = 2}, UpdateRule::SampledReinforce);
    for (const auto& r : h.records) {
      CHECK(r.j1 == 0.0);
      CHECK(r.grad_norm == 0.0);
      CHECK(r.batch_correct == 0);
    }
    Rng rng(3);
    Policy p = env.policy;
    for (int t = 0; t < 50; ++t) p = step_sampled(p, env.verifier, env.modes, 4, 0.3, rng).first;
    CHECK(p.params() == env.policy.params());
  }

  TEST_CASE("records are contiguous and the gap tracks the discovered mode") {
    const auto env = make_two_mode_bandit(100, {0}, {1}, 1e-3);
    const Scenario sc{.env = env, .k = 4, .eta = 0.2, .steps = 300, .seed = 12};
    const auto h = run(sc, UpdateRule::SampledReinforce);
    REQUIRE(h.records.size() == 301);
    for (std::size_t t = 0; t < h.records.size(); ++t) {
      const auto& r = h.records[t];
      CHECK(r.t == t);
      const double d = 1.0 - r.p_m1;
      CHECK(std::abs(r.gap - (d - std::pow(d, 4))) < 1e-12);
      CHECK(r.gap >= 0.0);
      CHECK(r.p_m1 + r.p_m2 <= 1.0 + 1e-15);
    }
    if (h.summary.total_discoveries == 0) {
      CHECK(h.records.back().p_m1 > h.records.front().p_m1);
      CHECK(h.records.back().gap < h.records.front().gap);
    }
  }

  TEST_CASE("runs are reproducible and independent of the thread count") {
    const auto env = make_two_mode_bandit(30, {0, 1}, {2}, 0.01);
    const Scenario sc{.env = env, .k = 4, .eta = 0.1, .steps = 100, .seed = 5, .replicates = 6};
    const auto a = run_replicates(sc, UpdateRule::SampledReinforce, 1);
    const auto b = run_replicates(sc, UpdateRule::SampledReinforce, 3);
    REQUIRE(a.size() == 6);
    for (std::size_t r = 0; r < a.size(); ++r) {
      REQUIRE(a[r].records.size() == b[r].records.size());
      for (std::size_t t = 0; t < a[r].records.size(); ++t) {
        CHECK(a[r].records[t].p_m1 == b[r].records[t].p_m1);
        CHECK(a[r].records[t].grad_norm == b[r].records[t].grad_norm);
        CHECK(a[r].records[t].discovered_m2 == b[r].records[t].discovered_m2);
      }
    }
    CHECK(a[0].records.back().p_m1 != a[1].records.back().p_m1);
  }

  TEST_CASE("idealized rule needs a partition") {
    const auto env = make_bandit(5, {0});
    CHECK_THROWS_AS(run(Scenario{.env = env, .steps = 1}, UpdateRule::IdealizedMassAscent),
                    PartitionError);
    CHECK_THROWS_AS(run(Scenario{.env = env, .eta = -1.0, .steps = 1}, UpdateRule::SampledReinforce), DomainError);
  }
}
