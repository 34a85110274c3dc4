#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "passk/dynamics.hpp"
#include "passk/environments.hpp"
#include "passk/errors.hpp"
#include "passk/estimators.hpp"
#include "passk/experiments.hpp"
#include "passk/objectives.hpp"
#include "passk/policy.hpp"

namespace py = pybind11;
using namespace passk;

namespace {

Trajectory to_trajectory(const std::vector<Token>& tokens) { return Trajectory{tokens}; }

TrajectorySet to_set(const PolicyShape& shape, const std::vector<std::vector<Token>>& members) {
  std::vector<Trajectory> ys;
  for (const auto& m : members) ys.push_back(to_trajectory(m));
  return TrajectorySet(shape, ys);
}

std::vector<std::vector<Token>> members(const PolicyShape& shape, const TrajectorySet& s) {
  std::vector<std::vector<Token>> out;
  for (TrajectoryCode c : s.codes()) out.push_back(shape.decode(c).tokens);
  return out;
}

py::dict estimate_dict(const GradEstimate& e) {
  py::dict d;
  d["mean"] = e.mean.vector();
  d["variance"] = e.variance;
  d["groups"] = e.groups;
  d["zero_fraction"] = e.zero_fraction;
  d["variance_trace"] = e.variance_trace();
  return d;
}

py::dict record_dict(const StepRecord& r) {
  py::dict d;
  d["t"] = r.t;
  d["p_m1"] = r.p_m1;
  d["p_m2"] = r.p_m2;
  d["j1"] = r.j1;
  d["jk"] = r.jk;
  d["gap"] = r.gap;
  d["discovered_m2"] = r.discovered_m2;
  d["grad_norm"] = r.grad_norm;
  d["batch_correct"] = r.batch_correct;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Exact pass@k objectives, estimators and training dynamics on toy policies";

  py::register_exception<Error>(m, "PasskError");
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<CapacityError>(m, "CapacityError", PyExc_ValueError);
  py::register_exception<PartitionError>(m, "PartitionError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<DegenerateModeError>(m, "DegenerateModeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<PolicyShape>(m, "PolicyShape")
      .def_static("categorical", &PolicyShape::categorical, py::arg("n_answers"),
                  py::arg("cap") = kDefaultSpaceCap)
      .def_static("autoregressive", &PolicyShape::autoregressive, py::arg("vocab"),
                  py::arg("horizon"), py::arg("cap") = kDefaultSpaceCap)
      .def_property_readonly("vocab", &PolicyShape::vocab)
      .def_property_readonly("horizon", &PolicyShape::horizon)
      .def_property_readonly("space_size", &PolicyShape::space_size)
      .def_property_readonly("param_count", &PolicyShape::param_count)
      .def("__repr__", &PolicyShape::describe);

  py::class_<Policy>(m, "Policy")
      .def(py::init([](const PolicyShape& shape, std::vector<double> logits) {
             return Policy(shape, ParamVector(std::move(logits)));
           }),
           py::arg("shape"), py::arg("logits"))
      .def_static("uniform", &Policy::uniform)
      .def_property_readonly("shape", &Policy::shape)
      .def_property_readonly("params", [](const Policy& p) { return p.params().vector(); })
      .def("prob", [](const Policy& p, const std::vector<Token>& y) { return p.prob(to_trajectory(y)); })
      .def("log_prob_grad",
           [](const Policy& p, const std::vector<Token>& y) {
             return p.log_prob_grad(to_trajectory(y)).vector();
           })
      .def("probabilities", &Policy::probabilities)
      .def("enumerate",
           [](const Policy& p) {
             std::vector<std::pair<std::vector<Token>, double>> out;
             for (auto& [y, pr] : p.enumerate()) out.emplace_back(y.tokens, pr);
             return out;
           })
      .def("sample",
           [](const Policy& p, std::uint64_t seed, std::size_t n) {
             Rng rng(seed);
             std::vector<std::vector<Token>> out;
             for (auto& y : p.sample(rng, n)) out.push_back(y.tokens);
             return out;
           },
           py::arg("seed"), py::arg("n"))
      .def("apply_update",
           [](const Policy& p, std::vector<double> direction, double eta) {
             return p.apply_update(ParamVector(std::move(direction)), eta);
           })
      .def("mass",
           [](const Policy& p, const std::vector<std::vector<Token>>& s) {
             return mass(p, to_set(p.shape(), s));
           })
      .def("mass_grad", [](const Policy& p, const std::vector<std::vector<Token>>& s) {
        return mass_grad(p, to_set(p.shape(), s)).vector();
      });

  py::class_<Verifier>(m, "Verifier")
      .def("verify", [](const Verifier& v, const std::vector<Token>& y) { return v.verify(to_trajectory(y)); })
      .def_property_readonly("correct", [](const Verifier& v) {
        return members(v.shape(), v.correct_set());
      });

  py::class_<Environment>(m, "Environment")
      .def_readonly("policy", &Environment::policy)
      .def_readonly("verifier", &Environment::verifier)
      .def_property_readonly("m1",
                             [](const Environment& e) -> py::object {
                               if (!e.modes) return py::none();
                               return py::cast(members(e.policy.shape(), e.modes->m1()));
                             })
      .def_property_readonly("m2", [](const Environment& e) -> py::object {
        if (!e.modes) return py::none();
        return py::cast(members(e.policy.shape(), e.modes->m2()));
      });

  m.def(
      "make_bandit",
      [](std::size_t n, const IndexSet& correct,
         const std::optional<std::pair<IndexSet, IndexSet>>& modes,
         const std::optional<std::vector<double>>& logits) {
        std::optional<ModeIndexSets> ms;
        if (modes) ms = ModeIndexSets{modes->first, modes->second};
        return make_bandit(n, correct, ms, logits);
      },
      py::arg("n_answers"), py::arg("correct"), py::arg("modes") = py::none(),
      py::arg("initial_logits") = py::none());
  m.def("make_two_mode_bandit", &make_two_mode_bandit, py::arg("n_answers"), py::arg("m1"),
        py::arg("m2"), py::arg("epsilon"));
  m.def(
      "make_sequence_env",
      [](std::size_t vocab, std::size_t horizon, const std::vector<std::vector<Token>>& targets) {
        return make_sequence_env(vocab, horizon, targets);
      },
      py::arg("vocab"), py::arg("horizon"), py::arg("targets"));

  m.def("j1_exact", &j1_exact);
  m.def("jk_from_j1", &jk_from_j1, py::arg("j1"), py::arg("k"));
  m.def("alpha", &alpha, py::arg("j1"), py::arg("k"));
  m.def("gap", &gap, py::arg("p"), py::arg("k"));
  m.def("grad_j1_exact", [](const Policy& p, const Verifier& v) { return grad_j1_exact(p, v).vector(); });
  m.def("grad_jk_exact", [](const Policy& p, const Verifier& v, std::size_t k) {
    return grad_jk_exact(p, v, k).vector();
  });
  m.def("zero_signal_prob", &zero_signal_prob, py::arg("j1"), py::arg("m"));
  m.def("passk_eval", &passk_eval, py::arg("n"), py::arg("c"), py::arg("k"));

  m.def(
      "estimate",
      [](const std::string& kind, const Policy& p, const Verifier& v, std::size_t k,
         std::size_t groups, std::uint64_t seed, unsigned threads) {
        return estimate_dict(
            estimate(estimator_from_string(kind), p, v, k, groups, {seed, threads}));
      },
      py::arg("kind"), py::arg("policy"), py::arg("verifier"), py::arg("k"), py::arg("groups"),
      py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "run",
      [](const Environment& env, std::size_t k, double eta, std::size_t steps, std::uint64_t seed,
         const std::string& rule, std::size_t replicate) {
        Scenario sc{.env = env};
        sc.k = k;
        sc.eta = eta;
        sc.steps = steps;
        sc.seed = seed;
        py::list out;
        for (const auto& r : run(sc, update_rule_from_string(rule), replicate).records) {
          out.append(record_dict(r));
        }
        return out;
      },
      py::arg("env"), py::arg("k"), py::arg("eta"), py::arg("steps"), py::arg("seed") = 0,
      py::arg("rule") = "sampled", py::arg("replicate") = 0);

  m.def(
      "discovery_experiment",
      [](const Environment& env, std::size_t k, std::size_t trials, std::uint64_t seed) {
        Scenario sc{.env = env};
        sc.k = k;
        sc.seed = seed;
        const auto d = discovery_experiment(sc, trials);
        py::dict out;
        out["epsilon"] = d.epsilon;
        out["empirical_rate"] = d.empirical_rate;
        out["exact_rate"] = d.exact_rate;
        out["bound_keps"] = d.bound_keps;
        out["sigma"] = d.sigma;
        return out;
      },
      py::arg("env"), py::arg("k"), py::arg("trials"), py::arg("seed") = 0);

  m.def(
      "taylor_check",
      [](const Environment& env, double eta) {
        if (!env.modes) throw PartitionError("taylor_check needs a mode partition");
        const auto t = taylor_check(env.policy, *env.modes, eta);
        py::dict out;
        out["p"] = t.p;
        out["predicted_delta"] = t.predicted_delta;
        out["actual_delta"] = t.actual_delta;
        out["discrepancy"] = t.discrepancy;
        return out;
      },
      py::arg("env"), py::arg("eta"));

  m.def(
      "run_experiment_json",
      [](const std::string& config_json) {
        const auto cfg = parse_config(nlohmann::json::parse(config_json));
        const auto result = run_command(cfg);
        py::dict files;
        for (const auto& a : result.artifacts) files[py::str(a.name)] = a.content;
        py::dict out;
        out["files"] = files;
        out["validation_failure"] =
            result.validation_failure ? py::cast(*result.validation_failure) : py::none();
        return out;
      },
      py::arg("config_json"));
}
