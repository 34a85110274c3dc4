#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "passk/errors.hpp"
#include "passk/experiments.hpp"
#include "passk/objectives.hpp"

namespace passk {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects any key it was never asked about.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (const json* v = find(key)) out = convert<T>(*v, where_ + "." + key);
  }

  template <class T>
  void read(const std::string& key, std::optional<T>& out) {
    if (const json* v = find(key)) out = convert<T>(*v, where_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

  template <class T>
  static T convert(const json& v, const std::string& where) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(where + ": expected a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
          throw ConfigError(where + ": expected a nonnegative integer");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where + ": expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class T>
std::vector<T> read_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(ObjectReader::convert<T>(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<std::vector<Token>> read_sequences(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of token sequences");
  std::vector<std::vector<Token>> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(read_list<Token>(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

ScenarioConfig parse_scenario(const json& doc) {
  ScenarioConfig s;
  ObjectReader r(doc, "scenario");
  r.read("kind", s.kind);
  require(s.kind == "bandit" || s.kind == "sequence",
          "scenario.kind must be \"bandit\" or \"sequence\"");
  r.read("n_answers", s.n_answers);
  if (const json* v = r.find("correct")) s.correct = read_list<std::size_t>(*v, "scenario.correct");
  r.read("epsilon", s.epsilon);
  if (const json* v = r.find("initial_logits")) {
    s.initial_logits = read_list<double>(*v, "scenario.initial_logits");
  }
  r.read("vocab", s.vocab);
  r.read("horizon", s.horizon);
  if (const json* v = r.find("targets")) s.targets = read_sequences(*v, "scenario.targets");
  if (const json* v = r.find("modes")) {
    ObjectReader m(*v, "scenario.modes");
    const json* m1 = m.find("m1");
    const json* m2 = m.find("m2");
    m.finish();
    require(m1 && m2, "scenario.modes needs both m1 and m2");
    if (s.kind == "bandit") {
      s.modes = ModeIndexSets{read_list<std::size_t>(*m1, "scenario.modes.m1"),
                              read_list<std::size_t>(*m2, "scenario.modes.m2")};
    } else {
      s.sequence_modes.emplace(read_sequences(*m1, "scenario.modes.m1"),
                               read_sequences(*m2, "scenario.modes.m2"));
    }
  }
  r.read("k", s.k);
  r.read("eta", s.eta);
  r.read("steps", s.steps);
  r.read("replicates", s.replicates);
  r.read("reinforce_all", s.reinforce_all);
  std::string rule = std::string(to_string(s.rule));
  r.read("rule", rule);
  try {
    s.rule = update_rule_from_string(rule);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("scenario.rule: ") + e.what());
  }
  r.finish();

  require(s.k >= 1, "scenario.k must be at least 1");
  require(s.eta > 0.0 && std::isfinite(s.eta), "scenario.eta must be > 0");
  require(s.replicates >= 1, "scenario.replicates must be at least 1");
  require(s.n_answers >= 1, "scenario.n_answers must be at least 1");
  if (s.epsilon) {
    require(*s.epsilon >= 0.0 && *s.epsilon < 1.0, "scenario.epsilon must lie in [0, 1)");
    require(s.kind == "bandit" && s.modes.has_value(),
            "scenario.epsilon needs a bandit scenario with modes");
  }
  return s;
}

}  // namespace

std::vector<double> linear_grid(std::size_t points) {
  if (points < 2) throw ConfigError("grid needs at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  ObjectReader r(doc, "config");
  r.read("experiment", c.experiment);
  r.read("seed", c.seed);
  r.read("threads", c.threads);
  r.read("output_dir", c.output_dir);
  if (const json* v = r.find("scenario")) c.scenario = parse_scenario(*v);
  if (const json* v = r.find("j1_grid")) {
    if (v->is_object()) {
      ObjectReader g(*v, "j1_grid");
      std::size_t points = 101;
      g.read("points", points);
      g.finish();
      c.j1_grid = linear_grid(points);
    } else {
      c.j1_grid = read_list<double>(*v, "j1_grid");
    }
  } else {
    c.j1_grid = linear_grid(101);
  }
  if (const json* v = r.find("k_list")) c.k_list = read_list<std::size_t>(*v, "k_list");
  if (const json* v = r.find("epsilon_list")) {
    c.epsilon_list = read_list<double>(*v, "epsilon_list");
  } else {
    c.epsilon_list = {1e-4, 1e-3, 1e-2, 0.1, 0.5};
  }
  r.read("trials", c.trials);
  r.read("groups", c.groups);
  r.read("cases", c.cases);
  r.read("degenerate_cases", c.degenerate_cases);
  r.read("batch_size", c.batch_size);
  if (const json* v = r.find("estimators")) {
    c.estimators.clear();
    for (const auto& name : read_list<std::string>(*v, "estimators")) {
      try {
        c.estimators.push_back(estimator_from_string(name));
      } catch (const DomainError& e) {
        throw ConfigError(std::string("estimators: ") + e.what());
      }
    }
  }
  r.read("fd_step", c.fd_step);
  r.read("fd_rel_tol", c.fd_rel_tol);
  r.read("max_fd_coords", c.max_fd_coords);
  r.read("gap_threshold", c.gap_threshold);
  r.finish();

  const auto& names = experiment_names();
  require(std::find(names.begin(), names.end(), c.experiment) != names.end(),
          "config.experiment '" + c.experiment + "' is not a known experiment");
  require(c.threads >= 1, "threads must be at least 1");
  require(!c.j1_grid.empty(), "j1_grid must be nonempty");
  for (double j : c.j1_grid) require(j >= 0.0 && j <= 1.0, "j1_grid values must lie in [0, 1]");
  require(!c.k_list.empty(), "k_list must be nonempty");
  for (std::size_t k : c.k_list) require(k >= 1 && k <= kMaxK, "k_list values must lie in [1, 65536]");
  require(!c.epsilon_list.empty(), "epsilon_list must be nonempty");
  for (double e : c.epsilon_list) require(e >= 0.0 && e < 1.0, "epsilon_list values must lie in [0, 1)");
  require(c.trials >= 1 && c.groups >= 1 && c.cases >= 1 && c.batch_size >= 1,
          "trials, groups, cases and batch_size must be at least 1");
  require(!c.estimators.empty(), "estimators must be nonempty");
  require(c.fd_step > 0.0 && c.fd_rel_tol > 0.0, "fd_step and fd_rel_tol must be > 0");
  require(c.max_fd_coords >= 1, "max_fd_coords must be at least 1");
  require(c.gap_threshold > 0.0, "gap_threshold must be > 0");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

nlohmann::json ExperimentConfig::to_json() const {
  json s = {{"kind", scenario.kind},
            {"k", scenario.k},
            {"eta", scenario.eta},
            {"steps", scenario.steps},
            {"replicates", scenario.replicates},
            {"reinforce_all", scenario.reinforce_all},
            {"rule", std::string(passk::to_string(scenario.rule))}};
  if (scenario.kind == "bandit") {
    s["n_answers"] = scenario.n_answers;
    if (scenario.correct) s["correct"] = *scenario.correct;
    if (scenario.modes) s["modes"] = {{"m1", scenario.modes->m1}, {"m2", scenario.modes->m2}};
    if (scenario.epsilon) s["epsilon"] = *scenario.epsilon;
    if (scenario.initial_logits) s["initial_logits"] = *scenario.initial_logits;
  } else {
    s["vocab"] = scenario.vocab;
    s["horizon"] = scenario.horizon;
    s["targets"] = scenario.targets;
    if (scenario.sequence_modes) {
      s["modes"] = {{"m1", scenario.sequence_modes->first}, {"m2", scenario.sequence_modes->second}};
    }
  }
  json est = json::array();
  for (EstimatorKind e : estimators) est.push_back(std::string(passk::to_string(e)));
  return json{{"experiment", experiment},
              {"seed", seed},
              {"threads", threads},
              {"output_dir", output_dir},
              {"scenario", s},
              {"j1_grid", j1_grid},
              {"k_list", k_list},
              {"epsilon_list", epsilon_list},
              {"trials", trials},
              {"groups", groups},
              {"cases", cases},
              {"degenerate_cases", degenerate_cases},
              {"batch_size", batch_size},
              {"estimators", est},
              {"fd_step", fd_step},
              {"fd_rel_tol", fd_rel_tol},
              {"max_fd_coords", max_fd_coords},
              {"gap_threshold", gap_threshold}};
}

Scenario build_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  Scenario sc{.env = [&]() -> Environment {
    if (cfg.kind == "sequence") {
      return make_sequence_env(cfg.vocab, cfg.horizon, cfg.targets, cfg.sequence_modes);
    }
    IndexSet correct;
    if (cfg.correct) {
      correct = *cfg.correct;
    } else if (cfg.modes) {
      correct = cfg.modes->m1;
      correct.insert(correct.end(), cfg.modes->m2.begin(), cfg.modes->m2.end());
    }
    if (cfg.epsilon) {
      if (cfg.initial_logits) throw ConfigError("scenario: epsilon and initial_logits conflict");
      auto env = make_two_mode_bandit(cfg.n_answers, cfg.modes->m1, cfg.modes->m2, *cfg.epsilon);
      if (cfg.correct && !(env.verifier.correct_set() ==
                           TrajectorySet::from_codes(env.policy.shape(),
                                                     {cfg.correct->begin(), cfg.correct->end()}))) {
        throw PartitionError("scenario.correct differs from the union of the modes");
      }
      return env;
    }
    return make_bandit(cfg.n_answers, correct, cfg.modes, cfg.initial_logits);
  }()};
  sc.k = cfg.k;
  sc.eta = cfg.eta;
  sc.steps = cfg.steps;
  sc.seed = seed;
  sc.replicates = cfg.replicates;
  sc.reinforce_all = cfg.reinforce_all;
  sc.validate();
  return sc;
}

}  // namespace passk
