#include "passk/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <openssl/evp.h>

#include "passk/errors.hpp"
#include "passk/numdiff.hpp"
#include "passk/objectives.hpp"
#include "passk/parallel.hpp"
#include "passk/rng.hpp"

namespace passk {

using nlohmann::json;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string num(double x) { return format_number(x); }
std::string num(std::size_t x) { return std::to_string(x); }

std::string csv_field(const std::string& f) {
  if (f.find_first_of(",\"\n") == std::string::npos) return f;
  std::string out = "\"";
  for (char ch : f) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

double cosine(const ParamVector& a, const ParamVector& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

std::vector<std::size_t> fd_coordinates(std::size_t dim, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> coords(dim);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (dim <= cap) return coords;
  // Partial Fisher-Yates: a seeded subset of `cap` coordinates.
  for (std::size_t i = 0; i < cap; ++i) {
    std::swap(coords[i], coords[i + rng.below(dim - i)]);
  }
  coords.resize(cap);
  std::sort(coords.begin(), coords.end());
  return coords;
}

}  // namespace

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw Error("CSV row width does not match header");
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::string out;
  auto emit = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      out += csv_field(r[i]);
    }
    out += '\n';
  };
  emit(header_);
  for (const auto& r : rows_) emit(r);
  return out;
}

// ---------------------------------------------------------------------------

CommandResult cmd_figure1(const ExperimentConfig& cfg) {
  CsvTable t({"j1", "k", "jk", "alpha", "alpha_scaled"});
  for (std::size_t k : cfg.k_list) {
    for (double j1 : cfg.j1_grid) {
      const double a = alpha(j1, k);
      t.add_row({num(j1), num(k), num(jk_from_j1(j1, k)), num(a), num(0.5 * a)});
    }
  }
  return {{{"figure1.csv", t.str()}}, std::nullopt};
}

RandomCase random_case(std::uint64_t seed, std::size_t index, std::size_t k, bool degenerate) {
  Rng rng = Rng::stream(seed, index);
  const bool sequence = rng.below(2) == 1;
  std::optional<PolicyShape> shape;
  if (sequence) {
    const std::size_t vocab = 2 + rng.below(3);  // 2..4
    std::size_t max_t = 0;
    for (std::uint64_t s = vocab; s <= 4096; s *= vocab) ++max_t;
    shape = PolicyShape::autoregressive(vocab, 1 + rng.below(max_t));
  } else {
    shape = PolicyShape::categorical(2 + rng.below(63));  // 2..64
  }
  std::vector<double> logits(shape->param_count());
  for (double& l : logits) l = rng.normal();
  Policy policy(*shape, ParamVector(std::move(logits)));

  const std::uint64_t space = shape->space_size();
  if (degenerate) return {policy, Verifier(*shape, TrajectorySet(*shape)), k};

  std::vector<TrajectoryCode> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 200; ++attempt) {
    const double inclusion = 0.05 + 0.5 * rng.uniform();
    std::vector<TrajectoryCode> codes;
    for (TrajectoryCode c = 0; c < space; ++c) {
      if (rng.uniform() < inclusion) codes.push_back(c);
    }
    if (codes.empty() || codes.size() == space) continue;
    const auto set = TrajectorySet::from_codes(*shape, codes);
    const double j1 = mass(policy, set);
    if (j1 >= 0.02 && j1 <= 0.6) return {policy, Verifier(*shape, set), k};
    const double score = std::min(std::abs(j1 - 0.02), std::abs(j1 - 0.6));
    if (score < best_score) {
      best_score = score;
      best = codes;
    }
  }
  if (best.empty()) best.push_back(0);
  return {policy, Verifier(*shape, TrajectorySet::from_codes(*shape, best)), k};
}

CommandResult cmd_collinearity(const ExperimentConfig& cfg) {
  const std::size_t total = cfg.cases + cfg.degenerate_cases;
  struct Row {
    std::size_t k;
    double j1, cos, ratio_error, fd_error;
    bool degenerate;
  };
  std::vector<Row> rows(total);

  parallel_for(total, cfg.threads, [&](std::size_t i) {
    const std::size_t k = cfg.k_list[i % cfg.k_list.size()];
    const RandomCase rc = random_case(cfg.seed, i, k, i >= cfg.cases);
    const double j1 = j1_exact(rc.policy, rc.verifier);
    const ParamVector g1 = grad_j1_exact(rc.policy, rc.verifier);
    const ParamVector gk = grad_jk_exact(rc.policy, rc.verifier, k);
    const double a = alpha(j1, k);

    Row row{k, j1, std::numeric_limits<double>::quiet_NaN(),
            std::numeric_limits<double>::quiet_NaN(), 0.0, true};
    if (g1.max_abs() > 0.0 && gk.max_abs() > 0.0) {
      row.degenerate = false;
      row.cos = cosine(gk, g1);
      double worst = 0.0;
      for (std::size_t c = 0; c < g1.size(); ++c) {
        if (std::abs(g1[c]) < 1e-280) continue;
        worst = std::max(worst, std::abs(gk[c] / g1[c] - a) / a);
      }
      row.ratio_error = worst;
    }

    Rng coord_rng = Rng::stream(Rng::derive_seed(cfg.seed, 0xfdU), i);
    const auto coords = fd_coordinates(g1.size(), cfg.max_fd_coords, coord_rng);
    const auto& verifier = rc.verifier;
    const auto fd1 = central_difference(
        rc.policy, [&](const Policy& p) { return mass(p, verifier.correct_set()); }, coords,
        cfg.fd_step);
    const auto fdk = central_difference(
        rc.policy,
        [&](const Policy& p) {
          return jk_from_j1(std::clamp(mass(p, verifier.correct_set()), 0.0, 1.0), k);
        },
        coords, cfg.fd_step);
    row.fd_error = std::max(relative_error(fd1, g1.values(), coords),
                            relative_error(fdk, gk.values(), coords));
    rows[i] = row;
  });

  CsvTable t({"case_id", "k", "j1", "cosine", "ratio_error", "fd_error"});
  std::optional<std::string> failure;
  for (std::size_t i = 0; i < total; ++i) {
    const Row& r = rows[i];
    t.add_row({num(i), num(r.k), num(r.j1), num(r.cos), num(r.ratio_error), num(r.fd_error)});
    if (failure) continue;
    if (r.fd_error > cfg.fd_rel_tol) {
      failure = "case " + std::to_string(i) + ": finite-difference relative error " +
                format_number(r.fd_error) + " exceeds " + format_number(cfg.fd_rel_tol);
    } else if (!r.degenerate && (std::abs(r.cos - 1.0) > 1e-10 || r.ratio_error >= 1e-10)) {
      failure = "case " + std::to_string(i) + ": gradients are not collinear";
    }
  }
  return {{{"collinearity.csv", t.str()}}, failure};
}

CommandResult cmd_vanish(const ExperimentConfig& cfg) {
  const std::size_t n = cfg.scenario.n_answers;
  if (n < 2) throw ConfigError("vanish needs scenario.n_answers >= 2");
  struct Point {
    double j1;
    ParamVector g1;
    Policy policy;
    Verifier verifier;
  };
  const auto shape = PolicyShape::categorical(n);
  std::vector<Point> points;
  for (double target : cfg.j1_grid) {
    // Answer 0 is the only correct one; its logit is solved for the target pass@1.
    std::vector<double> logits(n, 0.0);
    TrajectorySet correct(shape);
    if (target >= 1.0) {
      correct = TrajectorySet::full(shape);
    } else if (target > 0.0) {
      correct = TrajectorySet::from_codes(shape, {0});
      logits[0] = std::log(target * static_cast<double>(n - 1) / (1.0 - target));
    }
    Policy policy(shape, ParamVector(logits));
    Verifier verifier(shape, correct);
    const double j1 = j1_exact(policy, verifier);
    points.push_back(Point{j1, grad_j1_exact(policy, verifier), policy, verifier});
  }

  CsvTable t({"j1", "k", "grad_norm_j1", "grad_norm_jk", "zero_signal_prob_at_m"});
  for (std::size_t k : cfg.k_list) {
    for (const Point& p : points) {
      const double gk = grad_jk_exact(p.policy, p.verifier, k).norm();
      t.add_row({num(p.j1), num(k), num(p.g1.norm()), num(gk),
                 num(zero_signal_prob(p.j1, cfg.batch_size))});
    }
  }
  return {{{"vanish.csv", t.str()}}, std::nullopt};
}

namespace {

std::string history_csv(const RunHistory& h) {
  CsvTable t({"t", "p_m1", "p_m2", "j1", "jk", "gap", "discovered_m2", "grad_norm",
              "batch_correct"});
  for (const StepRecord& r : h.records) {
    t.add_row({num(r.t), num(r.p_m1), num(r.p_m2), num(r.j1), num(r.jk), num(r.gap),
               r.discovered_m2 ? "1" : "0", num(r.grad_norm), num(r.batch_correct)});
  }
  return t.str();
}

std::string replicate_name(std::size_t r) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "collapse_rep%03zu.csv", r);
  return buf;
}

}  // namespace

CommandResult cmd_collapse(const ExperimentConfig& cfg) {
  const Scenario sc = build_scenario(cfg.scenario, cfg.seed);
  if (!sc.env.modes) throw PartitionError("collapse needs scenario.modes");
  const auto histories = run_replicates(sc, cfg.scenario.rule, cfg.threads, cfg.gap_threshold);

  CommandResult out;
  json reps = json::array();
  std::size_t never = 0;
  double sum_p = 0.0;
  double sum_gap = 0.0;
  for (std::size_t r = 0; r < histories.size(); ++r) {
    const RunHistory& h = histories[r];
    out.artifacts.push_back({replicate_name(r), history_csv(h)});
    const StepRecord& first = h.records.front();
    const StepRecord& last = h.records.back();
    never += h.summary.total_discoveries == 0 ? 1 : 0;
    sum_p += last.p_m1;
    sum_gap += last.gap;
    json steps_to = nullptr;
    if (h.summary.steps_to_gap_below) steps_to = *h.summary.steps_to_gap_below;
    reps.push_back({{"replicate", r},
                    {"file", replicate_name(r)},
                    {"total_discoveries", h.summary.total_discoveries},
                    {"initial_p_m1", first.p_m1},
                    {"final_p_m1", last.p_m1},
                    {"initial_gap", first.gap},
                    {"final_gap", last.gap},
                    {"steps_to_gap_below", steps_to}});
  }
  const double count = static_cast<double>(histories.size());
  json summary = {{"scenario", histories.front().scenario},
                  {"replicates", histories.size()},
                  {"gap_threshold", cfg.gap_threshold},
                  {"never_discovered_fraction", static_cast<double>(never) / count},
                  {"mean_final_p_m1", sum_p / count},
                  {"mean_final_gap", sum_gap / count},
                  {"per_replicate", reps}};
  out.artifacts.push_back({"collapse_summary.json", summary.dump(2) + "\n"});
  return out;
}

CommandResult cmd_discovery(const ExperimentConfig& cfg) {
  IndexSet m1{0};
  IndexSet m2{1};
  if (cfg.scenario.modes) {
    m1 = cfg.scenario.modes->m1;
    m2 = cfg.scenario.modes->m2;
  }
  struct Cell {
    double eps;
    std::size_t k;
  };
  std::vector<Cell> cells;
  for (double e : cfg.epsilon_list) {
    for (std::size_t k : cfg.k_list) cells.push_back({e, k});
  }
  std::vector<DiscoverySummary> results(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const IndexSet undiscovered = cells[i].eps == 0.0 ? IndexSet{} : m2;
    Scenario sc{.env = make_two_mode_bandit(cfg.scenario.n_answers, m1, undiscovered,
                                            cells[i].eps)};
    sc.k = cells[i].k;
    sc.seed = Rng::derive_seed(cfg.seed, i);
    results[i] = discovery_experiment(sc, cfg.trials, cfg.threads);
  }
  CsvTable t({"epsilon", "k", "empirical_rate", "exact_rate", "bound_keps", "trials"});
  for (const DiscoverySummary& d : results) {
    t.add_row({num(d.epsilon), num(d.k), num(d.empirical_rate), num(d.exact_rate),
               num(d.bound_keps), num(d.trials)});
  }
  return {{{"discovery.csv", t.str()}}, std::nullopt};
}

CommandResult cmd_estimators(const ExperimentConfig& cfg) {
  const Scenario sc = build_scenario(cfg.scenario, cfg.seed);
  const Policy& policy = sc.env.policy;
  const Verifier& verifier = sc.env.verifier;
  const ParamVector g1 = grad_j1_exact(policy, verifier);

  CsvTable t({"estimator", "k", "groups", "bias_norm", "variance_trace", "zero_fraction",
              "se_sigmas"});
  for (EstimatorKind kind : cfg.estimators) {
    for (std::size_t k : cfg.k_list) {
      if (kind == EstimatorKind::PassKLeaveOneOut && k < 2) {
        throw ConfigError("leave-one-out estimator needs every k in k_list to be >= 2");
      }
      // Same seed for every row so estimators are compared on identical draws.
      const GradEstimate est =
          estimate(kind, policy, verifier, k, cfg.groups, {cfg.seed, cfg.threads});
      const ParamVector exact =
          kind == EstimatorKind::Pass1MC ? g1 : grad_jk_exact(policy, verifier, k);
      double bias_sq = 0.0;
      double sigmas = 0.0;
      const auto se = est.standard_errors();
      for (std::size_t i = 0; i < exact.size(); ++i) {
        const double d = est.mean[i] - exact[i];
        bias_sq += d * d;
        if (d != 0.0) {
          sigmas = std::max(sigmas, se[i] > 0.0 ? std::abs(d) / se[i]
                                                : std::numeric_limits<double>::infinity());
        }
      }
      t.add_row({std::string(to_string(kind)), num(k), num(cfg.groups), num(std::sqrt(bias_sq)),
                 num(est.variance_trace()), num(est.zero_fraction), num(sigmas)});
    }
  }
  return {{{"estimators.csv", t.str()}}, std::nullopt};
}

CommandResult run_command(const ExperimentConfig& cfg) {
  if (cfg.experiment == "figure1") return cmd_figure1(cfg);
  if (cfg.experiment == "collinearity") return cmd_collinearity(cfg);
  if (cfg.experiment == "vanish") return cmd_vanish(cfg);
  if (cfg.experiment == "collapse") return cmd_collapse(cfg);
  if (cfg.experiment == "discovery") return cmd_discovery(cfg);
  if (cfg.experiment == "estimators") return cmd_estimators(cfg);
  throw ConfigError("unknown experiment '" + cfg.experiment + "'");
}

// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

json RunManifest::to_json() const {
  json files_json = json::array();
  for (const auto& [name, hash] : files) files_json.push_back({{"path", name}, {"sha256", hash}});
  return json{{"tool", std::string(kToolName)},
              {"tool_version", tool_version},
              {"config", config},
              {"files", files_json},
              {"duration_seconds", duration_seconds}};
}

RunManifest write_artifacts(const ExperimentConfig& cfg, const CommandResult& result,
                            const std::filesystem::path& out_dir, double duration_seconds) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + out_dir.string());

  RunManifest manifest;
  manifest.config = cfg.to_json();
  manifest.tool_version = std::string(kToolVersion);
  manifest.duration_seconds = duration_seconds;
  for (const Artifact& a : result.artifacts) {
    std::ofstream f(out_dir / a.name, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + (out_dir / a.name).string());
    f << a.content;
    manifest.files.emplace_back(a.name, sha256_hex(a.content));
  }
  std::ofstream m(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!m) throw ConfigError("cannot write manifest in " + out_dir.string());
  m << manifest.to_json().dump(2) << "\n";
  return manifest;
}

bool verify_manifest(const std::filesystem::path& out_dir) {
  std::ifstream in(out_dir / "manifest.json");
  if (!in) return false;
  json doc;
  try {
    doc = json::parse(in);
    for (const auto& entry : doc.at("files")) {
      std::ifstream f(out_dir / entry.at("path").get<std::string>(), std::ios::binary);
      if (!f) return false;
      std::ostringstream ss;
      ss << f.rdbuf();
      if (sha256_hex(ss.str()) != entry.at("sha256").get<std::string>()) return false;
    }
  } catch (const json::exception&) {
    return false;
  }
  return true;
}

}  // namespace passk
