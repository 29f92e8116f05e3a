#include "vortex/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vortex/errors.hpp"
#include "vortex/metrics.hpp"

namespace vortex {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

AnalyticMode mode_from_string(const std::string& s) {
  if (s == "fixed_point") return AnalyticMode::kFixedPoint;
  if (s == "raw_sa") return AnalyticMode::kRawSa;
  throw ConfigError("unknown analytic mode: " + s);
}

std::string mode_to_string(AnalyticMode m) {
  return m == AnalyticMode::kFixedPoint ? "fixed_point" : "raw_sa";
}

json coverage_to_json(const std::vector<CoverageEntry>& cov) {
  json arr = json::array();
  for (const auto& e : cov)
    arr.push_back({{"dimension", e.dimension}, {"level", e.level}, {"value", e.value}});
  return arr;
}

std::vector<CoverageEntry> coverage_from_json(const json& arr) {
  std::vector<CoverageEntry> cov;
  for (const auto& e : arr)
    cov.push_back({e.at("dimension").get<std::string>(),
                   e.at("level").get<std::string>(), e.at("value").get<double>()});
  return cov;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  cfg.env_path = j.value("env", "");
  cfg.env_inline = j.value("env_inline", "");
  if (cfg.env_path.empty() && cfg.env_inline.empty())
    throw ConfigError("config needs 'env' (path) or 'env_inline' (spec text)");

  if (j.contains("preference")) {
    const json& p = j.at("preference");
    cfg.directive = p.value("directive", "");
    cfg.rho = p.value("rho", 0.75);
    cfg.divergence = divergence_from_string(p.value("divergence", "kl"));
    if (p.contains("target"))
      cfg.explicit_target = p.at("target").get<std::vector<double>>();
    if (cfg.directive.empty() && cfg.explicit_target.empty())
      throw ConfigError("preference needs a 'directive' or an explicit 'target'");
  } else {
    throw ConfigError("config needs a 'preference' block");
  }

  if (j.contains("backend")) {
    const json& b = j.at("backend");
    cfg.backend.kind = b.value("kind", "analytic");
    if (cfg.backend.kind == "analytic") {
      cfg.backend.analytic.lambda = b.value("lambda", 0.5);
      cfg.backend.analytic.eta0 = b.value("eta0", 0.5);
      cfg.backend.analytic.gain = b.value("gain", 1.0);
      cfg.backend.analytic.r_max = b.value("r_max", 1.0);
      cfg.backend.analytic.mode = mode_from_string(b.value("mode", "fixed_point"));
      cfg.backend.analytic.kind = cfg.divergence;
    } else if (cfg.backend.kind == "scripted") {
      cfg.backend.script_path = b.value("script", "");
      if (cfg.backend.script_path.empty())
        throw ConfigError("scripted backend needs 'script' path");
      cfg.backend.analytic.r_max = b.value("r_max", 1.0);
    } else if (cfg.backend.kind == "remote") {
      cfg.backend.remote.endpoint = b.value("endpoint", "");
      cfg.backend.remote.model = b.value("model", "");
      cfg.backend.remote.temperature = b.value("temperature", 0.0);
      cfg.backend.remote.api_key_env =
          b.value("api_key_env", std::string("VORTEX_LLM_API_KEY"));
      cfg.backend.remote.r_max = b.value("r_max", 1.0);
      cfg.backend.remote.max_retries = b.value("max_retries", 3);
      cfg.backend.remote.backoff_ms = b.value("backoff_ms", 250);
      cfg.backend.remote.timeout_s = b.value("timeout_s", 60);
    } else {
      throw ConfigError("unknown backend kind: " + cfg.backend.kind);
    }
  }

  cfg.episodes = j.value("episodes", 10);
  if (cfg.episodes < 1) throw ConfigError("episodes must be >= 1");
  cfg.seed = j.value("seed", 0ULL);
  cfg.common_random_numbers = j.value("common_random_numbers", true);
  if (j.contains("early_stop")) {
    const json& e = j.at("early_stop");
    cfg.early_stop.enabled = e.value("enabled", true);
    cfg.early_stop.tol = e.value("tol", 1e-3);
    cfg.early_stop.patience = e.value("patience", 3);
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    std::string ik = s.value("index", "advantage");
    if (ik == "advantage") cfg.solver.index = IndexKind::kAdvantage;
    else if (ik == "whittle") cfg.solver.index = IndexKind::kWhittle;
    else throw ConfigError("unknown solver index kind: " + ik);
    cfg.solver.act_only_positive = s.value("act_only_positive", false);
  }
  cfg.out_dir = j.value("out", "");
  cfg.feedback_template_path = j.value("feedback_template", "");
  cfg.prompt_history_cap = j.value("prompt_history_cap", 0);
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json j;
  if (!env_path.empty()) j["env"] = env_path;
  if (!env_inline.empty()) j["env_inline"] = env_inline;
  json pref;
  if (!directive.empty()) pref["directive"] = directive;
  pref["rho"] = rho;
  pref["divergence"] = to_string(divergence);
  if (!explicit_target.empty()) pref["target"] = explicit_target;
  j["preference"] = pref;

  json b;
  b["kind"] = backend.kind;
  if (backend.kind == "analytic") {
    b["lambda"] = backend.analytic.lambda;
    b["eta0"] = backend.analytic.eta0;
    b["gain"] = backend.analytic.gain;
    b["r_max"] = backend.analytic.r_max;
    b["mode"] = mode_to_string(backend.analytic.mode);
  } else if (backend.kind == "scripted") {
    b["script"] = backend.script_path;
    b["r_max"] = backend.analytic.r_max;
  } else if (backend.kind == "remote") {
    b["endpoint"] = backend.remote.endpoint;
    b["model"] = backend.remote.model;
    b["temperature"] = backend.remote.temperature;
    b["api_key_env"] = backend.remote.api_key_env;
    b["r_max"] = backend.remote.r_max;
    b["max_retries"] = backend.remote.max_retries;
    b["backoff_ms"] = backend.remote.backoff_ms;
    b["timeout_s"] = backend.remote.timeout_s;
  }
  j["backend"] = b;
  j["episodes"] = episodes;
  j["seed"] = seed;
  j["common_random_numbers"] = common_random_numbers;
  j["early_stop"] = {{"enabled", early_stop.enabled},
                     {"tol", early_stop.tol},
                     {"patience", early_stop.patience}};
  j["solver"] = {
      {"index", solver.index == IndexKind::kAdvantage ? "advantage" : "whittle"},
      {"act_only_positive", solver.act_only_positive}};
  if (!out_dir.empty()) j["out"] = out_dir;
  if (!feedback_template_path.empty())
    j["feedback_template"] = feedback_template_path;
  if (prompt_history_cap > 0) j["prompt_history_cap"] = prompt_history_cap;
  return j;
}

json EpisodeRecord::to_json() const {
  json j;
  j["k"] = k;
  j["shaping"] = shaping;
  j["U"] = U;
  j["D"] = D;
  j["C"] = C;
  j["coverage"] = coverage_to_json(coverage);
  if (has_deltas) {
    j["deltas"] = {{"dU", deltas.dU},
                   {"dD", deltas.dD},
                   {"dCoverage", coverage_to_json(deltas.dCoverage)}};
    j["feedback"] = feedback;
  }
  j["seed_used"] = seed_used;
  return j;
}

EpisodeRecord EpisodeRecord::from_json(const json& j) {
  EpisodeRecord r;
  r.k = j.at("k").get<int>();
  r.shaping = j.at("shaping").get<std::vector<double>>();
  r.U = j.at("U").get<double>();
  r.D = j.at("D").get<std::vector<double>>();
  r.C = j.at("C").get<double>();
  r.coverage = coverage_from_json(j.at("coverage"));
  if (j.contains("deltas")) {
    r.has_deltas = true;
    r.deltas.dU = j["deltas"].at("dU").get<double>();
    r.deltas.dD = j["deltas"].at("dD").get<std::vector<double>>();
    r.deltas.dCoverage = coverage_from_json(j["deltas"].at("dCoverage"));
    r.feedback = j.value("feedback", "");
  }
  r.seed_used = j.at("seed_used").get<std::uint64_t>();
  return r;
}

PreferenceSpec preference_from_config(const RunConfig& cfg, const Environment& env) {
  if (!cfg.directive.empty())
    return parse_directive(env, cfg.directive, cfg.rho, cfg.divergence);
  return explicit_preference(env, cfg.explicit_target, cfg.divergence);
}

std::unique_ptr<Shaper> make_shaper(const RunConfig& cfg, const Environment& env) {
  if (cfg.backend.kind == "analytic")
    return std::make_unique<AnalyticShaper>(cfg.backend.analytic,
                                            env.num_classes(), env.B, env.T);
  if (cfg.backend.kind == "scripted")
    return std::make_unique<ScriptedShaper>(ScriptedShaper::from_file(
        cfg.backend.script_path, cfg.backend.analytic.r_max));
  if (cfg.backend.kind == "remote") {
    RemoteConfig rc = cfg.backend.remote;
    rc.prompt_history_cap = cfg.prompt_history_cap;
    return std::make_unique<RemoteShaper>(rc);
  }
  throw ConfigError("unknown backend kind: " + cfg.backend.kind);
}

std::string build_fixed_prompt(const EnvSummary& env, const PreferenceSpec& pref,
                               double r_max) {
  std::ostringstream out;
  out << "Task: Generate a shaping reward vector that steers a budgeted "
         "allocation policy toward the stated preference while preserving "
         "high total reward.\n\n";
  out << "Context: Population '" << env.name << "' has " << env.N
      << " units in " << env.Z << " feature classes; up to " << env.B
      << " units can be acted on per round over " << env.T << " rounds.\n";
  out << "Classes:\n";
  for (int z = 0; z < env.Z; ++z)
    out << "  " << z << ": " << env.class_labels[z] << " (count "
        << env.class_counts[z] << ", target share " << pref.target[z] << ")\n";
  out << "Preference: " << pref.directive_text << "\n\n";
  out << "Instruction: Assign an additional reward value to each class to "
         "improve alignment with the target shares at minimal reward loss. "
         "The shaping reward is added to a unit's reward only when it is "
         "acted on.\n\n";
  out << "Output: A single JSON object mapping every class id (\"0\".."
      << "\"" << env.Z - 1 << "\") to a number in [" << -r_max << ", "
      << r_max << "]. No other JSON objects in the reply.";
  return out.str();
}

RunResult run_vortex(const RunConfig& cfg) {
  Environment env = cfg.env_path.empty() ? load_environment(cfg.env_inline)
                                         : load_environment_file(cfg.env_path);
  return run_vortex(cfg, env);
}

RunResult run_vortex(const RunConfig& cfg, const Environment& env) {
  PreferenceSpec pref = preference_from_config(cfg, env);
  std::unique_ptr<Shaper> shaper = make_shaper(cfg, env);
  FeedbackTemplate tpl = cfg.feedback_template_path.empty()
                             ? FeedbackTemplate::defaults()
                             : FeedbackTemplate::load_file(cfg.feedback_template_path);

  RunResult result;
  result.prompt.fixed =
      build_fixed_prompt(EnvSummary::from(env), pref, cfg.backend.analytic.r_max);

  std::vector<EpisodeMetrics> history;
  std::vector<double> prev_shaping;
  int calm_streak = 0;

  auto fail = [&](const std::string& what) {
    if (!cfg.out_dir.empty()) {
      result.manifest = json{{"aborted", what}};
      persist(result, cfg.out_dir);
    }
    throw ProposalError(ProposalFailure::kInvalid,
                        "run aborted at episode " +
                            std::to_string(result.episodes.size()) + ": " + what);
  };

  for (int k = 0; k < cfg.episodes; ++k) {
    auto started = std::chrono::steady_clock::now();

    ShaperContext ctx{k, result.prompt, history, pref, EnvSummary::from(env)};
    ShaperOutput proposal;
    try {
      proposal = shaper->propose(ctx);
    } catch (const ProposalError& e) {
      fail(e.what());
    }

    Policy policy = solve_policy(env, proposal.shaping, cfg.solver);
    std::uint64_t episode_seed = cfg.common_random_numbers
                                     ? mix_seed(cfg.seed, 0)
                                     : mix_seed(cfg.seed, static_cast<std::uint64_t>(k));
    Trajectory traj = rollout(env, policy, env.T, RandomStream{episode_seed});
    EpisodeMetrics m = compute_episode_metrics(traj, env, pref);

    EpisodeRecord rec;
    rec.k = k;
    rec.shaping = proposal.shaping.bonus;
    rec.U = m.U;
    rec.D = m.D.d;
    rec.C = m.C;
    rec.coverage = m.coverage;
    rec.seed_used = episode_seed;

    if (k > 0) {
      rec.has_deltas = true;
      rec.deltas = compare_metrics(m, history.back());
      VerbalFeedback fb = render_feedback(rec.deltas, pref, m, env, tpl);
      rec.feedback = fb.text;
      result.prompt = update_prompt(result.prompt, fb);
    }

    history.push_back(m);
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - started)
                      .count();
    result.episodes.push_back(std::move(rec));
    result.archive.push_back({m.U, m.C, k, "episode"});

    if (cfg.early_stop.enabled && k > 0) {
      double change = 0.0;
      for (std::size_t z = 0; z < prev_shaping.size(); ++z)
        change = std::max(change,
                          std::fabs(proposal.shaping.bonus[z] - prev_shaping[z]));
      calm_streak = change < cfg.early_stop.tol ? calm_streak + 1 : 0;
      if (calm_streak >= cfg.early_stop.patience) {
        result.early_stopped = true;
      }
    }
    prev_shaping = proposal.shaping.bonus;
    if (result.early_stopped) break;
  }

  json manifest;
  manifest["tool"] = "vortex";
  manifest["version"] = "0.1.0";
  json cfg_json = cfg.to_json();
  manifest["config"] = cfg_json;
  manifest["config_hash"] = config_hash(cfg_json);
  manifest["env"] = {{"name", env.name}, {"N", env.N}, {"B", env.B},
                     {"T", env.T},       {"classes", env.num_classes()}};
  manifest["divergence"] = to_string(cfg.divergence);
  if (cfg.backend.kind == "analytic")
    manifest["lambda"] = cfg.backend.analytic.lambda;
  manifest["episodes_run"] = result.episodes.size();
  manifest["early_stopped"] = result.early_stopped;
  json walls = json::array();
  for (const auto& rec : result.episodes) walls.push_back(rec.wall_ms);
  manifest["wall_ms"] = walls;
  result.manifest = manifest;

  if (!cfg.out_dir.empty()) persist(result, cfg.out_dir);
  return result;
}

SweepResult sweep_lambda(const RunConfig& cfg, const std::vector<double>& lambdas) {
  if (cfg.backend.kind != "analytic")
    throw ConfigError("lambda sweep requires the analytic backend");
  SweepResult sweep;
  std::vector<std::pair<double, double>> points;
  for (double lambda : lambdas) {
    RunConfig sub = cfg;
    sub.backend.analytic.lambda = lambda;
    std::ostringstream dir;
    dir << "lambda_" << lambda;
    if (!cfg.out_dir.empty())
      sub.out_dir = (fs::path(cfg.out_dir) / dir.str()).string();
    SweepEntry entry;
    entry.lambda = lambda;
    entry.dir = sub.out_dir;
    try {
      RunResult res = run_vortex(sub);
      entry.ok = true;
      entry.U = res.episodes.back().U;
      entry.C = res.episodes.back().C;
      points.emplace_back(entry.U, entry.C);
    } catch (const Error& e) {
      entry.ok = false;
      entry.error = e.what();
    }
    sweep.entries.push_back(std::move(entry));
  }
  sweep.frontier = pareto_filter(points);
  return sweep;
}

void persist(const RunResult& result, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());

  {
    std::ofstream out(fs::path(dir) / "episodes.jsonl");
    if (!out) throw IoError("cannot write episodes.jsonl in " + dir);
    for (const auto& rec : result.episodes) out << rec.to_json().dump() << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw IoError("cannot write manifest.json in " + dir);
    out << result.manifest.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "pareto.csv");
    if (!out) throw IoError("cannot write pareto.csv in " + dir);
    out << "k,U,C,dominated\n";
    std::vector<bool> flags = dominated_flags(result.archive);
    for (std::size_t i = 0; i < result.archive.size(); ++i) {
      const auto& p = result.archive[i];
      out << p.episode << "," << json(p.U).dump() << "," << json(p.C).dump()
          << "," << (flags[i] ? 1 : 0) << "\n";
    }
  }
  {
    std::ofstream out(fs::path(dir) / "coverage.csv");
    if (!out) throw IoError("cannot write coverage.csv in " + dir);
    out << "k,dimension,level,proportion\n";
    for (const auto& rec : result.episodes)
      for (const auto& e : rec.coverage)
        out << rec.k << "," << e.dimension << "," << e.level << ","
            << json(e.value).dump() << "\n";
  }
}

std::vector<EpisodeRecord> load_episodes(const std::string& jsonl_path) {
  std::ifstream in(jsonl_path);
  if (!in) throw IoError("cannot open " + jsonl_path);
  std::vector<EpisodeRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(EpisodeRecord::from_json(json::parse(line)));
  }
  return records;
}

std::string config_hash(const json& canonical) {
  // FNV-1a over the canonical (sorted-key) dump.
  std::string text = canonical.dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  std::ostringstream oss;
  oss << std::hex << h;
  return oss.str();
}

}  // namespace vortex
