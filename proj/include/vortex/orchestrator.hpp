#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vortex/feedback.hpp"
#include "vortex/shaper.hpp"
#include "vortex/solver.hpp"

namespace vortex {

struct EarlyStopConfig {
  bool enabled = true;
  double tol = 1e-3;  // max-norm of consecutive shaping change
  int patience = 3;   // consecutive episodes under tol
};

struct BackendConfig {
  std::string kind = "analytic";  // analytic | scripted | remote
  AnalyticConfig analytic;
  std::string script_path;
  RemoteConfig remote;
};

struct RunConfig {
  std::string env_path;
  std::string env_inline;  // spec text, used when env_path is empty

  std::string directive;   // "favor <dimension>=<level>", or empty
  double rho = 0.75;
  std::vector<double> explicit_target;  // used when directive is empty
  DivergenceKind divergence = DivergenceKind::kKL;

  BackendConfig backend;
  int episodes = 10;
  std::uint64_t seed = 0;
  bool common_random_numbers = true;
  EarlyStopConfig early_stop;
  SolverOptions solver;
  std::string out_dir;
  std::string feedback_template_path;
  int prompt_history_cap = 0;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load_file(const std::string& path);
  nlohmann::json to_json() const;
};

struct EpisodeRecord {
  int k = 0;
  std::vector<double> shaping;
  double U = 0.0;
  std::vector<double> D;
  double C = 0.0;
  std::vector<CoverageEntry> coverage;
  bool has_deltas = false;
  Deltas deltas;
  std::string feedback;
  std::uint64_t seed_used = 0;
  double wall_ms = 0.0;  // not serialized into episodes.jsonl

  nlohmann::json to_json() const;
  static EpisodeRecord from_json(const nlohmann::json& j);
};

struct RunResult {
  std::vector<EpisodeRecord> episodes;
  PromptState prompt;
  std::vector<ParetoPoint> archive;  // one point per episode, unfiltered
  nlohmann::json manifest;
  bool early_stopped = false;
};

PreferenceSpec preference_from_config(const RunConfig& cfg, const Environment& env);
std::unique_ptr<Shaper> make_shaper(const RunConfig& cfg, const Environment& env);
std::string build_fixed_prompt(const EnvSummary& env, const PreferenceSpec& pref,
                               double r_max);

// The full loop: propose, solve, roll out, measure, compare, reflect,
// append. Backend failure aborts with partial results persisted when
// out_dir is set.
RunResult run_vortex(const RunConfig& cfg, const Environment& env);
RunResult run_vortex(const RunConfig& cfg);

struct SweepEntry {
  double lambda = 0.0;
  bool ok = false;
  double U = 0.0;
  double C = 0.0;
  std::string dir;
  std::string error;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  std::vector<std::pair<double, double>> frontier;  // filtered (U, C)
};

// Analytic-backend runs across lambda values; per-run failures are
// recorded without aborting the sweep.
SweepResult sweep_lambda(const RunConfig& cfg, const std::vector<double>& lambdas);

// episodes.jsonl, manifest.json, pareto.csv, coverage.csv.
void persist(const RunResult& result, const std::string& dir);
std::vector<EpisodeRecord> load_episodes(const std::string& jsonl_path);

std::string config_hash(const nlohmann::json& canonical);

}  // namespace vortex
