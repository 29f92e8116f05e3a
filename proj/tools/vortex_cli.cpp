#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vortex/errors.hpp"
#include "vortex/orchestrator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<std::string> backend;
  std::optional<double> lambda;
  std::optional<std::string> out;
  bool no_crn = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run config JSON")->required();
  cmd->add_option("--seed", flags.seed, "master seed override");
  cmd->add_option("--episodes", flags.episodes, "episode count override");
  cmd->add_option("--backend", flags.backend, "backend override")
      ->check(CLI::IsMember({"analytic", "scripted", "remote"}));
  cmd->add_option("--lambda", flags.lambda, "scalarization weight override");
  cmd->add_option("--out", flags.out, "output directory override");
  cmd->add_flag("--no-crn", flags.no_crn, "disable common random numbers");
}

vortex::RunConfig load_config(const CommonFlags& flags) {
  vortex::RunConfig cfg = vortex::RunConfig::load_file(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.episodes) cfg.episodes = *flags.episodes;
  if (flags.backend) cfg.backend.kind = *flags.backend;
  if (flags.lambda) cfg.backend.analytic.lambda = *flags.lambda;
  if (flags.out) cfg.out_dir = *flags.out;
  if (flags.no_crn) cfg.common_random_numbers = false;
  return cfg;
}

void print_run_summary(const vortex::RunResult& result) {
  const auto& last = result.episodes.back();
  std::cout << "episodes: " << result.episodes.size()
            << (result.early_stopped ? " (early stop)" : "") << "\n";
  std::cout << "final U=" << last.U << " C=" << last.C << "\n";
  for (const auto& e : last.coverage)
    std::cout << "  coverage " << e.dimension << "=" << e.level << ": "
              << e.value << "\n";
}

int cmd_run(const CommonFlags& flags) {
  vortex::RunConfig cfg = load_config(flags);
  vortex::RunResult result = vortex::run_vortex(cfg);
  print_run_summary(result);
  if (!cfg.out_dir.empty()) std::cout << "artifacts in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::vector<double>& lambdas) {
  vortex::RunConfig cfg = load_config(flags);
  vortex::SweepResult sweep = vortex::sweep_lambda(cfg, lambdas);
  for (const auto& e : sweep.entries) {
    if (e.ok)
      std::cout << "lambda=" << e.lambda << " U=" << e.U << " C=" << e.C << "\n";
    else
      std::cout << "lambda=" << e.lambda << " failed: " << e.error << "\n";
  }
  std::cout << "non-dominated points:\n";
  for (const auto& [u, c] : sweep.frontier)
    std::cout << "  U=" << u << " C=" << c << "\n";
  if (!cfg.out_dir.empty()) {
    std::ofstream out(fs::path(cfg.out_dir) / "sweep_pareto.csv");
    out << "lambda,U,C\n";
    for (const auto& e : sweep.entries)
      if (e.ok) out << e.lambda << "," << e.U << "," << e.C << "\n";
  }
  return 0;
}

int cmd_validate_env(const std::string& path) {
  vortex::Environment env = vortex::load_environment_file(path);
  std::cout << "N=" << env.N << ", B=" << env.B << ", T=" << env.T << ", "
            << env.num_classes() << " types, all rows valid\n";
  for (const auto& t : env.types)
    std::cout << "  type " << t.feature_class.id << ": "
              << t.feature_class.describe() << " (count " << t.count << ")\n";
  return 0;
}

int cmd_replay(const std::string& run_dir, const std::string& out_dir) {
  fs::path dir(run_dir);
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw vortex::IoError("no manifest.json in " + run_dir);
  json manifest;
  mf >> manifest;
  if (!manifest.contains("config"))
    throw vortex::ConfigError("manifest has no config block");
  vortex::RunConfig cfg = vortex::RunConfig::from_json(manifest["config"]);

  auto records = vortex::load_episodes((dir / "episodes.jsonl").string());
  if (records.empty()) throw vortex::Error("recorded run has no episodes");

  json script = json::array();
  for (const auto& rec : records) script.push_back(rec.shaping);
  fs::path script_path = fs::temp_directory_path() / "vortex_replay_script.json";
  {
    std::ofstream out(script_path);
    out << script.dump();
  }
  cfg.backend.kind = "scripted";
  cfg.backend.script_path = script_path.string();
  cfg.episodes = static_cast<int>(records.size());
  cfg.out_dir = out_dir;

  vortex::RunResult result = vortex::run_vortex(cfg);
  bool identical = result.episodes.size() == records.size();
  for (std::size_t i = 0; identical && i < records.size(); ++i)
    identical = result.episodes[i].to_json() == records[i].to_json();
  std::cout << "replayed " << result.episodes.size() << " episodes; records "
            << (identical ? "match" : "DIFFER") << "\n";
  return identical ? 0 : 1;
}

int cmd_pareto(const std::vector<std::string>& run_dirs, const std::string& out_csv) {
  std::vector<vortex::ParetoPoint> merged;
  for (const auto& dir : run_dirs) {
    auto records = vortex::load_episodes((fs::path(dir) / "episodes.jsonl").string());
    for (const auto& rec : records)
      merged.push_back({rec.U, rec.C, rec.k, dir});
  }
  if (merged.empty()) throw vortex::Error("no episodes found in the given runs");
  std::vector<bool> flags = vortex::dominated_flags(merged);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_csv.empty()) {
    file.open(out_csv);
    if (!file) throw vortex::IoError("cannot write " + out_csv);
    out = &file;
  }
  *out << "run,k,U,C,dominated\n";
  for (std::size_t i = 0; i < merged.size(); ++i)
    *out << merged[i].tag << "," << merged[i].episode << "," << merged[i].U
         << "," << merged[i].C << "," << (flags[i] ? 1 : 0) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vortex: budgeted allocation with preference-shaped rewards"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "execute one run from a config");
  add_common(run, run_flags);

  CommonFlags sweep_flags;
  std::vector<double> lambdas{0.1, 0.3, 0.5, 0.7, 0.9};
  CLI::App* sweep = app.add_subcommand("sweep", "run across lambda values");
  add_common(sweep, sweep_flags);
  sweep->add_option("--lambdas", lambdas, "lambda values")->delimiter(',');

  std::string env_path;
  CLI::App* validate = app.add_subcommand("validate-env", "load and report an environment spec");
  validate->add_option("spec", env_path, "environment spec JSON")->required();

  std::string replay_dir, replay_out;
  CLI::App* replay = app.add_subcommand("replay", "re-execute a recorded run");
  replay->add_option("run_dir", replay_dir, "directory with manifest.json and episodes.jsonl")
      ->required();
  replay->add_option("--out", replay_out, "output directory for the replay");

  std::vector<std::string> pareto_dirs;
  std::string pareto_out;
  CLI::App* pareto = app.add_subcommand("pareto", "merge run archives and filter");
  pareto->add_option("runs", pareto_dirs, "run directories")->required();
  pareto->add_option("--out", pareto_out, "merged CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, lambdas);
    if (validate->parsed()) return cmd_validate_env(env_path);
    if (replay->parsed()) return cmd_replay(replay_dir, replay_out);
    if (pareto->parsed()) return cmd_pareto(pareto_dirs, pareto_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
