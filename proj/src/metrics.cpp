#include "vortex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "vortex/errors.hpp"

namespace vortex {

std::string to_string(DivergenceKind kind) {
  return kind == DivergenceKind::kKL ? "kl" : "tv";
}

DivergenceKind divergence_from_string(const std::string& s) {
  if (s == "kl" || s == "KL") return DivergenceKind::kKL;
  if (s == "tv" || s == "TV") return DivergenceKind::kTV;
  throw ConfigError("unknown divergence kind: " + s);
}

PreferenceSpec compile_directive(const Environment& env,
                                 const std::string& dimension,
                                 const std::string& level, double rho,
                                 DivergenceKind kind) {
  if (!(rho > 0.0 && rho < 1.0))
    throw ConfigError("directive mass rho must be in (0,1)");
  bool dim_ok = false;
  for (const auto& dim : env.features) {
    if (dim.name != dimension) continue;
    dim_ok = true;
    if (std::find(dim.levels.begin(), dim.levels.end(), level) == dim.levels.end())
      throw ConfigError("feature " + dimension + " has no level '" + level + "'");
  }
  if (!dim_ok) throw ConfigError("environment has no feature '" + dimension + "'");

  int favored_pop = 0, other_pop = 0;
  std::vector<bool> favored(env.types.size(), false);
  for (std::size_t z = 0; z < env.types.size(); ++z) {
    for (const auto& [d, l] : env.types[z].feature_class.labels) {
      if (d == dimension && l == level) favored[z] = true;
    }
    (favored[z] ? favored_pop : other_pop) += env.types[z].count;
  }
  if (favored_pop == 0)
    throw ConfigError("no population has " + dimension + "=" + level);
  if (other_pop == 0)
    throw ConfigError("every arm has " + dimension + "=" + level +
                      "; directive is vacuous");

  PreferenceSpec pref;
  pref.directive_text = "favor " + dimension + "=" + level;
  pref.kind = kind;
  pref.focal_dimension = dimension;
  pref.focal_level = level;
  pref.rho = rho;
  pref.target.d.resize(env.types.size());
  for (std::size_t z = 0; z < env.types.size(); ++z) {
    double side_mass = favored[z] ? rho : 1.0 - rho;
    int side_pop = favored[z] ? favored_pop : other_pop;
    pref.target.d[z] = side_mass * env.types[z].count / side_pop;
  }
  return pref;
}

PreferenceSpec parse_directive(const Environment& env, const std::string& text,
                               double rho, DivergenceKind kind) {
  const std::string prefix = "favor ";
  if (text.rfind(prefix, 0) != 0)
    throw ConfigError("directive must look like 'favor <dimension>=<level>': " + text);
  std::string rest = text.substr(prefix.size());
  auto eq = rest.find('=');
  if (eq == std::string::npos)
    throw ConfigError("directive must look like 'favor <dimension>=<level>': " + text);
  return compile_directive(env, rest.substr(0, eq), rest.substr(eq + 1), rho, kind);
}

PreferenceSpec explicit_preference(const Environment& env,
                                   std::vector<double> target,
                                   DivergenceKind kind,
                                   const std::string& text) {
  if (static_cast<int>(target.size()) != env.num_classes())
    throw ConfigError("target distribution has " + std::to_string(target.size()) +
                      " entries; environment has " +
                      std::to_string(env.num_classes()) + " classes");
  double sum = 0.0;
  for (double v : target) {
    if (!(v >= 0.0)) throw ConfigError("target entries must be >= 0");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw ConfigError("target distribution must sum to 1");
  PreferenceSpec pref;
  pref.directive_text = text.empty() ? "explicit target" : text;
  pref.kind = kind;
  pref.target.d = std::move(target);
  return pref;
}

double coverage_value(const std::vector<CoverageEntry>& cov,
                      const std::string& dimension, const std::string& level) {
  for (const auto& e : cov)
    if (e.dimension == dimension && e.level == level) return e.value;
  throw Error("no coverage entry for " + dimension + "=" + level);
}

double utility(const Trajectory& traj) {
  if (traj.records.empty()) throw Error("utility of an empty trajectory");
  double u = 0.0;
  for (const auto& rec : traj.records)
    for (double r : rec.base_rewards) u += r;
  return u;
}

FeatureDistribution feature_distribution(const Trajectory& traj,
                                         const Environment& env) {
  FeatureDistribution out;
  out.d.assign(env.num_classes(), 0.0);
  int total = 0;
  for (const auto& rec : traj.records) {
    for (int arm : rec.actions) {
      out.d[env.class_of_arm(arm)] += 1.0;
      ++total;
    }
  }
  if (total == 0)
    throw Error("feature distribution undefined: trajectory has no pulls");
  for (double& v : out.d) v /= total;
  return out;
}

double divergence(const FeatureDistribution& d, const PreferenceSpec& pref) {
  if (d.size() != pref.target.size())
    throw Error("distribution/target dimension mismatch");
  double c = 0.0;
  if (pref.kind == DivergenceKind::kKL) {
    for (int z = 0; z < d.size(); ++z)
      c += d[z] * std::log((d[z] + kSmoothEps) / (pref.target[z] + kSmoothEps));
    // The shared smoothing can leave a ~1e-9 negative residue.
    c = std::max(c, 0.0);
  } else {
    for (int z = 0; z < d.size(); ++z) c += std::fabs(d[z] - pref.target[z]);
    c *= 0.5;
  }
  return c;
}

std::vector<CoverageEntry> coverage(const Trajectory& traj,
                                    const Environment& env) {
  std::vector<CoverageEntry> out;
  std::map<std::pair<std::string, std::string>, double> counts;
  int total = 0;
  for (const auto& rec : traj.records) {
    for (int arm : rec.actions) {
      for (const auto& lbl : env.type_of_arm(arm).feature_class.labels)
        counts[lbl] += 1.0;
      ++total;
    }
  }
  if (total == 0) throw Error("coverage undefined: trajectory has no pulls");
  for (const auto& dim : env.features)
    for (const auto& level : dim.levels)
      out.push_back({dim.name, level, counts[{dim.name, level}] / total});
  return out;
}

EpisodeMetrics compute_episode_metrics(const Trajectory& traj,
                                       const Environment& env,
                                       const PreferenceSpec& pref) {
  EpisodeMetrics m;
  m.U = utility(traj);
  m.D = feature_distribution(traj, env);
  m.C = divergence(m.D, pref);
  m.coverage = coverage(traj, env);
  return m;
}

bool dominates(double uq, double cq, double up, double cp) {
  return uq >= up && cq <= cp && (uq > up || cq < cp);
}

std::vector<std::pair<double, double>> pareto_filter(
    const std::vector<std::pair<double, double>>& points) {
  std::set<std::pair<double, double>> unique(points.begin(), points.end());
  std::vector<std::pair<double, double>> out;
  for (const auto& p : unique) {
    bool dominated = false;
    for (const auto& q : unique) {
      if (dominates(q.first, q.second, p.first, p.second)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) out.push_back(p);
  }
  return out;
}

std::vector<bool> dominated_flags(const std::vector<ParetoPoint>& points) {
  std::vector<bool> flags(points.size(), false);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = 0; j < points.size(); ++j)
      if (i != j && dominates(points[j].U, points[j].C, points[i].U, points[i].C)) {
        flags[i] = true;
        break;
      }
  return flags;
}

}  // namespace vortex
