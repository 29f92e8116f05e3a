#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vortex/env.hpp"

namespace vortex {

// Smoothing shared by divergence measurement and shaping so both sides see
// the same ratios.
inline constexpr double kSmoothEps = 1e-9;

enum class DivergenceKind { kKL, kTV };

std::string to_string(DivergenceKind kind);
DivergenceKind divergence_from_string(const std::string& s);

// Fraction of all pulls landing on each feature class.
struct FeatureDistribution {
  std::vector<double> d;

  int size() const { return static_cast<int>(d.size()); }
  double operator[](int z) const { return d[z]; }
};

struct PreferenceSpec {
  std::string directive_text;
  FeatureDistribution target;
  DivergenceKind kind = DivergenceKind::kKL;
  // Set when compiled from a "favor <dimension>=<level>" directive.
  std::string focal_dimension;
  std::string focal_level;
  double rho = 0.0;
};

// Compiles a qualitative directive into a target distribution: total mass
// rho on classes matching (dimension, level), the rest on the complement,
// split within each side proportionally to population composition.
PreferenceSpec compile_directive(const Environment& env,
                                 const std::string& dimension,
                                 const std::string& level, double rho,
                                 DivergenceKind kind);

// Accepts the textual form "favor <dimension>=<level>".
PreferenceSpec parse_directive(const Environment& env, const std::string& text,
                               double rho, DivergenceKind kind);

PreferenceSpec explicit_preference(const Environment& env,
                                   std::vector<double> target,
                                   DivergenceKind kind,
                                   const std::string& text = "");

struct CoverageEntry {
  std::string dimension;
  std::string level;
  double value = 0.0;
};

double coverage_value(const std::vector<CoverageEntry>& cov,
                      const std::string& dimension, const std::string& level);

struct EpisodeMetrics {
  double U = 0.0;             // cumulative base utility
  FeatureDistribution D;      // pull distribution over classes
  double C = 0.0;             // divergence from the preference target
  std::vector<CoverageEntry> coverage;
};

// Sum of realized base rewards over all arms and rounds (shaping excluded).
double utility(const Trajectory& traj);

// Pull counts per class normalized by total pulls; errors on zero pulls.
FeatureDistribution feature_distribution(const Trajectory& traj,
                                         const Environment& env);

// KL: sum_z d(z) ln((d(z)+eps)/(t(z)+eps)); TV: 0.5 sum_z |d(z)-t(z)|.
double divergence(const FeatureDistribution& d, const PreferenceSpec& pref);

// Per-dimension, per-level pull proportions; levels of a dimension sum to 1.
std::vector<CoverageEntry> coverage(const Trajectory& traj,
                                    const Environment& env);

EpisodeMetrics compute_episode_metrics(const Trajectory& traj,
                                       const Environment& env,
                                       const PreferenceSpec& pref);

struct ParetoPoint {
  double U = 0.0;
  double C = 0.0;
  int episode = -1;
  std::string tag;
};

// q dominates p when U_q >= U_p and C_q <= C_p with at least one strict.
bool dominates(double uq, double cq, double up, double cp);

// Non-dominated subset; exact duplicates retained once.
std::vector<std::pair<double, double>> pareto_filter(
    const std::vector<std::pair<double, double>>& points);

// Dominated flag per point (duplicates are not dominated by each other).
std::vector<bool> dominated_flags(const std::vector<ParetoPoint>& points);

}  // namespace vortex
