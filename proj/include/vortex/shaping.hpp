#pragma once

#include <vector>

#include "vortex/metrics.hpp"

namespace vortex {

// Per-feature-class bonus added to an arm's reward when it is acted on.
struct ShapingReward {
  std::vector<double> bonus;

  static ShapingReward zeros(int num_classes) {
    return ShapingReward{std::vector<double>(num_classes, 0.0)};
  }
  int size() const { return static_cast<int>(bonus.size()); }
  double operator[](int z) const { return bonus[z]; }
  double max_abs() const;
};

struct ScalarizationConfig {
  double lambda = 0.5;       // weight on utility in (0, 1]
  DivergenceKind kind = DivergenceKind::kKL;
  int B = 1;
  int T = 1;
  double eta0 = 0.5;         // base step size, eta_k = eta0 / k
  double r_max = 1.0;        // per-class clamp on shaping values
  double gain = 1.0;         // proportionality constant of the shaping direction
};

// lambda * U - (1 - lambda) * C.
double scalarized_objective(double U, double C, double lambda);

// f'( (d(z)+eps) / (target(z)+eps) ): KL -> ln t + 1; TV -> 0.5 sign(t-1),
// 0 at the kink.
double divergence_partial(const FeatureDistribution& d,
                          const PreferenceSpec& pref, int z);

// Closed-form shaping -(1-lambda)/(lambda B T) * f'(ratio), clamped to
// [-r_max, r_max]. Zero exactly at lambda = 1.
ShapingReward analytic_shaping(const FeatureDistribution& d,
                               const PreferenceSpec& pref,
                               const ScalarizationConfig& cfg);

// Same shaping form without the 1/(BT) damping and scaled by cfg.gain:
// -gain * (1-lambda)/lambda * f'(ratio), unclamped. This is the magnitude
// that actually competes with index gaps at production population sizes.
std::vector<double> shaping_direction(const FeatureDistribution& d,
                                      const PreferenceSpec& pref,
                                      const ScalarizationConfig& cfg);

struct GradientEstimate {
  std::vector<double> g;
};

// Scalarized composite: lambda * BT * D(z) (visitation ascent term) minus
// (1-lambda) * f'(ratio) (preference term).
GradientEstimate gradient_estimate(const EpisodeMetrics& metrics,
                                   const PreferenceSpec& pref,
                                   const ScalarizationConfig& cfg);

// R + eta_k * g with eta_k = eta0 / k, clamped entrywise to [-r_max, r_max].
ShapingReward sa_update(const ShapingReward& r, const GradientEstimate& g,
                        int k, const ScalarizationConfig& cfg);

double clamp_to(double v, double r_max);

}  // namespace vortex
