#include "vortex/shaping.hpp"

#include <algorithm>
#include <cmath>

#include "vortex/errors.hpp"

namespace vortex {

double ShapingReward::max_abs() const {
  double m = 0.0;
  for (double v : bonus) m = std::max(m, std::fabs(v));
  return m;
}

double clamp_to(double v, double r_max) {
  return std::clamp(v, -r_max, r_max);
}

double scalarized_objective(double U, double C, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw Error("lambda must be in [0,1]");
  return lambda * U - (1.0 - lambda) * C;
}

double divergence_partial(const FeatureDistribution& d,
                          const PreferenceSpec& pref, int z) {
  if (z < 0 || z >= d.size() || d.size() != pref.target.size())
    throw Error("divergence_partial: invalid class index");
  double t = (d[z] + kSmoothEps) / (pref.target[z] + kSmoothEps);
  if (pref.kind == DivergenceKind::kKL) return std::log(t) + 1.0;
  if (t > 1.0) return 0.5;
  if (t < 1.0) return -0.5;
  return 0.0;
}

ShapingReward analytic_shaping(const FeatureDistribution& d,
                               const PreferenceSpec& pref,
                               const ScalarizationConfig& cfg) {
  if (!(cfg.lambda > 0.0 && cfg.lambda <= 1.0))
    throw Error("analytic shaping needs lambda in (0,1]; use a small lambda "
                "for preference-only behavior");
  ShapingReward out = ShapingReward::zeros(d.size());
  double scale = -(1.0 - cfg.lambda) /
                 (cfg.lambda * static_cast<double>(cfg.B) * cfg.T);
  for (int z = 0; z < d.size(); ++z)
    out.bonus[z] = clamp_to(scale * divergence_partial(d, pref, z), cfg.r_max);
  return out;
}

std::vector<double> shaping_direction(const FeatureDistribution& d,
                                      const PreferenceSpec& pref,
                                      const ScalarizationConfig& cfg) {
  if (!(cfg.lambda > 0.0 && cfg.lambda <= 1.0))
    throw Error("shaping direction needs lambda in (0,1]");
  double scale = -cfg.gain * (1.0 - cfg.lambda) / cfg.lambda;
  std::vector<double> out(d.size());
  for (int z = 0; z < d.size(); ++z)
    out[z] = scale * divergence_partial(d, pref, z);
  return out;
}

GradientEstimate gradient_estimate(const EpisodeMetrics& metrics,
                                   const PreferenceSpec& pref,
                                   const ScalarizationConfig& cfg) {
  GradientEstimate out;
  const FeatureDistribution& d = metrics.D;
  out.g.resize(d.size());
  double bt = static_cast<double>(cfg.B) * cfg.T;
  for (int z = 0; z < d.size(); ++z)
    out.g[z] = cfg.lambda * bt * d[z] -
               (1.0 - cfg.lambda) * divergence_partial(d, pref, z);
  return out;
}

ShapingReward sa_update(const ShapingReward& r, const GradientEstimate& g,
                        int k, const ScalarizationConfig& cfg) {
  if (k < 1) throw Error("sa_update: episode index must be >= 1");
  if (r.size() != static_cast<int>(g.g.size()))
    throw Error("sa_update: dimension mismatch");
  double eta = cfg.eta0 / k;
  ShapingReward out = r;
  for (int z = 0; z < r.size(); ++z)
    out.bonus[z] = clamp_to(r[z] + eta * g.g[z], cfg.r_max);
  return out;
}

}  // namespace vortex
