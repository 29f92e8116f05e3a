#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vortex/feedback.hpp"
#include "vortex/shaping.hpp"

namespace vortex {

struct EnvSummary {
  std::string name;
  int N = 0, B = 0, T = 0, Z = 0;
  std::vector<std::string> class_labels;
  std::vector<int> class_counts;

  static EnvSummary from(const Environment& env);
};

struct ShaperContext {
  int k = 0;  // episode index; metrics_history has k entries
  const PromptState& prompt;
  const std::vector<EpisodeMetrics>& metrics_history;
  const PreferenceSpec& pref;
  EnvSummary env;
};

struct ShaperOutput {
  ShapingReward shaping;
  std::string rationale;
  std::string backend;
};

class Shaper {
 public:
  virtual ~Shaper() = default;
  virtual ShaperOutput propose(const ShaperContext& ctx) = 0;
  virtual std::string name() const = 0;
};

// Shared gate: every vector handed to the solver is finite, complete over
// classes, and within [-r_max, r_max]. clamp_out_of_range selects between
// clamping with a warning and rejecting.
ShapingReward validate_shaping(const std::vector<double>& values, int num_classes,
                               double r_max, bool clamp_out_of_range,
                               std::vector<std::string>* warnings = nullptr);

enum class AnalyticMode {
  kFixedPoint,  // move toward the preference-aligned shaping direction
  kRawSa,       // ascend the scalarized-return gradient estimate directly
};

struct AnalyticConfig {
  double lambda = 0.5;
  double eta0 = 0.5;
  double gain = 1.0;
  double r_max = 1.0;
  DivergenceKind kind = DivergenceKind::kKL;
  AnalyticMode mode = AnalyticMode::kFixedPoint;
};

// Deterministic shaper: cold start at zero, then one damped update per
// episode from the latest measured feature distribution,
// R_{k+1} = clamp(R_k + eta_k * g_k). At lambda = 1 proposals stay exactly
// zero in fixed-point mode.
class AnalyticShaper : public Shaper {
 public:
  AnalyticShaper(AnalyticConfig cfg, int num_classes, int B, int T);
  ShaperOutput propose(const ShaperContext& ctx) override;
  std::string name() const override { return "analytic"; }

  const std::vector<double>& last_gradient() const { return last_gradient_; }
  const ShapingReward& current() const { return state_; }

 private:
  ScalarizationConfig scal_;
  AnalyticMode mode_;
  ShapingReward state_;
  std::vector<double> last_gradient_;
  std::vector<double> mean_d_;
  int observations_ = 0;
};

// Replays a fixed list of shaping vectors; vector k for episode k.
class ScriptedShaper : public Shaper {
 public:
  ScriptedShaper(std::vector<std::vector<double>> vectors, double r_max);
  static ScriptedShaper from_file(const std::string& path, double r_max);
  ShaperOutput propose(const ShaperContext& ctx) override;
  std::string name() const override { return "scripted"; }

 private:
  std::vector<std::vector<double>> vectors_;
  double r_max_;
};

struct RemoteConfig {
  std::string endpoint;  // http(s)://host[:port]/path
  std::string model;
  double temperature = 0.0;
  std::string api_key_env = "VORTEX_LLM_API_KEY";
  double r_max = 1.0;
  int max_retries = 3;
  int backoff_ms = 250;
  int timeout_s = 60;
  int prompt_history_cap = 0;
};

// One chat-style completion per proposal. The reply must contain a JSON
// object mapping class id to reward; the first top-level object found in
// the completion text is used. Transport failures retry with exponential
// backoff; a parse failure triggers one re-ask with a format reminder.
class RemoteShaper : public Shaper {
 public:
  explicit RemoteShaper(RemoteConfig cfg);
  ShaperOutput propose(const ShaperContext& ctx) override;
  std::string name() const override { return "remote"; }

 private:
  std::string complete(const std::string& prompt_text);
  RemoteConfig cfg_;
};

// First balanced {...} block in free text; ProposalError(kParse) if none.
std::string extract_first_json_object(const std::string& text);

// Parses {"0": r0, "1": r1, ...}; every class must be present.
std::vector<double> parse_reward_object(const std::string& json_text,
                                        int num_classes);

}  // namespace vortex
