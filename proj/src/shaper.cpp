#include "vortex/shaper.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vortex/errors.hpp"

namespace vortex {

using nlohmann::json;

EnvSummary EnvSummary::from(const Environment& env) {
  EnvSummary s;
  s.name = env.name;
  s.N = env.N;
  s.B = env.B;
  s.T = env.T;
  s.Z = env.num_classes();
  for (const auto& t : env.types) {
    s.class_labels.push_back(t.feature_class.describe());
    s.class_counts.push_back(t.count);
  }
  return s;
}

ShapingReward validate_shaping(const std::vector<double>& values, int num_classes,
                               double r_max, bool clamp_out_of_range,
                               std::vector<std::string>* warnings) {
  if (static_cast<int>(values.size()) != num_classes)
    throw ProposalError(ProposalFailure::kIncomplete,
                        "proposal covers " + std::to_string(values.size()) +
                            " classes, expected " + std::to_string(num_classes));
  ShapingReward out;
  out.bonus = values;
  for (int z = 0; z < num_classes; ++z) {
    double v = out.bonus[z];
    if (!std::isfinite(v))
      throw ProposalError(ProposalFailure::kInvalid,
                          "non-finite shaping value for class " + std::to_string(z));
    if (std::fabs(v) > r_max) {
      if (!clamp_out_of_range)
        throw ProposalError(ProposalFailure::kOutOfRange,
                            "shaping value " + std::to_string(v) + " for class " +
                                std::to_string(z) + " exceeds the clamp " +
                                std::to_string(r_max));
      out.bonus[z] = clamp_to(v, r_max);
      if (warnings) {
        std::ostringstream oss;
        oss << "class " << z << ": value " << v << " clamped to " << out.bonus[z];
        warnings->push_back(oss.str());
      }
    }
  }
  return out;
}

AnalyticShaper::AnalyticShaper(AnalyticConfig cfg, int num_classes, int B, int T)
    : mode_(cfg.mode), state_(ShapingReward::zeros(num_classes)) {
  if (!(cfg.lambda > 0.0 && cfg.lambda <= 1.0))
    throw ConfigError("analytic backend needs lambda in (0,1]");
  if (!(cfg.eta0 >= 0.0)) throw ConfigError("eta0 must be >= 0");
  scal_.lambda = cfg.lambda;
  scal_.kind = cfg.kind;
  scal_.B = B;
  scal_.T = T;
  scal_.eta0 = cfg.eta0;
  scal_.r_max = cfg.r_max;
  scal_.gain = cfg.gain;
}

ShaperOutput AnalyticShaper::propose(const ShaperContext& ctx) {
  ShaperOutput out;
  out.backend = name();
  if (ctx.k == 0) {
    // Cold start: no observed distribution yet, keep the base policy intact.
    state_ = ShapingReward::zeros(state_.size());
    last_gradient_.assign(state_.size(), 0.0);
    mean_d_.clear();
    observations_ = 0;
    out.shaping = state_;
    out.rationale = "cold start, zero shaping";
    return out;
  }
  if (ctx.metrics_history.empty())
    throw ProposalError(ProposalFailure::kInvalid,
                        "analytic proposal at k>=1 needs metrics history");

  const EpisodeMetrics& latest = ctx.metrics_history.back();
  if (mode_ == AnalyticMode::kFixedPoint) {
    // Chase the shaping implied by the running average of observed pull
    // distributions, bounded to the representable range. Both dampers
    // matter: the raw latest-episode distribution flips whole arm blocks
    // and the smoothed f' blows up on starved classes, so an undamped
    // residual slams the loop between allocation extremes.
    if (mean_d_.empty()) mean_d_.assign(latest.D.size(), 0.0);
    ++observations_;
    for (int z = 0; z < latest.D.size(); ++z)
      mean_d_[z] += (latest.D[z] - mean_d_[z]) / observations_;
    std::vector<double> target =
        shaping_direction(FeatureDistribution{mean_d_}, ctx.pref, scal_);
    last_gradient_.resize(target.size());
    for (std::size_t z = 0; z < target.size(); ++z)
      last_gradient_[z] = clamp_to(target[z], scal_.r_max) - state_.bonus[z];
  } else {
    last_gradient_ = gradient_estimate(latest, ctx.pref, scal_).g;
  }
  state_ = sa_update(state_, GradientEstimate{last_gradient_}, ctx.k, scal_);
  out.shaping = state_;
  std::ostringstream oss;
  oss << "eta=" << scal_.eta0 / ctx.k << " gradient=[";
  for (std::size_t z = 0; z < last_gradient_.size(); ++z)
    oss << (z ? "," : "") << last_gradient_[z];
  oss << "]";
  out.rationale = oss.str();
  return out;
}

ScriptedShaper::ScriptedShaper(std::vector<std::vector<double>> vectors,
                               double r_max)
    : vectors_(std::move(vectors)), r_max_(r_max) {}

ScriptedShaper ScriptedShaper::from_file(const std::string& path, double r_max) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open shaping script: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("shaping script is not valid JSON: ") + e.what());
  }
  const json* arr = nullptr;
  if (doc.is_array()) arr = &doc;
  else if (doc.contains("vectors") && doc["vectors"].is_array()) arr = &doc["vectors"];
  else throw ConfigError("shaping script must be an array of vectors "
                         "or {\"vectors\": [...]}");
  std::vector<std::vector<double>> vectors;
  for (const auto& jv : *arr) {
    if (!jv.is_array())
      throw ConfigError("each script entry must be an array of numbers");
    vectors.push_back(jv.get<std::vector<double>>());
  }
  return ScriptedShaper(std::move(vectors), r_max);
}

ShaperOutput ScriptedShaper::propose(const ShaperContext& ctx) {
  if (ctx.k >= static_cast<int>(vectors_.size()))
    throw ProposalError(ProposalFailure::kExhausted,
                        "script has " + std::to_string(vectors_.size()) +
                            " vectors; episode " + std::to_string(ctx.k) +
                            " requested");
  ShaperOutput out;
  out.backend = name();
  out.shaping = validate_shaping(vectors_[ctx.k], ctx.env.Z, r_max_,
                                 /*clamp_out_of_range=*/false);
  out.rationale = "scripted vector " + std::to_string(ctx.k);
  return out;
}

std::string extract_first_json_object(const std::string& text) {
  std::size_t start = text.find('{');
  while (start != std::string::npos) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}') {
        if (--depth == 0) return text.substr(start, i - start + 1);
      }
    }
    start = text.find('{', start + 1);
  }
  throw ProposalError(ProposalFailure::kParse,
                      "no JSON object found in completion text");
}

std::vector<double> parse_reward_object(const std::string& json_text,
                                        int num_classes) {
  json obj;
  try {
    obj = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ProposalError(ProposalFailure::kParse,
                        std::string("reward object is not valid JSON: ") + e.what());
  }
  if (!obj.is_object())
    throw ProposalError(ProposalFailure::kParse, "reward payload is not an object");
  std::vector<double> values(num_classes);
  std::vector<bool> seen(num_classes, false);
  for (const auto& [key, val] : obj.items()) {
    int z;
    try {
      z = std::stoi(key);
    } catch (...) {
      throw ProposalError(ProposalFailure::kParse,
                          "reward object key '" + key + "' is not a class id");
    }
    if (z < 0 || z >= num_classes)
      throw ProposalError(ProposalFailure::kParse,
                          "reward object names unknown class " + key);
    if (!val.is_number())
      throw ProposalError(ProposalFailure::kParse,
                          "reward for class " + key + " is not a number");
    values[z] = val.get<double>();
    seen[z] = true;
  }
  for (int z = 0; z < num_classes; ++z)
    if (!seen[z])
      throw ProposalError(ProposalFailure::kIncomplete,
                          "reward object missing class " + std::to_string(z));
  return values;
}

}  // namespace vortex
