#include "vortex/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vortex/errors.hpp"

namespace vortex {

namespace {

std::string format_signed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%+.*f", decimals, v);
  return buf;
}

void replace_all(std::string& text, const std::string& key,
                 const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
}

}  // namespace

FeedbackTemplate FeedbackTemplate::defaults() {
  FeedbackTemplate t;
  t.utility_line =
      "Compared to the previous round, reward {direction} {qualifier} ({du}).";
  t.coverage_line = "Coverage for {group} changed by {dcov}, now at {cov}.";
  t.no_change_line =
      "No change needed: the allocation matches the preferred distribution.";
  t.increase_line = "Increase shaping reward for {class}.";
  t.decrease_line = "Decrease shaping reward for {class}.";
  return t;
}

FeedbackTemplate FeedbackTemplate::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feedback template: " + path);
  FeedbackTemplate t = defaults();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "utility_line") t.utility_line = value;
    else if (key == "coverage_line") t.coverage_line = value;
    else if (key == "no_change_line") t.no_change_line = value;
    else if (key == "increase_line") t.increase_line = value;
    else if (key == "decrease_line") t.decrease_line = value;
    else throw ConfigError("unknown feedback template key: " + key);
  }
  return t;
}

Deltas compare_metrics(const EpisodeMetrics& curr, const EpisodeMetrics& prev) {
  if (curr.D.size() != prev.D.size())
    throw Error("cannot compare metrics with different class counts");
  if (curr.coverage.size() != prev.coverage.size())
    throw Error("cannot compare metrics with different coverage layouts");
  Deltas d;
  d.dU = curr.U - prev.U;
  d.dD.resize(curr.D.size());
  for (int z = 0; z < curr.D.size(); ++z) d.dD[z] = curr.D[z] - prev.D[z];
  d.dCoverage = curr.coverage;
  for (std::size_t i = 0; i < d.dCoverage.size(); ++i) {
    const auto& p = prev.coverage[i];
    if (p.dimension != d.dCoverage[i].dimension || p.level != d.dCoverage[i].level)
      throw Error("coverage layouts disagree");
    d.dCoverage[i].value -= p.value;
  }
  return d;
}

VerbalFeedback render_feedback(const Deltas& d, const PreferenceSpec& pref,
                               const EpisodeMetrics& curr,
                               const Environment& env,
                               const FeedbackTemplate& tpl) {
  VerbalFeedback fb;
  fb.deltas = d;

  double prev_u = curr.U - d.dU;
  double rel = std::fabs(d.dU) / std::max(std::fabs(prev_u), 1.0);
  std::string direction =
      d.dU < 0 ? "decreased" : (d.dU > 0 ? "increased" : "was unchanged");
  std::string qualifier = rel < 0.05 ? "slightly" : "substantially";

  std::ostringstream text;
  {
    std::string line = tpl.utility_line;
    replace_all(line, "{direction}", direction);
    replace_all(line, "{qualifier}", qualifier);
    replace_all(line, "{du}", format_signed(d.dU, 1));
    text << line;
  }

  // Coverage sentence for the directive's focal side when known, otherwise
  // for the level that moved the most.
  const CoverageEntry* focus = nullptr;
  for (const auto& e : d.dCoverage) {
    if (!pref.focal_dimension.empty()) {
      if (e.dimension == pref.focal_dimension && e.level == pref.focal_level)
        focus = &e;
    } else if (!focus || std::fabs(e.value) > std::fabs(focus->value)) {
      focus = &e;
    }
  }
  if (focus) {
    std::string line = tpl.coverage_line;
    replace_all(line, "{group}", focus->dimension + "=" + focus->level);
    replace_all(line, "{dcov}", format_signed(focus->value * 100.0, 1) + "%");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f%%",
                  coverage_value(curr.coverage, focus->dimension, focus->level) * 100.0);
    replace_all(line, "{cov}", buf);
    text << " " << line;
  }

  // Rank classes by absolute deviation from the target.
  std::vector<int> order(curr.D.size());
  std::iota(order.begin(), order.end(), 0);
  auto dev = [&](int z) { return curr.D[z] - pref.target[z]; };
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double da = std::fabs(dev(a)), db = std::fabs(dev(b));
    if (da != db) return da > db;
    return a < b;
  });
  constexpr double kDeadband = 1e-9;
  for (int z : order) {
    if (dev(z) < -kDeadband && fb.increase_classes.size() < 3)
      fb.increase_classes.push_back(z);
    if (dev(z) > kDeadband && fb.decrease_classes.size() < 3)
      fb.decrease_classes.push_back(z);
  }

  if (fb.increase_classes.empty() && fb.decrease_classes.empty()) {
    text << " " << tpl.no_change_line;
  } else {
    text << " To further improve alignment:";
    int item = 0;
    for (int z : fb.increase_classes) {
      std::string line = tpl.increase_line;
      replace_all(line, "{class}", env.types[z].feature_class.describe());
      text << " (" << ++item << ") " << line;
    }
    for (int z : fb.decrease_classes) {
      std::string line = tpl.decrease_line;
      replace_all(line, "{class}", env.types[z].feature_class.describe());
      text << " (" << ++item << ") " << line;
    }
  }

  fb.text = text.str();
  return fb;
}

PromptState update_prompt(const PromptState& p, const VerbalFeedback& fb) {
  PromptState next = p;
  next.editable.push_back(fb.text);
  return next;
}

std::string render_prompt(const PromptState& p, int history_cap) {
  std::ostringstream out;
  out << p.fixed << "\n\nReflection:\n";
  if (p.editable.empty()) {
    out << "(no prior episodes)\n";
    return out.str();
  }
  std::size_t first = 0;
  if (history_cap > 0 && p.editable.size() > static_cast<std::size_t>(history_cap)) {
    first = p.editable.size() - history_cap;
    out << "[" << first << " earlier reflections elided]\n";
  }
  for (std::size_t i = first; i < p.editable.size(); ++i)
    out << "- " << p.editable[i] << "\n";
  return out.str();
}

}  // namespace vortex
