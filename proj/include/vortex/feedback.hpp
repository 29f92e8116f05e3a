#pragma once

#include <string>
#include <vector>

#include "vortex/metrics.hpp"

namespace vortex {

// Inter-episode differences: current minus previous.
struct Deltas {
  double dU = 0.0;
  std::vector<double> dD;               // per class, sums to ~0
  std::vector<CoverageEntry> dCoverage; // per (dimension, level)
};

struct VerbalFeedback {
  std::string text;
  Deltas deltas;
  std::vector<int> increase_classes;  // most under-served, at most 3
  std::vector<int> decrease_classes;  // most over-served, at most 3
};

// Fixed task block plus an append-only list of feedback entries.
struct PromptState {
  std::string fixed;
  std::vector<std::string> editable;
};

// Sentence templates; {placeholders} are substituted verbatim. Kept in a
// resource file so experiments can vary phrasing without code changes.
struct FeedbackTemplate {
  std::string utility_line;
  std::string coverage_line;
  std::string no_change_line;
  std::string increase_line;
  std::string decrease_line;

  static FeedbackTemplate defaults();
  static FeedbackTemplate load_file(const std::string& path);
};

Deltas compare_metrics(const EpisodeMetrics& curr, const EpisodeMetrics& prev);

// Deterministic template fill: utility sentence ("slightly" below 5%
// relative change, "substantially" otherwise), coverage sentence, then up
// to 3 increase / 3 decrease directives ranked by |D(z) - target(z)|.
VerbalFeedback render_feedback(const Deltas& d, const PreferenceSpec& pref,
                               const EpisodeMetrics& curr,
                               const Environment& env,
                               const FeedbackTemplate& tpl = FeedbackTemplate::defaults());

// Appends to the editable block; the fixed block never changes.
PromptState update_prompt(const PromptState& p, const VerbalFeedback& fb);

// fixed block, then each editable entry under a "Reflection:" heading.
// history_cap > 0 keeps only that many recent entries and digests the rest.
std::string render_prompt(const PromptState& p, int history_cap = 0);

}  // namespace vortex
