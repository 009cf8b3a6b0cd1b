#pragma once

// Refinement-based filtering of mined critiques: a negative sample survives
// only if its critique actually helps the actor fix the answer often enough.

#include <utility>
#include <vector>

#include "treecrit/gateway.hpp"
#include "treecrit/types.hpp"

#include <json.hpp>

namespace treecrit {

enum class FilterDecision { keep, discard, undetermined };

const char* to_string(FilterDecision decision);

struct FilterOutcome {
  FilterDecision decision = FilterDecision::discard;
  FilterStats stats;
};

// The decision rule, kept pure for direct verification.
inline bool keep_decision(int successes, int keep_threshold) {
  return successes >= keep_threshold;
}

// Runs config.refine_attempts refinements of (question, answer, critique),
// grades each, and keeps the sample iff successes >= config.keep_threshold.
// Transport-failed attempts count as unsuccessful; if every attempt fails on
// transport the sample is undetermined (excluded, reported separately).
FilterOutcome filter_sample(const CritiqueSample& sample, TextBackend& backend,
                            const Grader& grader, const SearchConfig& config);

struct FilterReport {
  int input_records = 0;
  int positives = 0;
  int kept_negatives = 0;
  int discarded = 0;
  int undetermined = 0;
  std::vector<int> success_histogram;  // index = successes over determined negatives
  std::vector<int> malformed_lines;    // 1-based line numbers skipped by the reader
};

void to_json(nlohmann::json& j, const FilterReport& r);

struct FilterResult {
  std::vector<CritiqueSample> samples;  // input order: positives untouched, kept negatives
  FilterReport report;
};

FilterResult filter_dataset(const std::vector<CritiqueSample>& samples, TextBackend& backend,
                            const Grader& grader, const SearchConfig& config, int parallelism);

}  // namespace treecrit
