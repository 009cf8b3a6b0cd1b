#include "treecrit/filter.hpp"

#include <iostream>
#include <stdexcept>

#include "treecrit/parallel.hpp"

namespace treecrit {

const char* to_string(FilterDecision decision) {
  switch (decision) {
    case FilterDecision::keep: return "keep";
    case FilterDecision::discard: return "discard";
    case FilterDecision::undetermined: return "undetermined";
  }
  return "discard";
}

FilterOutcome filter_sample(const CritiqueSample& sample, TextBackend& backend,
                            const Grader& grader, const SearchConfig& config) {
  if (sample.provenance != Provenance::negative_mined || sample.correctness != 0)
    throw std::invalid_argument("filter_sample expects a negative mined sample");

  int successes = 0;
  int transport_failures = 0;
  for (int attempt = 0; attempt < config.refine_attempts; ++attempt) {
    ReasoningPath refined;
    try {
      refined = backend.refine(sample.question, sample.answer_path, sample.critique,
                               static_cast<std::uint64_t>(attempt));
    } catch (const TransportError& e) {
      ++transport_failures;
      std::cerr << "[filter] refine attempt " << attempt << " failed for "
                << sample.question.id << ": " << e.what() << '\n';
      continue;
    }
    if (refined.final_answer && grader.grade(*refined.final_answer, sample.question.ground_truth))
      ++successes;
  }

  FilterOutcome outcome;
  outcome.stats = FilterStats{successes, config.refine_attempts};
  if (transport_failures == config.refine_attempts) {
    outcome.decision = FilterDecision::undetermined;
  } else {
    outcome.decision = keep_decision(successes, config.keep_threshold) ? FilterDecision::keep
                                                                       : FilterDecision::discard;
  }
  return outcome;
}

void to_json(nlohmann::json& j, const FilterReport& r) {
  j = nlohmann::json{{"input_records", r.input_records},
                     {"positives", r.positives},
                     {"kept_negatives", r.kept_negatives},
                     {"discarded", r.discarded},
                     {"undetermined", r.undetermined},
                     {"success_histogram", r.success_histogram},
                     {"malformed_lines", r.malformed_lines}};
}

FilterResult filter_dataset(const std::vector<CritiqueSample>& samples, TextBackend& backend,
                            const Grader& grader, const SearchConfig& config, int parallelism) {
  FilterResult result;
  result.report.input_records = static_cast<int>(samples.size());
  result.report.success_histogram.assign(static_cast<std::size_t>(config.refine_attempts) + 1, 0);

  struct Slot {
    bool is_positive = false;
    FilterOutcome outcome;
  };
  std::vector<Slot> slots = parallel_map(samples, parallelism, [&](const CritiqueSample& s, std::size_t) {
    Slot slot;
    if (s.provenance == Provenance::positive) {
      slot.is_positive = true;
      return slot;
    }
    slot.outcome = filter_sample(s, backend, grader, config);
    return slot;
  });

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Slot& slot = slots[i];
    if (slot.is_positive) {
      result.report.positives += 1;
      result.samples.push_back(samples[i]);  // positives are never filtered
      continue;
    }
    const FilterOutcome& outcome = slot.outcome;
    switch (outcome.decision) {
      case FilterDecision::keep: {
        result.report.kept_negatives += 1;
        result.report.success_histogram[static_cast<std::size_t>(outcome.stats.successes)] += 1;
        CritiqueSample kept = samples[i];
        kept.filter_stats = outcome.stats;
        result.samples.push_back(std::move(kept));
        break;
      }
      case FilterDecision::discard:
        result.report.discarded += 1;
        result.report.success_histogram[static_cast<std::size_t>(outcome.stats.successes)] += 1;
        break;
      case FilterDecision::undetermined:
        result.report.undetermined += 1;
        break;
    }
  }
  return result;
}

}  // namespace treecrit
