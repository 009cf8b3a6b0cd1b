#pragma once

// Iterative actor-critic inference: the actor answers, the critic scores and
// critiques, and the actor refines until the score clears the threshold or
// the round cap is hit. Plus the batch harness that reports per-iteration
// accuracy and how many answers still needed refinement.

#include <optional>
#include <string>
#include <vector>

#include "treecrit/gateway.hpp"
#include "treecrit/types.hpp"

#include <json.hpp>

namespace treecrit {

enum class StopReason { score_exceeded, max_iters, error };

const char* to_string(StopReason reason);

struct RefinementRound {
  ReasoningPath answer;   // the answer evaluated this round
  CriticVerdict verdict;  // the critic's reply to it

  friend bool operator==(const RefinementRound&, const RefinementRound&) = default;
};

struct RefinementTrace {
  std::string question_id;
  std::vector<RefinementRound> rounds;  // empty only when stop_reason == error
  StopReason stop_reason = StopReason::error;
  std::optional<std::string> final_answer;

  friend bool operator==(const RefinementTrace&, const RefinementTrace&) = default;
};

NLOHMANN_JSON_SERIALIZE_ENUM(StopReason, {
                                             {StopReason::score_exceeded, "score_exceeded"},
                                             {StopReason::max_iters, "max_iters"},
                                             {StopReason::error, "error"},
                                         })

void to_json(nlohmann::json& j, const RefinementRound& r);
void from_json(const nlohmann::json& j, RefinementRound& r);
void to_json(nlohmann::json& j, const RefinementTrace& t);
void from_json(const nlohmann::json& j, RefinementTrace& t);

// One critic call per round; a refine call only when the score fails and
// another round remains. Backend failures end the trace with stop_reason =
// error and the best answer generated so far.
RefinementTrace run_refinement(const Question& question, TextBackend& backend,
                               const SearchConfig& config);

struct IterationRow {
  int iter = 0;          // refinement opportunities consumed (0 = bare actor)
  double accuracy = 0.0; // over non-error questions
  int n_refine = 0;      // verdicts at critic round `iter` that demanded refinement
};

struct EvalReport {
  std::vector<IterationRow> rows;  // iter = 0..max_refine_iters
  int questions = 0;
  int errors = 0;
};

void to_json(nlohmann::json& j, const EvalReport& r);

struct BatchEvalResult {
  std::vector<RefinementTrace> traces;  // input order
  EvalReport report;
};

BatchEvalResult batch_eval(const std::vector<Question>& questions, TextBackend& backend,
                           const Grader& grader, const SearchConfig& config, int parallelism);

// Human-readable per-iteration table (both index conventions labeled).
std::string format_report(const EvalReport& report);

}  // namespace treecrit
