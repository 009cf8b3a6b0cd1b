#include "treecrit/refine.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>

#include "treecrit/parallel.hpp"

namespace treecrit {

using nlohmann::json;

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::score_exceeded: return "score_exceeded";
    case StopReason::max_iters: return "max_iters";
    case StopReason::error: return "error";
  }
  return "error";
}

void to_json(json& j, const RefinementRound& r) {
  j = json{{"answer", r.answer}, {"verdict", r.verdict}};
}

void from_json(const json& j, RefinementRound& r) {
  j.at("answer").get_to(r.answer);
  j.at("verdict").get_to(r.verdict);
}

void to_json(json& j, const RefinementTrace& t) {
  j = json{{"question_id", t.question_id},
           {"rounds", t.rounds},
           {"stop_reason", t.stop_reason},
           {"final_answer", t.final_answer ? json(*t.final_answer) : json(nullptr)}};
}

void from_json(const json& j, RefinementTrace& t) {
  j.at("question_id").get_to(t.question_id);
  j.at("rounds").get_to(t.rounds);
  j.at("stop_reason").get_to(t.stop_reason);
  t.final_answer.reset();
  if (!j.at("final_answer").is_null()) t.final_answer = j.at("final_answer").get<std::string>();
}

RefinementTrace run_refinement(const Question& question, TextBackend& backend,
                               const SearchConfig& config) {
  RefinementTrace trace;
  trace.question_id = question.id;

  ReasoningPath answer;
  try {
    answer = backend.rollout(question, {}, config.max_path_tokens, 0);
    answer.source = PathSource::actor_direct;
  } catch (const GatewayError& e) {
    std::cerr << "[infer] actor failed for " << question.id << ": " << e.what() << '\n';
    trace.stop_reason = StopReason::error;
    return trace;
  }

  for (int t = 1; t <= config.max_refine_iters; ++t) {
    CriticVerdict verdict;
    try {
      verdict = backend.critique(question, answer);
    } catch (const GatewayError& e) {
      std::cerr << "[infer] critic failed for " << question.id << " at round " << t << ": "
                << e.what() << '\n';
      trace.stop_reason = StopReason::error;
      trace.final_answer = answer.final_answer;
      return trace;
    }
    trace.rounds.push_back(RefinementRound{answer, verdict});

    if (verdict.score > config.score_threshold) {
      trace.stop_reason = StopReason::score_exceeded;
      break;
    }
    if (t == config.max_refine_iters) {
      trace.stop_reason = StopReason::max_iters;
      break;
    }
    try {
      ReasoningPath next =
          backend.refine(question, answer, verdict.critique, static_cast<std::uint64_t>(t - 1));
      next.source = PathSource::refined;
      answer = std::move(next);
    } catch (const GatewayError& e) {
      std::cerr << "[infer] refine failed for " << question.id << " at round " << t << ": "
                << e.what() << '\n';
      trace.stop_reason = StopReason::error;
      trace.final_answer = answer.final_answer;
      return trace;
    }
  }

  trace.final_answer = trace.rounds.back().answer.final_answer;
  return trace;
}

void to_json(json& j, const EvalReport& r) {
  json rows = json::array();
  for (const IterationRow& row : r.rows) {
    rows.push_back(json{{"iter", row.iter},
                        {"critic_round", row.iter >= 1 ? json(row.iter) : json(nullptr)},
                        {"accuracy", row.accuracy},
                        {"n_refine", row.iter >= 1 ? json(row.n_refine) : json(nullptr)}});
  }
  j = json{{"questions", r.questions}, {"errors", r.errors}, {"rows", rows}};
}

BatchEvalResult batch_eval(const std::vector<Question>& questions, TextBackend& backend,
                           const Grader& grader, const SearchConfig& config, int parallelism) {
  BatchEvalResult result;
  result.traces = parallel_map(questions, parallelism, [&](const Question& q, std::size_t) {
    return run_refinement(q, backend, config);
  });

  EvalReport& report = result.report;
  report.questions = static_cast<int>(questions.size());

  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < result.traces.size(); ++i) {
    const RefinementTrace& t = result.traces[i];
    if (t.stop_reason == StopReason::error || t.rounds.empty()) {
      report.errors += 1;
    } else {
      valid.push_back(i);
    }
  }

  for (int t = 0; t <= config.max_refine_iters; ++t) {
    IterationRow row;
    row.iter = t;
    int correct = 0;
    for (std::size_t i : valid) {
      const auto& rounds = result.traces[i].rounds;
      std::size_t held = std::min<std::size_t>(static_cast<std::size_t>(t), rounds.size() - 1);
      const ReasoningPath& answer = rounds[held].answer;
      if (answer.final_answer &&
          grader.grade(*answer.final_answer, questions[i].ground_truth))
        ++correct;
    }
    row.accuracy = valid.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(valid.size());
    if (t >= 1) {
      for (std::size_t i : valid) {
        const auto& rounds = result.traces[i].rounds;
        if (rounds.size() >= static_cast<std::size_t>(t) &&
            rounds[static_cast<std::size_t>(t) - 1].verdict.score <= config.score_threshold)
          ++row.n_refine;
      }
    }
    report.rows.push_back(row);
  }
  return result;
}

std::string format_report(const EvalReport& report) {
  std::string out = "iter  round  accuracy  n_refine\n";
  char buf[96];
  for (const IterationRow& row : report.rows) {
    if (row.iter == 0) {
      std::snprintf(buf, sizeof(buf), "%-5d %-6s %7.2f%%  %s\n", row.iter, "-",
                    row.accuracy * 100.0, "-");
    } else {
      std::snprintf(buf, sizeof(buf), "%-5d %-6d %7.2f%%  %d\n", row.iter, row.iter,
                    row.accuracy * 100.0, row.n_refine);
    }
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "questions=%d errors=%d\n", report.questions, report.errors);
  out += buf;
  return out;
}

}  // namespace treecrit
