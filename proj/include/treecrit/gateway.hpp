#pragma once

// Uniform contract for every text-generating role in the pipeline (actor,
// critic, annotator, judge), a deterministic scripted implementation for
// tests and offline runs, the answer grader, and the prompt templates.

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "treecrit/types.hpp"

namespace treecrit {

struct GatewayError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Backend unreachable after retries.
struct TransportError : GatewayError {
  using GatewayError::GatewayError;
};

// Scripted backend has no entry for the requested key and is configured to fail.
struct ScriptMissError : GatewayError {
  using GatewayError::GatewayError;
};

// Remote reply lacks the expected section (not silently defaulted).
struct MalformedReplyError : GatewayError {
  using GatewayError::GatewayError;
};

struct EmptyReplyError : GatewayError {
  using GatewayError::GatewayError;
};

struct GenerationRequest {
  Question question;
  std::vector<Step> prior_steps;
  int max_new_tokens = 30;
  double temperature = 0.7;
  int n_samples = 1;
  bool stop_at_step_boundary = true;
};

struct CriticVerdict {
  std::string critique;
  double score = 0.0;  // estimated probability that the answer is correct

  friend bool operator==(const CriticVerdict&, const CriticVerdict&) = default;
};

void to_json(nlohmann::json& j, const CriticVerdict& v);
void from_json(const nlohmann::json& j, CriticVerdict& v);

// All roles behind one interface. Implementations are stateless per request;
// any number of calls may be in flight concurrently.
class TextBackend {
 public:
  virtual ~TextBackend() = default;

  // Sample n candidate next steps from the partial reasoning path.
  virtual std::vector<Step> generate_steps(const GenerationRequest& req) = 0;

  // Complete the path until a terminal marker or the token budget runs out.
  // sample_index keeps repeated draws from one state distinguishable and
  // reproducible.
  virtual ReasoningPath rollout(const Question& question, const std::vector<Step>& prior_steps,
                                int budget, std::uint64_t sample_index) = 0;

  // Evaluate a complete answer: critique text plus a score in [0, 1].
  virtual CriticVerdict critique(const Question& question, const ReasoningPath& answer) = 0;

  // Produce a fresh answer for the question given the previous answer and a
  // critique. attempt seeds per-try sampling deterministically.
  virtual ReasoningPath refine(const Question& question, const ReasoningPath& answer,
                               const std::string& critique, std::uint64_t attempt) = 0;

  // Compare a correct and an incorrect branch and explain the mistake in the
  // incorrect one. The reference answer is redacted from the reply.
  virtual std::string annotate(const Question& question, const DivergencePair& pair) = 0;

  // Equivalence judgment for graders that delegate to a model.
  virtual bool judge(const std::string& predicted, const std::string& ground_truth) = 0;

  ReasoningPath rollout(const Question& question, const std::vector<Step>& prior_steps, int budget) {
    return rollout(question, prior_steps, budget, 0);
  }
  ReasoningPath refine(const Question& question, const ReasoningPath& answer, const std::string& critique) {
    return refine(question, answer, critique, 0);
  }
};

// ---------------------------------------------------------------------------
// Step construction
// ---------------------------------------------------------------------------

// Builds a Step from raw text: truncates to at most token_cap whitespace
// tokens (the kept text is a byte prefix of the input) and flags terminal
// steps. "<eos>" (alone) marks an explicit end-of-sequence step.
Step make_step(const std::string& raw, int token_cap, const std::string& marker = kDefaultAnswerMarker);

// Cuts raw model output at the first step boundary: a newline or a sentence
// terminator followed by whitespace, whichever comes first.
std::string first_step_text(const std::string& raw);

// Case-insensitive search for the answer marker.
bool contains_marker(std::string_view text, std::string_view marker);

// Text after the last occurrence of the marker, trimmed, with trailing
// sentence punctuation removed. Empty remainders yield nullopt.
std::optional<std::string> extract_marked_answer(const std::string& text, const std::string& marker);

// If prior_steps already ends in a terminal step, the completed path is the
// prior itself; helper shared by backends.
std::optional<ReasoningPath> completed_path(const Question& question,
                                            const std::vector<Step>& prior_steps,
                                            const std::string& marker);

// ---------------------------------------------------------------------------
// Grading
// ---------------------------------------------------------------------------

// trim + casefold + strip trailing punctuation + canonicalize plain numerals
// ("7.0" == "7", "+03" == "3").
std::string normalize_answer(std::string_view answer);

// Default grader: true iff normalized forms match. Total function.
bool grade_answers(const std::string& predicted, const std::string& ground_truth);

class Grader {
 public:
  virtual ~Grader() = default;
  virtual bool grade(const std::string& predicted, const std::string& ground_truth) const = 0;
};

class NormalizedMatchGrader final : public Grader {
 public:
  bool grade(const std::string& predicted, const std::string& ground_truth) const override {
    return grade_answers(predicted, ground_truth);
  }
};

// Delegates the equivalence decision to a model endpoint.
class JudgeGrader final : public Grader {
 public:
  explicit JudgeGrader(TextBackend& backend) : backend_(&backend) {}
  bool grade(const std::string& predicted, const std::string& ground_truth) const override {
    return backend_->judge(predicted, ground_truth);
  }

 private:
  TextBackend* backend_;
};

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

// Placeholders: {question} {reasoning} {critique} {branch_a} {branch_b}.
struct PromptTemplates {
  std::string actor;      // refinement prompt: question + previous answer + critique
  std::string critic;     // evaluation prompt: question + answer
  std::string annotator;  // branch comparison prompt

  static PromptTemplates defaults();
  // Reads actor.txt / critic.txt / annotator.txt from dir; missing files keep
  // their defaults.
  static PromptTemplates load_dir(const std::string& dir);
};

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& values);

std::string render_steps(const std::vector<Step>& steps);

std::string build_actor_prompt(const PromptTemplates& t, const Question& q,
                               const ReasoningPath& answer, const std::string& critique);
std::string build_critic_prompt(const PromptTemplates& t, const Question& q,
                                const ReasoningPath& answer);
std::string build_annotator_prompt(const PromptTemplates& t, const Question& q,
                                   const DivergencePair& pair);

// Replaces every verbatim occurrence of answer with the redaction token.
std::string redact_answer(std::string text, const std::string& answer);

// Splits a raw critic reply into critique text and score. A trailing
// "SCORE: <0..1>" line is consumed; when absent, the score falls back to 1.0
// for the canonical no-corrections critique and 0.0 otherwise.
CriticVerdict parse_critic_reply(const std::string& reply);

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

// A scripted item with this exact text makes the mock raise TransportError,
// for exercising retry/degradation paths.
inline constexpr const char* kTransportErrorToken = "<TRANSPORT_ERROR>";

// Deterministic lookup tables keyed by (question_id, step-prefix hash).
// Line-delimited file format; see docs/README for the record shapes.
class Script {
 public:
  void add_steps(const std::string& qid, const std::vector<std::string>& prefix,
                 std::vector<std::string> items);
  void add_rollout(const std::string& qid, const std::vector<std::string>& prefix,
                   std::vector<std::vector<std::string>> paths);
  void add_critique(const std::string& qid, const std::vector<std::string>& answer_steps,
                    std::vector<CriticVerdict> verdicts);
  void add_refine(const std::string& qid, const std::vector<std::string>& answer_steps,
                  std::vector<std::vector<std::string>> paths);
  void add_annotation(const std::string& qid, const std::vector<std::string>& branch_a,
                      const std::vector<std::string>& branch_b, std::vector<std::string> items);
  void add_judge(const std::string& predicted, const std::string& ground_truth, bool match);

  static Script load(const std::string& path);
  void save(const std::string& path) const;
  nlohmann::json to_json_lines() const;

  struct Key {
    std::string question_id;
    std::uint64_t prefix_hash = 0;
    auto operator<=>(const Key&) const = default;
  };

  const std::vector<std::string>* find_steps(const Key& k) const;
  const std::vector<std::vector<std::string>>* find_rollout(const Key& k) const;
  const std::vector<CriticVerdict>* find_critique(const Key& k) const;
  const std::vector<std::vector<std::string>>* find_refine(const Key& k) const;
  const std::vector<std::string>* find_annotation(const Key& k) const;
  const bool* find_judgment(const Key& k) const;

  static std::uint64_t annotate_hash(const std::vector<std::string>& branch_a,
                                     const std::vector<std::string>& branch_b);

 private:
  std::map<Key, std::vector<std::string>> steps_;
  std::map<Key, std::vector<std::vector<std::string>>> rollouts_;
  std::map<Key, std::vector<CriticVerdict>> critiques_;
  std::map<Key, std::vector<std::vector<std::string>>> refinements_;
  std::map<Key, std::vector<std::string>> annotations_;
  std::map<Key, bool> judgments_;

  // kept for save(); mirrors the insertion calls
  std::vector<nlohmann::json> records_;
};

enum class MockDefault { echo, fail };

struct MockOptions {
  int step_token_cap = 30;
  std::string answer_marker = kDefaultAnswerMarker;
  MockDefault default_behavior = MockDefault::fail;
  std::uint64_t seed = 0;
};

// Deterministic test double: fixed (script, seed) gives byte-identical
// outputs across runs. Safe for concurrent lookups.
class ScriptedBackend final : public TextBackend {
 public:
  ScriptedBackend(Script script, MockOptions options);

  std::vector<Step> generate_steps(const GenerationRequest& req) override;
  ReasoningPath rollout(const Question& question, const std::vector<Step>& prior_steps, int budget,
                        std::uint64_t sample_index) override;
  CriticVerdict critique(const Question& question, const ReasoningPath& answer) override;
  ReasoningPath refine(const Question& question, const ReasoningPath& answer,
                       const std::string& critique, std::uint64_t attempt) override;
  std::string annotate(const Question& question, const DivergencePair& pair) override;
  bool judge(const std::string& predicted, const std::string& ground_truth) override;

  using TextBackend::refine;
  using TextBackend::rollout;

  struct CallCounts {
    int generate = 0;
    int rollout = 0;
    int critique = 0;
    int refine = 0;
    int annotate = 0;
    int judge = 0;
  };
  CallCounts call_counts() const;

 private:
  Script script_;
  MockOptions options_;
  mutable std::atomic<int> generate_calls_{0};
  mutable std::atomic<int> rollout_calls_{0};
  mutable std::atomic<int> critique_calls_{0};
  mutable std::atomic<int> refine_calls_{0};
  mutable std::atomic<int> annotate_calls_{0};
  mutable std::atomic<int> judge_calls_{0};

  [[noreturn]] void miss(const std::string& what, const Script::Key& key) const;
  ReasoningPath assemble_path(const Question& question, const std::vector<Step>& prior,
                              const std::vector<std::string>& completion, int budget,
                              PathSource source) const;
};

}  // namespace treecrit
