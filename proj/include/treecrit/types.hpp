#pragma once

// Shared value types for the search -> mining -> filtering -> refinement
// pipeline. Plain data carriers: construction, validation and JSON
// (de)serialization only; behavior lives in the modules that use them.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace treecrit {

// Canonical critique for correct reasoning paths. Byte-exact, including the period.
inline constexpr const char* kNoCorrectionsNeeded = "No corrections needed.";

// Replacement token used when feedback would reveal the reference answer.
inline constexpr const char* kRedactionToken = "[REDACTED]";

// Default marker that closes a reasoning path. Matched case-insensitively.
inline constexpr const char* kDefaultAnswerMarker = "Final answer:";

// Whitespace-delimited word count, used whenever a backend does not report
// token usage.
int count_tokens(std::string_view text);

struct Question {
  std::string id;
  std::string text;
  std::optional<std::string> image_ref;  // opaque locator, forwarded verbatim
  std::string ground_truth;

  friend bool operator==(const Question&, const Question&) = default;
};

struct Step {
  std::string text;
  int token_count = 0;
  bool is_terminal = false;  // carries an end-of-sequence or final-answer marker

  friend bool operator==(const Step&, const Step&) = default;
};

enum class PathSource { search_tree, rollout, actor_direct, refined };

struct ReasoningPath {
  std::string question_id;
  std::vector<Step> steps;
  std::optional<std::string> final_answer;
  PathSource source = PathSource::rollout;

  friend bool operator==(const ReasoningPath&, const ReasoningPath&) = default;
};

using NodeId = int;

struct Node {
  NodeId node_id = 0;
  std::optional<NodeId> parent_id;  // absent only for the root
  std::optional<Step> step;         // absent only for the root
  std::vector<NodeId> children;     // ordered, no duplicates
  int visit_count = 0;
  double value = 0.0;  // running mean of propagation_log, in [0, 1]
  std::vector<double> propagation_log;

  friend bool operator==(const Node&, const Node&) = default;
};

struct DivergencePair {
  std::string question_id;
  std::vector<Step> shared_prefix;  // maximal common prefix of both paths
  std::vector<Step> branch_a;       // continuation reaching the correct answer
  std::vector<Step> branch_b;       // continuation reaching a wrong answer
  NodeId lca_node_id = -1;          // -1 when built outside a tree context

  friend bool operator==(const DivergencePair&, const DivergencePair&) = default;
};

enum class Provenance { positive, negative_mined };

struct FilterStats {
  int successes = 0;
  int attempts = 0;

  friend bool operator==(const FilterStats&, const FilterStats&) = default;
};

struct CritiqueSample {
  Question question;
  ReasoningPath answer_path;
  int correctness = 0;  // 1 iff the path reaches the ground truth
  std::string critique;
  Provenance provenance = Provenance::positive;
  std::optional<FilterStats> filter_stats;

  friend bool operator==(const CritiqueSample&, const CritiqueSample&) = default;
};

struct SearchConfig {
  int n_expand = 3;             // children sampled per expansion
  int m_rollouts = 5;           // simulations per new node
  int step_token_cap = 30;      // per-step token cap
  int max_path_tokens = 1024;   // total budget for one reasoning path
  int search_iterations = 24;   // tree-search iteration budget
  double temperature = 0.7;
  std::uint64_t seed = 0;
  int refine_attempts = 10;     // refinements tried when filtering a critique
  int keep_threshold = 3;       // minimum successful refinements to keep it
  double score_threshold = 0.5;  // critic score above which refinement stops
  int max_refine_iters = 5;      // cap on actor-critic rounds
  double loss_weight = 1.0;      // weight of the score loss in the total loss

  // engine switches
  bool use_ucb = false;  // selection is value-greedy unless enabled
  double ucb_c = 1.4142135623730951;
  bool mine_rollouts = true;           // mine incorrect rollout completions too
  bool positives_all_correct = false;  // emit every distinct correct path, not just the reference
  std::string answer_marker = kDefaultAnswerMarker;

  friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

// One message per violated invariant; empty means the config is usable.
std::vector<std::string> validate(const SearchConfig& config);

// Node-local invariant check: value range, visit/log consistency, mean drift.
std::vector<std::string> node_violations(const Node& node);

const char* to_string(PathSource source);
const char* to_string(Provenance provenance);

std::vector<std::string> step_texts(const std::vector<Step>& steps);
int total_tokens(const std::vector<Step>& steps);

NLOHMANN_JSON_SERIALIZE_ENUM(PathSource, {
                                             {PathSource::search_tree, "search_tree"},
                                             {PathSource::rollout, "rollout"},
                                             {PathSource::actor_direct, "actor_direct"},
                                             {PathSource::refined, "refined"},
                                         })

NLOHMANN_JSON_SERIALIZE_ENUM(Provenance, {
                                             {Provenance::positive, "positive"},
                                             {Provenance::negative_mined, "negative_mined"},
                                         })

void to_json(nlohmann::json& j, const Question& q);
void from_json(const nlohmann::json& j, Question& q);
void to_json(nlohmann::json& j, const Step& s);
void from_json(const nlohmann::json& j, Step& s);
void to_json(nlohmann::json& j, const ReasoningPath& p);
void from_json(const nlohmann::json& j, ReasoningPath& p);
void to_json(nlohmann::json& j, const Node& n);
void from_json(const nlohmann::json& j, Node& n);
void to_json(nlohmann::json& j, const DivergencePair& d);
void from_json(const nlohmann::json& j, DivergencePair& d);
void to_json(nlohmann::json& j, const FilterStats& f);
void from_json(const nlohmann::json& j, FilterStats& f);
void to_json(nlohmann::json& j, const CritiqueSample& c);
void from_json(const nlohmann::json& j, CritiqueSample& c);
void to_json(nlohmann::json& j, const SearchConfig& c);
void from_json(const nlohmann::json& j, SearchConfig& c);

}  // namespace treecrit
