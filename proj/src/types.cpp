#include "treecrit/types.hpp"

#include <cctype>
#include <cmath>
#include <numeric>

namespace treecrit {

int count_tokens(std::string_view text) {
  int count = 0;
  bool in_word = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

std::vector<std::string> validate(const SearchConfig& config) {
  std::vector<std::string> errors;
  if (config.n_expand < 1) errors.push_back("n_expand must be >= 1");
  if (config.m_rollouts < 1) errors.push_back("m_rollouts must be >= 1");
  if (config.step_token_cap < 1) errors.push_back("step_token_cap must be >= 1");
  if (config.max_path_tokens < 1) errors.push_back("max_path_tokens must be >= 1");
  if (config.search_iterations < 0) errors.push_back("search_iterations must be >= 0");
  if (config.temperature < 0.0) errors.push_back("temperature must be >= 0");
  if (config.refine_attempts < 1) errors.push_back("refine_attempts must be >= 1");
  if (config.keep_threshold < 1) errors.push_back("keep_threshold must be >= 1");
  if (config.keep_threshold > config.refine_attempts)
    errors.push_back("keep_threshold exceeds refine_attempts");
  if (config.score_threshold < 0.0 || config.score_threshold > 1.0)
    errors.push_back("score_threshold must be in [0, 1]");
  if (config.max_refine_iters < 1) errors.push_back("max_refine_iters must be >= 1");
  if (config.loss_weight < 0.0) errors.push_back("loss_weight must be >= 0");
  if (config.answer_marker.empty()) errors.push_back("answer_marker must be non-empty");
  return errors;
}

std::vector<std::string> node_violations(const Node& node) {
  std::vector<std::string> errors;
  if (node.visit_count < 0) errors.push_back("visit_count is negative");
  if (node.value < 0.0 || node.value > 1.0) errors.push_back("value outside [0, 1]");
  if (static_cast<std::size_t>(node.visit_count) != node.propagation_log.size())
    errors.push_back("visit_count does not match propagation_log length");
  if (node.visit_count > 0 && node.propagation_log.size() == static_cast<std::size_t>(node.visit_count)) {
    double mean = std::accumulate(node.propagation_log.begin(), node.propagation_log.end(), 0.0) /
                  static_cast<double>(node.propagation_log.size());
    if (std::fabs(mean - node.value) > 1e-9)
      errors.push_back("value drifts from mean(propagation_log)");
  }
  if (!node.parent_id.has_value() && node.step.has_value())
    errors.push_back("root node must not carry a step");
  if (node.parent_id.has_value() && !node.step.has_value())
    errors.push_back("non-root node must carry a step");
  return errors;
}

const char* to_string(PathSource source) {
  switch (source) {
    case PathSource::search_tree: return "search_tree";
    case PathSource::rollout: return "rollout";
    case PathSource::actor_direct: return "actor_direct";
    case PathSource::refined: return "refined";
  }
  return "rollout";
}

const char* to_string(Provenance provenance) {
  return provenance == Provenance::positive ? "positive" : "negative_mined";
}

std::vector<std::string> step_texts(const std::vector<Step>& steps) {
  std::vector<std::string> texts;
  texts.reserve(steps.size());
  for (const Step& s : steps) texts.push_back(s.text);
  return texts;
}

int total_tokens(const std::vector<Step>& steps) {
  int total = 0;
  for (const Step& s : steps) total += s.token_count;
  return total;
}

using nlohmann::json;

void to_json(json& j, const Question& q) {
  j = json{{"id", q.id},
           {"text", q.text},
           {"image_ref", q.image_ref ? json(*q.image_ref) : json(nullptr)},
           {"ground_truth", q.ground_truth}};
}

void from_json(const json& j, Question& q) {
  j.at("id").get_to(q.id);
  j.at("text").get_to(q.text);
  q.image_ref.reset();
  if (j.contains("image_ref") && !j.at("image_ref").is_null())
    q.image_ref = j.at("image_ref").get<std::string>();
  q.ground_truth = j.value("ground_truth", std::string{});
}

void to_json(json& j, const Step& s) {
  j = json{{"text", s.text}, {"token_count", s.token_count}, {"is_terminal", s.is_terminal}};
}

void from_json(const json& j, Step& s) {
  j.at("text").get_to(s.text);
  j.at("token_count").get_to(s.token_count);
  j.at("is_terminal").get_to(s.is_terminal);
}

void to_json(json& j, const ReasoningPath& p) {
  j = json{{"question_id", p.question_id},
           {"steps", p.steps},
           {"final_answer", p.final_answer ? json(*p.final_answer) : json(nullptr)},
           {"source", p.source}};
}

void from_json(const json& j, ReasoningPath& p) {
  j.at("question_id").get_to(p.question_id);
  j.at("steps").get_to(p.steps);
  p.final_answer.reset();
  if (j.contains("final_answer") && !j.at("final_answer").is_null())
    p.final_answer = j.at("final_answer").get<std::string>();
  j.at("source").get_to(p.source);
}

void to_json(json& j, const Node& n) {
  j = json{{"node_id", n.node_id},
           {"parent_id", n.parent_id ? json(*n.parent_id) : json(nullptr)},
           {"step", n.step ? json(*n.step) : json(nullptr)},
           {"children", n.children},
           {"visit_count", n.visit_count},
           {"value", n.value},
           {"propagation_log", n.propagation_log}};
}

void from_json(const json& j, Node& n) {
  j.at("node_id").get_to(n.node_id);
  n.parent_id.reset();
  if (!j.at("parent_id").is_null()) n.parent_id = j.at("parent_id").get<NodeId>();
  n.step.reset();
  if (!j.at("step").is_null()) n.step = j.at("step").get<Step>();
  j.at("children").get_to(n.children);
  j.at("visit_count").get_to(n.visit_count);
  j.at("value").get_to(n.value);
  j.at("propagation_log").get_to(n.propagation_log);
}

void to_json(json& j, const DivergencePair& d) {
  j = json{{"question_id", d.question_id},
           {"shared_prefix", d.shared_prefix},
           {"branch_a", d.branch_a},
           {"branch_b", d.branch_b},
           {"lca_node_id", d.lca_node_id}};
}

void from_json(const json& j, DivergencePair& d) {
  j.at("question_id").get_to(d.question_id);
  j.at("shared_prefix").get_to(d.shared_prefix);
  j.at("branch_a").get_to(d.branch_a);
  j.at("branch_b").get_to(d.branch_b);
  j.at("lca_node_id").get_to(d.lca_node_id);
}

void to_json(json& j, const FilterStats& f) {
  j = json{{"successes", f.successes}, {"attempts", f.attempts}};
}

void from_json(const json& j, FilterStats& f) {
  j.at("successes").get_to(f.successes);
  j.at("attempts").get_to(f.attempts);
}

void to_json(json& j, const CritiqueSample& c) {
  j = json{{"question", c.question},
           {"answer_path", c.answer_path},
           {"correctness", c.correctness},
           {"critique", c.critique},
           {"provenance", c.provenance},
           {"filter_stats", c.filter_stats ? json(*c.filter_stats) : json(nullptr)}};
}

void from_json(const json& j, CritiqueSample& c) {
  j.at("question").get_to(c.question);
  j.at("answer_path").get_to(c.answer_path);
  j.at("correctness").get_to(c.correctness);
  j.at("critique").get_to(c.critique);
  j.at("provenance").get_to(c.provenance);
  c.filter_stats.reset();
  if (j.contains("filter_stats") && !j.at("filter_stats").is_null())
    c.filter_stats = j.at("filter_stats").get<FilterStats>();
}

void to_json(json& j, const SearchConfig& c) {
  j = json{{"n_expand", c.n_expand},
           {"m_rollouts", c.m_rollouts},
           {"step_token_cap", c.step_token_cap},
           {"max_path_tokens", c.max_path_tokens},
           {"search_iterations", c.search_iterations},
           {"temperature", c.temperature},
           {"seed", c.seed},
           {"refine_attempts", c.refine_attempts},
           {"keep_threshold", c.keep_threshold},
           {"score_threshold", c.score_threshold},
           {"max_refine_iters", c.max_refine_iters},
           {"loss_weight", c.loss_weight},
           {"use_ucb", c.use_ucb},
           {"ucb_c", c.ucb_c},
           {"mine_rollouts", c.mine_rollouts},
           {"positives_all_correct", c.positives_all_correct},
           {"answer_marker", c.answer_marker}};
}

void from_json(const json& j, SearchConfig& c) {
  SearchConfig defaults;
  c.n_expand = j.value("n_expand", defaults.n_expand);
  c.m_rollouts = j.value("m_rollouts", defaults.m_rollouts);
  c.step_token_cap = j.value("step_token_cap", defaults.step_token_cap);
  c.max_path_tokens = j.value("max_path_tokens", defaults.max_path_tokens);
  c.search_iterations = j.value("search_iterations", defaults.search_iterations);
  c.temperature = j.value("temperature", defaults.temperature);
  c.seed = j.value("seed", defaults.seed);
  c.refine_attempts = j.value("refine_attempts", defaults.refine_attempts);
  c.keep_threshold = j.value("keep_threshold", defaults.keep_threshold);
  c.score_threshold = j.value("score_threshold", defaults.score_threshold);
  c.max_refine_iters = j.value("max_refine_iters", defaults.max_refine_iters);
  c.loss_weight = j.value("loss_weight", defaults.loss_weight);
  c.use_ucb = j.value("use_ucb", defaults.use_ucb);
  c.ucb_c = j.value("ucb_c", defaults.ucb_c);
  c.mine_rollouts = j.value("mine_rollouts", defaults.mine_rollouts);
  c.positives_all_correct = j.value("positives_all_correct", defaults.positives_all_correct);
  c.answer_marker = j.value("answer_marker", defaults.answer_marker);
}

}  // namespace treecrit
