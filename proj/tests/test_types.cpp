#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "treecrit/types.hpp"

using namespace treecrit;
using nlohmann::json;

namespace {

std::string random_text(std::mt19937_64& rng, int max_words = 6) {
  return treecrit::test::random_sentence(rng, 1 + static_cast<int>(rng() % max_words));
}

Question random_question(std::mt19937_64& rng) {
  Question q;
  q.id = "q" + std::to_string(rng() % 1000);
  q.text = random_text(rng);
  if (rng() % 2) q.image_ref = "images/" + std::to_string(rng() % 50) + ".png";
  q.ground_truth = std::to_string(rng() % 100);
  return q;
}

Step random_step(std::mt19937_64& rng) {
  std::string text = random_text(rng);
  return Step{text, count_tokens(text), rng() % 4 == 0};
}

ReasoningPath random_path(std::mt19937_64& rng) {
  ReasoningPath p;
  p.question_id = "q" + std::to_string(rng() % 1000);
  int n = 1 + static_cast<int>(rng() % 4);
  for (int i = 0; i < n; ++i) p.steps.push_back(random_step(rng));
  p.steps.back().is_terminal = true;
  if (rng() % 2) p.final_answer = std::to_string(rng() % 30);
  p.source = static_cast<PathSource>(rng() % 4);
  return p;
}

Node random_node(std::mt19937_64& rng, bool root) {
  Node n;
  n.node_id = static_cast<NodeId>(rng() % 100);
  if (!root) {
    n.parent_id = static_cast<NodeId>(rng() % 100);
    n.step = random_step(rng);
  }
  int visits = static_cast<int>(rng() % 5);
  double sum = 0.0;
  for (int i = 0; i < visits; ++i) {
    double v = static_cast<double>(rng() % 1000) / 1000.0;
    n.propagation_log.push_back(v);
    sum += v;
  }
  n.visit_count = visits;
  n.value = visits ? sum / visits : 0.0;
  for (int i = 0; i < 3; ++i) n.children.push_back(static_cast<NodeId>(rng() % 100));
  return n;
}

DivergencePair random_pair(std::mt19937_64& rng) {
  DivergencePair d;
  d.question_id = "q" + std::to_string(rng() % 100);
  for (int i = 0; i < static_cast<int>(rng() % 3); ++i) d.shared_prefix.push_back(random_step(rng));
  d.branch_a.push_back(random_step(rng));
  d.branch_b.push_back(random_step(rng));
  d.lca_node_id = static_cast<NodeId>(rng() % 40);
  return d;
}

CritiqueSample random_sample(std::mt19937_64& rng) {
  CritiqueSample s;
  s.question = random_question(rng);
  s.answer_path = random_path(rng);
  if (rng() % 2) {
    s.correctness = 1;
    s.critique = kNoCorrectionsNeeded;
    s.provenance = Provenance::positive;
  } else {
    s.correctness = 0;
    s.critique = random_text(rng);
    s.provenance = Provenance::negative_mined;
    if (rng() % 2) s.filter_stats = FilterStats{static_cast<int>(rng() % 11), 10};
  }
  return s;
}

SearchConfig random_config(std::mt19937_64& rng) {
  SearchConfig c;
  c.n_expand = 1 + static_cast<int>(rng() % 5);
  c.m_rollouts = 1 + static_cast<int>(rng() % 8);
  c.search_iterations = static_cast<int>(rng() % 40);
  c.temperature = static_cast<double>(rng() % 150) / 100.0;
  c.seed = rng();
  c.keep_threshold = 1 + static_cast<int>(rng() % 10);
  c.refine_attempts = c.keep_threshold + static_cast<int>(rng() % 5);
  c.score_threshold = static_cast<double>(rng() % 100) / 100.0;
  c.use_ucb = rng() % 2;
  c.mine_rollouts = rng() % 2;
  return c;
}

template <typename T>
void check_round_trip(const T& value) {
  json j = value;
  T back = j.get<T>();
  CHECK(back == value);
  // and through the printed line, as the files store it
  T reparsed = json::parse(j.dump()).get<T>();
  CHECK(reparsed == value);
}

}  // namespace

TEST_CASE("config validation accepts the stock configuration") {
  SearchConfig c;
  c.n_expand = 3;
  c.m_rollouts = 5;
  c.step_token_cap = 30;
  c.keep_threshold = 3;
  c.refine_attempts = 10;
  c.score_threshold = 0.5;
  c.max_refine_iters = 5;
  CHECK(validate(c).empty());
}

TEST_CASE("config validation reports a threshold above the attempt count") {
  SearchConfig c;
  c.keep_threshold = 11;
  c.refine_attempts = 10;
  auto errors = validate(c);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0] == "keep_threshold exceeds refine_attempts");
}

TEST_CASE("config validation reports zero rollouts") {
  SearchConfig c;
  c.m_rollouts = 0;
  auto errors = validate(c);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0] == "m_rollouts must be >= 1");
}

TEST_CASE("config validation reports every violated bound at once") {
  SearchConfig c;
  c.n_expand = 0;
  c.m_rollouts = 0;
  c.score_threshold = 1.5;
  c.max_refine_iters = 0;
  auto errors = validate(c);
  CHECK(errors.size() == 4);
}

TEST_CASE("serialization round-trips every domain type") {
  std::mt19937_64 rng(20240811);
  for (int i = 0; i < 50; ++i) {
    check_round_trip(random_question(rng));
    check_round_trip(random_step(rng));
    check_round_trip(random_path(rng));
    check_round_trip(random_node(rng, i % 5 == 0));
    check_round_trip(random_pair(rng));
    check_round_trip(random_sample(rng));
    check_round_trip(random_config(rng));
  }
}

TEST_CASE("node violations catch drifted values and miscounted visits") {
  Node good;
  good.node_id = 1;
  good.parent_id = 0;
  good.step = test::step_of("look at the axis.");
  good.propagation_log = {0.0, 1.0};
  good.visit_count = 2;
  good.value = 0.5;
  CHECK(node_violations(good).empty());

  Node drifted = good;
  drifted.value = 0.51;
  CHECK(!node_violations(drifted).empty());

  Node miscounted = good;
  miscounted.visit_count = 3;
  CHECK(!node_violations(miscounted).empty());

  Node out_of_range = good;
  out_of_range.value = 1.25;
  out_of_range.propagation_log = {1.25, 1.25};
  CHECK(!node_violations(out_of_range).empty());

  Node root_with_step;
  root_with_step.step = test::step_of("bad root");
  CHECK(!node_violations(root_with_step).empty());
}

TEST_CASE("token counting is whitespace-delimited") {
  CHECK(count_tokens("") == 0);
  CHECK(count_tokens("one") == 1);
  CHECK(count_tokens("two  words") == 2);
  CHECK(count_tokens("  padded   with \t spaces \n") == 3);
}
