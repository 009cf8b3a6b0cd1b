#pragma once

// Tree search over reasoning steps, one tree per question. Each iteration
// runs selection (value-greedy descent), expansion (n sampled next steps),
// simulation (m rollouts graded against the ground truth) and incremental-mean
// backpropagation. Rollout paths are retained on the tree for critique mining.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "treecrit/gateway.hpp"
#include "treecrit/types.hpp"

namespace treecrit {

struct SearchTree {
  Question question;
  std::vector<Node> nodes;  // node_id == index into this store
  NodeId root_id = 0;
  std::uint64_t rng_seed = 0;
  int iteration_count = 0;
  bool partial = false;       // a backend failure aborted the run early
  bool no_reference = false;  // no rollout ever reached the correct answer
  std::map<NodeId, std::vector<ReasoningPath>> rollouts;  // retained, keyed by origin node
};

SearchTree make_tree(const Question& question, std::uint64_t seed);

// Appends a child under parent and returns its id. Children start unvisited.
NodeId add_child(SearchTree& tree, NodeId parent, Step step);

const Node& node_at(const SearchTree& tree, NodeId id);

// Node ids from root to id, inclusive.
std::vector<NodeId> node_path(const SearchTree& tree, NodeId id);

// The partial reasoning path: steps of every non-root node from root to id.
std::vector<Step> path_steps(const SearchTree& tree, NodeId id);

int path_tokens(const SearchTree& tree, NodeId id);

// Descends from the root picking the child with maximal value (ties go to the
// lowest child index) and returns the first node without children. With
// config.use_ucb the per-child score gains the usual visit-count bonus.
NodeId select_leaf(const SearchTree& tree, const SearchConfig& config);

// Visit-count increment plus incremental mean update on every node from
// `from` up to and including the root; the value lands in each node's
// propagation_log.
void backpropagate(SearchTree& tree, NodeId from, double value);

// True when the node's step carries a terminal marker or the path's token
// total has reached the budget.
bool is_terminal(const SearchTree& tree, NodeId id, const SearchConfig& config);

std::optional<std::string> extract_answer(const ReasoningPath& path,
                                          const std::string& marker = kDefaultAnswerMarker);

// Structural invariant check: single root, reachability, child/parent
// consistency, per-node visit/value consistency.
std::vector<std::string> tree_violations(const SearchTree& tree);

class SearchEngine {
 public:
  SearchEngine(TextBackend& backend, const Grader& grader, SearchConfig config);

  // Runs the configured iteration budget. On a transport failure during
  // expansion the partial tree is returned with its partial flag set.
  SearchTree run(const Question& question);

  // Expands a childless, non-terminal leaf into up to n children (exact
  // duplicate step texts are dropped). Throws std::logic_error on contract
  // violations and propagates TransportError untouched.
  std::vector<NodeId> expand(SearchTree& tree, NodeId leaf, int n);

  // Average graded outcome of m rollouts from the node; rollouts are retained
  // on the tree. Transport-failed rollouts score 0 and are counted.
  double simulate(SearchTree& tree, NodeId node, int m);

  int degraded_rollouts() const { return degraded_rollouts_; }

 private:
  TextBackend* backend_;
  const Grader* grader_;
  SearchConfig config_;
  int degraded_rollouts_ = 0;
};

}  // namespace treecrit
