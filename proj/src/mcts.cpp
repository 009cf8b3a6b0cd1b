#include "treecrit/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace treecrit {

SearchTree make_tree(const Question& question, std::uint64_t seed) {
  SearchTree tree;
  tree.question = question;
  tree.rng_seed = seed;
  Node root;
  root.node_id = 0;
  tree.nodes.push_back(std::move(root));
  tree.root_id = 0;
  return tree;
}

NodeId add_child(SearchTree& tree, NodeId parent, Step step) {
  NodeId id = static_cast<NodeId>(tree.nodes.size());
  Node node;
  node.node_id = id;
  node.parent_id = parent;
  node.step = std::move(step);
  tree.nodes.push_back(std::move(node));
  tree.nodes[static_cast<std::size_t>(parent)].children.push_back(id);
  return id;
}

const Node& node_at(const SearchTree& tree, NodeId id) {
  return tree.nodes.at(static_cast<std::size_t>(id));
}

std::vector<NodeId> node_path(const SearchTree& tree, NodeId id) {
  std::vector<NodeId> ids;
  for (NodeId cur = id;;) {
    ids.push_back(cur);
    const Node& n = node_at(tree, cur);
    if (!n.parent_id) break;
    cur = *n.parent_id;
  }
  std::reverse(ids.begin(), ids.end());
  return ids;
}

std::vector<Step> path_steps(const SearchTree& tree, NodeId id) {
  std::vector<Step> steps;
  for (NodeId nid : node_path(tree, id)) {
    const Node& n = node_at(tree, nid);
    if (n.step) steps.push_back(*n.step);
  }
  return steps;
}

int path_tokens(const SearchTree& tree, NodeId id) {
  int total = 0;
  for (NodeId nid : node_path(tree, id)) {
    const Node& n = node_at(tree, nid);
    if (n.step) total += n.step->token_count;
  }
  return total;
}

NodeId select_leaf(const SearchTree& tree, const SearchConfig& config) {
  NodeId id = tree.root_id;
  while (!node_at(tree, id).children.empty()) {
    const Node& parent = node_at(tree, id);
    NodeId best = parent.children.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (NodeId child_id : parent.children) {
      const Node& child = node_at(tree, child_id);
      double score;
      if (config.use_ucb) {
        if (child.visit_count == 0) {
          score = std::numeric_limits<double>::infinity();
        } else {
          double bonus = config.ucb_c *
                         std::sqrt(std::log(std::max(1, parent.visit_count)) /
                                   static_cast<double>(child.visit_count));
          score = child.value + bonus;
        }
      } else {
        score = child.value;
      }
      if (score > best_score) {  // strict: ties keep the lowest child index
        best_score = score;
        best = child_id;
      }
    }
    id = best;
  }
  return id;
}

void backpropagate(SearchTree& tree, NodeId from, double value) {
  for (NodeId id = from;;) {
    Node& n = tree.nodes.at(static_cast<std::size_t>(id));
    n.value = (n.value * n.visit_count + value) / (n.visit_count + 1);
    n.visit_count += 1;
    n.propagation_log.push_back(value);
    if (!n.parent_id) break;
    id = *n.parent_id;
  }
}

bool is_terminal(const SearchTree& tree, NodeId id, const SearchConfig& config) {
  const Node& n = node_at(tree, id);
  if (n.step && n.step->is_terminal) return true;
  return path_tokens(tree, id) >= config.max_path_tokens;
}

std::optional<std::string> extract_answer(const ReasoningPath& path, const std::string& marker) {
  if (path.steps.empty() || !path.steps.back().is_terminal) return std::nullopt;
  return extract_marked_answer(path.steps.back().text, marker);
}

std::vector<std::string> tree_violations(const SearchTree& tree) {
  std::vector<std::string> errors;
  if (tree.nodes.empty()) {
    errors.push_back("tree has no nodes");
    return errors;
  }
  int roots = 0;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const Node& n = tree.nodes[i];
    if (n.node_id != static_cast<NodeId>(i))
      errors.push_back("node_id " + std::to_string(n.node_id) + " does not match its slot");
    if (!n.parent_id) ++roots;
    std::set<NodeId> seen;
    for (NodeId c : n.children) {
      if (c < 0 || static_cast<std::size_t>(c) >= tree.nodes.size()) {
        errors.push_back("child id out of range on node " + std::to_string(n.node_id));
        continue;
      }
      if (!seen.insert(c).second)
        errors.push_back("duplicate child on node " + std::to_string(n.node_id));
      const Node& child = tree.nodes[static_cast<std::size_t>(c)];
      if (!child.parent_id || *child.parent_id != n.node_id)
        errors.push_back("child/parent mismatch at node " + std::to_string(c));
    }
    for (const std::string& e : node_violations(n))
      errors.push_back("node " + std::to_string(n.node_id) + ": " + e);
  }
  if (roots != 1) errors.push_back("tree must have exactly one root");

  // Reachability from the root.
  std::unordered_set<NodeId> visited;
  std::vector<NodeId> stack{tree.root_id};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (!visited.insert(id).second) continue;
    for (NodeId c : node_at(tree, id).children)
      if (c >= 0 && static_cast<std::size_t>(c) < tree.nodes.size()) stack.push_back(c);
  }
  if (visited.size() != tree.nodes.size())
    errors.push_back("unreachable nodes present");
  return errors;
}

SearchEngine::SearchEngine(TextBackend& backend, const Grader& grader, SearchConfig config)
    : backend_(&backend), grader_(&grader), config_(std::move(config)) {}

std::vector<NodeId> SearchEngine::expand(SearchTree& tree, NodeId leaf, int n) {
  const Node& node = node_at(tree, leaf);
  if (!node.children.empty()) throw std::logic_error("expand on non-leaf");
  if (node.step && node.step->is_terminal) throw std::logic_error("expand on terminal node");

  GenerationRequest req;
  req.question = tree.question;
  req.prior_steps = path_steps(tree, leaf);
  req.max_new_tokens = config_.step_token_cap;
  req.temperature = config_.temperature;
  req.n_samples = n;
  req.stop_at_step_boundary = true;
  std::vector<Step> steps = backend_->generate_steps(req);

  std::vector<NodeId> created;
  std::unordered_set<std::string> seen;
  for (Step& step : steps) {
    if (!seen.insert(step.text).second) continue;  // exact-duplicate removal
    created.push_back(add_child(tree, leaf, std::move(step)));
  }
  return created;
}

double SearchEngine::simulate(SearchTree& tree, NodeId node, int m) {
  if (m < 1) throw std::logic_error("simulate requires m >= 1");
  std::vector<Step> prior = path_steps(tree, node);
  int budget = config_.max_path_tokens - total_tokens(prior);
  bool prior_terminal = !prior.empty() && prior.back().is_terminal;

  int correct = 0;
  auto& retained = tree.rollouts[node];
  for (int r = 0; r < m; ++r) {
    ReasoningPath path;
    if (budget <= 0 && !prior_terminal) {
      // Budget already exhausted: the rollout is the prior itself, unanswered.
      path.question_id = tree.question.id;
      path.steps = prior;
      path.source = PathSource::rollout;
    } else {
      try {
        path = backend_->rollout(tree.question, prior, std::max(budget, 1),
                                 static_cast<std::uint64_t>(r));
      } catch (const TransportError& e) {
        ++degraded_rollouts_;
        std::cerr << "[search] rollout failed, scored 0: " << e.what() << '\n';
        continue;
      }
    }
    if (path.final_answer && grader_->grade(*path.final_answer, tree.question.ground_truth))
      ++correct;
    retained.push_back(std::move(path));
  }
  return static_cast<double>(correct) / static_cast<double>(m);
}

SearchTree SearchEngine::run(const Question& question) {
  SearchTree tree = make_tree(question, config_.seed);
  for (int iter = 0; iter < config_.search_iterations; ++iter) {
    NodeId leaf = select_leaf(tree, config_);
    if (is_terminal(tree, leaf, config_)) break;
    std::vector<NodeId> children;
    try {
      children = expand(tree, leaf, config_.n_expand);
    } catch (const TransportError& e) {
      std::cerr << "[search] expansion failed, returning partial tree: " << e.what() << '\n';
      tree.partial = true;
      break;
    }
    for (NodeId child : children) {
      double value = simulate(tree, child, config_.m_rollouts);
      backpropagate(tree, child, value);
    }
    tree.iteration_count += 1;
  }
  tree.no_reference = node_at(tree, tree.root_id).value == 0.0;
  return tree;
}

}  // namespace treecrit
