#include "treecrit/critique.hpp"

#include <algorithm>
#include <iostream>
#include <set>
#include <stdexcept>

namespace treecrit {

namespace {

ReasoningPath path_from_nodes(const SearchTree& tree, const std::vector<NodeId>& nodes,
                              const SearchConfig& config) {
  ReasoningPath path;
  path.question_id = tree.question.id;
  for (NodeId id : nodes) {
    const Node& n = node_at(tree, id);
    if (n.step) path.steps.push_back(*n.step);
  }
  path.source = PathSource::search_tree;
  path.final_answer = extract_answer(path, config.answer_marker);
  return path;
}

bool grades_correct(const ReasoningPath& path, const Question& question, const Grader& grader) {
  return path.final_answer && grader.grade(*path.final_answer, question.ground_truth);
}

std::string join_texts(const std::vector<Step>& steps) {
  std::string key;
  for (const Step& s : steps) {
    key += s.text;
    key += '\x1f';
  }
  return key;
}

}  // namespace

std::optional<ReferencePick> pick_reference_nodes(const SearchTree& tree, const Grader& grader,
                                                  const SearchConfig& config) {
  // Greedy value descent, ties to the lowest child index.
  NodeId id = tree.root_id;
  while (!node_at(tree, id).children.empty()) {
    const Node& parent = node_at(tree, id);
    NodeId best = parent.children.front();
    for (NodeId child : parent.children) {
      if (node_at(tree, child).value > node_at(tree, best).value) best = child;
    }
    id = best;
  }
  const Node& endpoint = node_at(tree, id);
  if (endpoint.step && endpoint.step->is_terminal) {
    std::vector<NodeId> nodes = node_path(tree, id);
    ReasoningPath path = path_from_nodes(tree, nodes, config);
    if (grades_correct(path, tree.question, grader)) return ReferencePick{std::move(path), std::move(nodes)};
  }

  // Fallback: best-valued correct terminal path, ties to the lowest node id.
  std::optional<NodeId> best;
  for (const Node& n : tree.nodes) {
    if (!n.step || !n.step->is_terminal) continue;
    ReasoningPath path = path_from_nodes(tree, node_path(tree, n.node_id), config);
    if (!grades_correct(path, tree.question, grader)) continue;
    if (!best || n.value > node_at(tree, *best).value) best = n.node_id;
  }
  if (!best) return std::nullopt;
  std::vector<NodeId> nodes = node_path(tree, *best);
  ReasoningPath path = path_from_nodes(tree, nodes, config);
  return ReferencePick{std::move(path), std::move(nodes)};
}

std::optional<ReasoningPath> pick_reference(const SearchTree& tree, const Grader& grader,
                                            const SearchConfig& config) {
  auto pick = pick_reference_nodes(tree, grader, config);
  if (!pick) return std::nullopt;
  return std::move(pick->path);
}

namespace {

void collect_incorrect_rec(const SearchTree& tree, NodeId id, const Grader& grader,
                           const SearchConfig& config, std::vector<ReasoningPath>& out) {
  const Node& n = node_at(tree, id);
  if (n.step && n.step->is_terminal) {
    ReasoningPath path = path_from_nodes(tree, node_path(tree, id), config);
    if (path.final_answer && !grader.grade(*path.final_answer, tree.question.ground_truth))
      out.push_back(std::move(path));
  }
  if (config.mine_rollouts) {
    auto it = tree.rollouts.find(id);
    if (it != tree.rollouts.end()) {
      for (const ReasoningPath& r : it->second) {
        if (r.final_answer && !grader.grade(*r.final_answer, tree.question.ground_truth))
          out.push_back(r);
      }
    }
  }
  for (NodeId child : n.children) collect_incorrect_rec(tree, child, grader, config, out);
}

void collect_correct_rec(const SearchTree& tree, NodeId id, const Grader& grader,
                         const SearchConfig& config, std::vector<ReasoningPath>& out) {
  const Node& n = node_at(tree, id);
  if (n.step && n.step->is_terminal) {
    ReasoningPath path = path_from_nodes(tree, node_path(tree, id), config);
    if (grades_correct(path, tree.question, grader)) out.push_back(std::move(path));
  }
  if (config.mine_rollouts) {
    auto it = tree.rollouts.find(id);
    if (it != tree.rollouts.end()) {
      for (const ReasoningPath& r : it->second)
        if (grades_correct(r, tree.question, grader)) out.push_back(r);
    }
  }
  for (NodeId child : n.children) collect_correct_rec(tree, child, grader, config, out);
}

}  // namespace

std::vector<ReasoningPath> collect_incorrect_paths(const SearchTree& tree, const Grader& grader,
                                                   const SearchConfig& config) {
  std::vector<ReasoningPath> out;
  collect_incorrect_rec(tree, tree.root_id, grader, config, out);
  return out;
}

DivergencePair find_divergence(const ReasoningPath& reference, const ReasoningPath& wrong) {
  const auto& a = reference.steps;
  const auto& b = wrong.steps;
  std::size_t p = 0;
  while (p < a.size() && p < b.size() && a[p].text == b[p].text) ++p;
  if (p == a.size() && p == b.size())
    throw std::invalid_argument("paths are identical; nothing diverges");
  if (p == a.size() || p == b.size())
    throw std::invalid_argument("one path is a prefix of the other; no divergent branches");

  DivergencePair pair;
  pair.question_id = reference.question_id;
  pair.shared_prefix.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(p));
  pair.branch_a.assign(a.begin() + static_cast<std::ptrdiff_t>(p), a.end());
  pair.branch_b.assign(b.begin() + static_cast<std::ptrdiff_t>(p), b.end());
  pair.lca_node_id = -1;
  return pair;
}

CritiqueSample build_positive(const Question& question, const ReasoningPath& correct,
                              const Grader& grader) {
  if (!grades_correct(correct, question, grader))
    throw std::invalid_argument("positive sample requires a correctly graded path");
  CritiqueSample sample;
  sample.question = question;
  sample.answer_path = correct;
  sample.correctness = 1;
  sample.critique = kNoCorrectionsNeeded;
  sample.provenance = Provenance::positive;
  return sample;
}

CritiqueSample build_negative(const Question& question, const DivergencePair& pair,
                              TextBackend& backend) {
  std::string critique = backend.annotate(question, pair);

  CritiqueSample sample;
  sample.question = question;
  sample.answer_path.question_id = question.id;
  sample.answer_path.steps = pair.shared_prefix;
  sample.answer_path.steps.insert(sample.answer_path.steps.end(), pair.branch_b.begin(),
                                  pair.branch_b.end());
  sample.answer_path.source = PathSource::search_tree;
  sample.answer_path.final_answer = extract_answer(sample.answer_path);
  sample.correctness = 0;
  sample.critique = std::move(critique);
  sample.provenance = Provenance::negative_mined;
  return sample;
}

std::vector<CritiqueSample> mine_tree(const SearchTree& tree, TextBackend& backend,
                                      const Grader& grader, const SearchConfig& config,
                                      MiningStats& stats) {
  stats.trees += 1;
  std::vector<CritiqueSample> samples;
  if (tree.no_reference) {
    stats.no_reference_trees += 1;
    return samples;
  }
  auto pick = pick_reference_nodes(tree, grader, config);
  if (!pick) {
    stats.no_reference_trees += 1;
    return samples;
  }

  samples.push_back(build_positive(tree.question, pick->path, grader));
  stats.positives += 1;

  if (config.positives_all_correct) {
    std::vector<ReasoningPath> correct;
    collect_correct_rec(tree, tree.root_id, grader, config, correct);
    std::set<std::string> seen{join_texts(pick->path.steps)};
    for (const ReasoningPath& p : correct) {
      if (!seen.insert(join_texts(p.steps)).second) continue;
      samples.push_back(build_positive(tree.question, p, grader));
      stats.positives += 1;
    }
  }

  std::vector<ReasoningPath> wrongs = collect_incorrect_paths(tree, grader, config);
  stats.incorrect_paths += static_cast<int>(wrongs.size());

  std::set<std::string> seen_wrong;
  for (const ReasoningPath& wrong : wrongs) {
    if (!seen_wrong.insert(join_texts(wrong.steps)).second) {
      stats.duplicates_removed += 1;
      continue;
    }
    DivergencePair pair;
    try {
      pair = find_divergence(pick->path, wrong);
    } catch (const std::invalid_argument& e) {
      stats.skipped_annotations += 1;
      std::cerr << "[mine] skipping degenerate pair for " << tree.question.id << ": " << e.what()
                << '\n';
      continue;
    }
    pair.lca_node_id = pick->nodes.at(pair.shared_prefix.size());
    try {
      CritiqueSample sample = build_negative(tree.question, pair, backend);
      sample.answer_path.source = wrong.source;
      samples.push_back(std::move(sample));
      stats.negatives += 1;
    } catch (const TransportError& e) {
      stats.transport_failures += 1;
      std::cerr << "[mine] annotator unreachable for " << tree.question.id << ": " << e.what()
                << '\n';
    } catch (const GatewayError& e) {
      stats.skipped_annotations += 1;
      std::cerr << "[mine] annotator failed for " << tree.question.id << ": " << e.what() << '\n';
    }
  }
  return samples;
}

}  // namespace treecrit
