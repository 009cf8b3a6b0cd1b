#pragma once

// Turns a finished search tree into critique samples: picks the correct
// reference path, collects incorrect terminal paths, locates the divergence
// point of each against the reference, and asks the annotator to explain the
// mistake in the incorrect branch.

#include <optional>
#include <vector>

#include "treecrit/gateway.hpp"
#include "treecrit/mcts.hpp"
#include "treecrit/types.hpp"

namespace treecrit {

struct MiningStats {
  int trees = 0;
  int no_reference_trees = 0;  // skipped: no correct terminal path
  int positives = 0;
  int negatives = 0;
  int incorrect_paths = 0;
  int duplicates_removed = 0;
  int skipped_annotations = 0;  // annotator replied unusably or branches degenerate
  int transport_failures = 0;   // annotator unreachable; sample skipped
};

struct ReferencePick {
  ReasoningPath path;
  std::vector<NodeId> nodes;  // node ids root..leaf backing the path
};

// Greedy value descent first; if that path is not a correct terminal one,
// falls back to the correct terminal path with the highest leaf value (ties
// to the lowest node id). nullopt when no correct terminal path exists.
std::optional<ReferencePick> pick_reference_nodes(const SearchTree& tree, const Grader& grader,
                                                  const SearchConfig& config);
std::optional<ReasoningPath> pick_reference(const SearchTree& tree, const Grader& grader,
                                            const SearchConfig& config);

// Every terminal path whose final answer grades incorrect, in depth-first
// child-index order: tree branches first at each node, then retained rollout
// completions (when config.mine_rollouts is set). May contain duplicates.
std::vector<ReasoningPath> collect_incorrect_paths(const SearchTree& tree, const Grader& grader,
                                                   const SearchConfig& config);

// Longest common prefix split on step-text equality. Throws
// std::invalid_argument when the paths coincide or one contains the other.
// lca_node_id is left at -1; tree-aware callers fill it in.
DivergencePair find_divergence(const ReasoningPath& reference, const ReasoningPath& wrong);

// Positive sample with the canonical critique. Throws std::invalid_argument
// when the path does not grade correct.
CritiqueSample build_positive(const Question& question, const ReasoningPath& correct,
                              const Grader& grader);

// Negative sample: answer path = shared_prefix ++ branch_b, critique from the
// annotator (already redacted). Annotator errors propagate.
CritiqueSample build_negative(const Question& question, const DivergencePair& pair,
                              TextBackend& backend);

// Full per-tree mining pass; annotator failures skip the sample and count.
std::vector<CritiqueSample> mine_tree(const SearchTree& tree, TextBackend& backend,
                                      const Grader& grader, const SearchConfig& config,
                                      MiningStats& stats);

}  // namespace treecrit
