#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "dimscale/estimation.hpp"
#include "dimscale/types.hpp"

namespace dimscale {

struct ClusteringStep {
  std::size_t step_index = 0;            // 1..J-1
  std::pair<int, int> merged_pair{0, 0};  // group positions in the previous partition
  ItemPartition partition;               // after the merge
  FitResult fit;
  // 2 * (loglik of the initial s=J model - loglik of this step's model);
  // nonnegative up to EM slack.
  double deviance_from_initial = 0.0;
};

struct ClusteringPath {
  FitResult initial_fit;  // s = J model
  std::vector<ClusteringStep> steps;
  std::optional<std::size_t> selected_step;  // index into steps, set by cut_by_min_bic

  std::size_t n_items() const { return initial_fit.partition.n_items(); }
  // Structural checks: J-1 steps, each partition refines into the next by
  // exactly one merge. Throws std::logic_error on violation.
  void validate() const;
};

// Binary merge tree over item leaves. Nodes 0..J-1 are leaves (item indices),
// node J-1+t is the internal node created at step t. `height` is the running
// maximum of the raw per-step deviances, so heights are nondecreasing
// root-ward; raw decreases beyond 1e-6 are counted as diagnostics.
struct DendrogramNode {
  int left = -1;
  int right = -1;
  double raw_height = 0.0;
  double height = 0.0;
};

struct Dendrogram {
  std::size_t n_leaves = 0;
  std::vector<DendrogramNode> nodes;  // size 2J-1
  std::vector<int> leaf_order;        // display order, left to right
  std::size_t raw_monotonicity_violations = 0;

  bool is_leaf(int node) const { return node < static_cast<int>(n_leaves); }
};

// All unordered pairs of current groups in lexicographic order; empty when
// the partition has a single group (terminal state).
std::vector<std::pair<int, int>> candidate_merges(const ItemPartition& partition);

// Fits one model per candidate merge. All candidates share a parameter count,
// so the LR-best merge is the one with maximal fitted log-likelihood; ties
// break to the lexicographically smallest pair. `warm_parent`, when given,
// seeds each candidate with the parent fit's parameters (merged theta column
// = item-count-weighted average of the two parents) ahead of the standard
// multi-start.
ClusteringStep best_merge(const ResponseMatrix& matrix, std::size_t k,
                          const ItemPartition& partition, const EmConfig& config,
                          const FitResult* warm_parent = nullptr);

// Full hierarchical search: fit the s=J singleton model, then apply the best
// merge J-1 times down to s=1, recording deviance and information criteria
// per step. Non-converged candidate fits are kept and flagged, never fatal.
ClusteringPath run_clustering(const ResponseMatrix& matrix, std::size_t k,
                              const EmConfig& config = {});

Dendrogram build_dendrogram(const ClusteringPath& path);

namespace detail {

// Seed of the fit for candidate `candidate_index` at step `step_index`;
// exposed so tests can re-fit candidates bit-identically.
std::uint64_t candidate_seed(std::uint64_t seed, std::size_t step_index,
                             std::size_t candidate_index);

}  // namespace detail

}  // namespace dimscale
