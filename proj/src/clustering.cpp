#include "dimscale/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dimscale/parallel.hpp"
#include "dimscale/rng.hpp"
#include "dimscale/selection.hpp"

namespace dimscale {

namespace {

constexpr double kHeightSlack = 1e-6;

// Warm parameters for the candidate that merges groups a and b of the parent
// partition: the merged theta column is the item-count-weighted average of
// the parents', everything else carries over. Column bookkeeping mirrors
// ItemPartition::merged (group hi removed, group lo replaced by the union).
ModelParameters warm_start_for_merge(const FitResult& parent, std::size_t a, std::size_t b) {
  const auto& partition = parent.partition;
  const std::size_t k = parent.parameters.n_classes();
  const std::size_t lo = std::min(a, b);
  const std::size_t hi = std::max(a, b);
  const double w_lo = static_cast<double>(partition.group(lo).size());
  const double w_hi = static_cast<double>(partition.group(hi).size());

  ModelParameters warm = parent.parameters;
  warm.abilities = Matrix(k, partition.n_groups() - 1, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t out = 0;
    for (std::size_t d = 0; d < partition.n_groups(); ++d) {
      if (d == hi) continue;
      warm.abilities(c, out++) =
          d == lo ? (w_lo * parent.parameters.abilities(c, lo) +
                     w_hi * parent.parameters.abilities(c, hi)) /
                        (w_lo + w_hi)
                  : parent.parameters.abilities(c, d);
    }
  }
  // The union keeps the lower-indexed reference item; the other parent's
  // reference discrimination (1.0) simply becomes a free parameter.
  return warm;
}

ClusteringStep best_merge_impl(const PatternData& data, std::size_t k,
                               const ItemPartition& partition, const EmConfig& config,
                               const FitResult* warm_parent, std::size_t step_index,
                               std::optional<double> initial_loglik) {
  const auto candidates = candidate_merges(partition);
  if (candidates.empty())
    throw std::invalid_argument("best_merge: partition already has a single group");

  std::vector<FitResult> fits(candidates.size());
  std::vector<ItemPartition> partitions;
  partitions.reserve(candidates.size());
  for (const auto& [a, b] : candidates) partitions.push_back(partition.merged(a, b));

  parallel_for(candidates.size(), config.n_threads, [&](std::size_t i) {
    EmConfig candidate_config = config;
    candidate_config.seed = detail::candidate_seed(config.seed, step_index, i);
    candidate_config.n_threads = 1;
    std::vector<ModelParameters> warm;
    if (warm_parent != nullptr) {
      warm.push_back(warm_start_for_merge(*warm_parent, candidates[i].first, candidates[i].second));
    }
    fits[i] = detail::fit_patterns(data, partitions[i], k, candidate_config, warm);
  });

  // Same parameter count everywhere, so the LR-best candidate is the one
  // with maximal log-likelihood; enumeration order is lexicographic, which
  // settles ties toward the smallest pair.
  std::size_t best = 0;
  for (std::size_t i = 1; i < fits.size(); ++i) {
    if (fits[i].log_likelihood > fits[best].log_likelihood) best = i;
  }

  ClusteringStep step;
  step.step_index = step_index;
  step.merged_pair = candidates[best];
  step.partition = partitions[best];
  step.fit = fits[best];
  step.deviance_from_initial =
      initial_loglik ? 2.0 * (*initial_loglik - fits[best].log_likelihood) : 0.0;
  return step;
}

}  // namespace

namespace detail {

std::uint64_t candidate_seed(std::uint64_t seed, std::size_t step_index,
                             std::size_t candidate_index) {
  return substream_seed(substream_seed(seed, step_index), candidate_index);
}

}  // namespace detail

void ClusteringPath::validate() const {
  const std::size_t j = n_items();
  if (initial_fit.partition.n_groups() != j)
    throw std::logic_error("ClusteringPath: initial model must have one group per item");
  if (steps.size() != j - 1)
    throw std::logic_error("ClusteringPath: expected J-1 steps");
  const ItemPartition* previous = &initial_fit.partition;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto& step = steps[t];
    if (step.step_index != t + 1) throw std::logic_error("ClusteringPath: step indices must be 1..J-1");
    if (step.partition.n_groups() != j - (t + 1))
      throw std::logic_error("ClusteringPath: group count must drop by one per step");
    const auto [a, b] = step.merged_pair;
    if (previous->merged(a, b).groups() != step.partition.groups())
      throw std::logic_error("ClusteringPath: step partition is not the recorded merge of its parent");
    previous = &step.partition;
  }
}

std::vector<std::pair<int, int>> candidate_merges(const ItemPartition& partition) {
  const int g = static_cast<int>(partition.n_groups());
  std::vector<std::pair<int, int>> pairs;
  if (g < 2) return pairs;
  pairs.reserve(static_cast<std::size_t>(g) * (g - 1) / 2);
  for (int a = 0; a < g; ++a) {
    for (int b = a + 1; b < g; ++b) pairs.emplace_back(a, b);
  }
  return pairs;
}

ClusteringStep best_merge(const ResponseMatrix& matrix, std::size_t k,
                          const ItemPartition& partition, const EmConfig& config,
                          const FitResult* warm_parent) {
  if (partition.n_groups() < 2)
    throw std::invalid_argument("best_merge: needs at least two groups");
  const auto data = PatternData::from_matrix(matrix);
  return best_merge_impl(data, k, partition, config, warm_parent, 1, std::nullopt);
}

ClusteringPath run_clustering(const ResponseMatrix& matrix, std::size_t k,
                              const EmConfig& config) {
  const std::size_t j = matrix.n_items();
  if (j < 2) throw std::invalid_argument("run_clustering: needs at least two items");
  config.validate();
  const auto data = PatternData::from_matrix(matrix);

  ClusteringPath path;
  path.initial_fit =
      detail::fit_patterns(data, ItemPartition::singletons(j), k, config, {});
  const double initial_ll = path.initial_fit.log_likelihood;

  const FitResult* parent = &path.initial_fit;
  for (std::size_t t = 1; t < j; ++t) {
    path.steps.push_back(
        best_merge_impl(data, k, parent->partition, config, parent, t, initial_ll));
    parent = &path.steps.back().fit;
  }
  return path;
}

Dendrogram build_dendrogram(const ClusteringPath& path) {
  path.validate();
  const std::size_t j = path.n_items();

  Dendrogram tree;
  tree.n_leaves = j;
  tree.nodes.resize(2 * j - 1);

  // node_of[d] = dendrogram node currently representing group d of the
  // partition at hand; starts as the leaves of the singleton model.
  std::vector<int> node_of(j);
  for (std::size_t d = 0; d < j; ++d) node_of[d] = static_cast<int>(d);

  double running_max = 0.0;
  for (const auto& step : path.steps) {
    const auto [a, b] = step.merged_pair;
    const int id = static_cast<int>(j - 1 + step.step_index);
    const double raw = step.deviance_from_initial;
    if (raw < running_max - kHeightSlack) ++tree.raw_monotonicity_violations;
    running_max = std::max(running_max, raw);
    tree.nodes[id] = {node_of[a], node_of[b], raw, running_max};
    // Mirror ItemPartition::merged: group b's slot disappears, the union
    // stays at min(a, b) since canonical order sorts by smallest member.
    node_of[std::min(a, b)] = id;
    node_of.erase(node_of.begin() + std::max(a, b));
  }

  // Left-to-right leaf order by in-order traversal from the roots (a single
  // root when the path runs to s=1).
  tree.leaf_order.reserve(j);
  std::vector<int> stack(node_of.rbegin(), node_of.rend());
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    if (tree.is_leaf(node)) {
      tree.leaf_order.push_back(node);
    } else {
      stack.push_back(tree.nodes[node].right);
      stack.push_back(tree.nodes[node].left);
    }
  }
  return tree;
}

}  // namespace dimscale
