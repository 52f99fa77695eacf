#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dimscale/types.hpp"

namespace dimscale {

struct SimulationSpec {
  std::size_t n_respondents = 0;
  ModelParameters true_parameters;
  ItemPartition true_partition;
  std::uint64_t seed = 0;
  std::vector<std::string> item_ids;  // defaults to item01.. when empty

  void validate() const;

  // Default model for quick synthetic runs: near-equal contiguous groups,
  // uniform weights, spread difficulties, cycled discriminations, and
  // sign-alternating ability columns so dimensions are distinguishable.
  static SimulationSpec default_spec(std::size_t n, std::size_t n_items, std::size_t k,
                                     std::size_t s, std::uint64_t seed);
};

// One substream per respondent: draw class c ~ pi, then each item
// independently Bernoulli(lambda_{j|c}). Reproducible for a fixed seed.
ResponseMatrix generate(const SimulationSpec& spec);

// Independent oracle for the mixture likelihood: per-row direct summation
// over classes with naive long double products, no log-sum-exp. Guarded to
// k <= 8, J <= 12.
double brute_force_loglik(const ModelParameters& params, const ItemPartition& partition,
                          const ResponseMatrix& matrix);

// Adjusted Rand Index over item co-membership; 1.0 iff the partitions are
// identical up to group relabeling. Symmetric in its arguments.
double partition_recovery_score(const ItemPartition& truth, const ItemPartition& estimate);

}  // namespace dimscale
