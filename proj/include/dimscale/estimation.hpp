#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dimscale/types.hpp"

namespace dimscale {

struct EmConfig {
  std::size_t max_iterations = 5000;
  double rel_tolerance = 1e-8;  // on relative log-likelihood change
  std::size_t n_starts = 5;
  std::uint64_t seed = 0;
  std::size_t m_step_max_newton = 25;
  double m_step_tolerance = 1e-10;
  unsigned n_threads = 1;  // 0 = hardware concurrency

  void validate() const;  // tolerances > 0, n_starts >= 1
};

// Rows aggregated by distinct response pattern; the likelihood is unchanged
// and EM cost drops from O(N) to O(#patterns) per sweep.
struct PatternData {
  std::size_t n_items = 0;
  double n_total = 0.0;                 // sum of weights = N
  std::vector<double> weights;          // multiplicity per pattern
  std::vector<std::vector<int>> ones;   // per pattern: items answered 1
  std::vector<double> item_means;

  static PatternData from_matrix(const ResponseMatrix& matrix);
  std::size_t n_patterns() const { return weights.size(); }
};

// Deterministic start (index 0): uniform weights, beta_j = -logit(item mean),
// gamma_j = 1, abilities on an equally spaced grid anchored at theta_{1d} = 0.
// Start index >= 1 perturbs it with seeded noise (theta sd 0.5, beta sd 0.2).
ModelParameters initialize(const ResponseMatrix& matrix, const ItemPartition& partition,
                           std::size_t k, std::size_t start_index, std::uint64_t seed);

// One EM sweep: E-step posteriors per aggregated pattern, M-step with
// closed-form weights and per-block Newton-Raphson (items jointly in
// (beta_j, gamma_j), abilities per free theta_cd) with step-halving.
// Returns updated parameters and their log-likelihood.
std::pair<ModelParameters, double> em_step(const ModelParameters& params,
                                           const ItemPartition& partition,
                                           const ResponseMatrix& matrix);

// Multi-start EM. Returns the best chain by final log-likelihood (ties to the
// lowest start index); converged = false when no chain met rel_tolerance.
FitResult fit(const ResponseMatrix& matrix, const ItemPartition& partition, std::size_t k,
              const EmConfig& config = {});

// Free parameters under the anchoring scheme:
// (k-1) weights + (k-1)*s abilities + J difficulties + (J-s) discriminations.
std::size_t parameter_count(std::size_t n_items, std::size_t n_classes, std::size_t n_dimensions);

namespace detail {

// Multi-start driver shared by fit() and the clustering search. Warm-start
// parameter sets, when given, run as the first chains (start_index 0..).
FitResult fit_patterns(const PatternData& patterns, const ItemPartition& partition,
                       std::size_t k, const EmConfig& config,
                       const std::vector<ModelParameters>& warm_starts);

ModelParameters initialize_patterns(const PatternData& patterns, const ItemPartition& partition,
                                    std::size_t k, std::size_t start_index, std::uint64_t seed);

}  // namespace detail

}  // namespace dimscale
