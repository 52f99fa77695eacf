#pragma once

#include <span>
#include <vector>

#include "dimscale/types.hpp"

namespace dimscale {

// Conditional probabilities are clamped into [kLambdaFloor, 1 - kLambdaFloor]
// so likelihood evaluation never takes log(0) on degenerate data.
inline constexpr double kLambdaFloor = 1e-12;

// logit(lambda_{j|c}) = gamma_j * (theta_{c,d(j)} - beta_j)
double success_probability(const ModelParameters& params, const ItemPartition& partition,
                           std::size_t item, std::size_t latent_class);

// log sum_c pi_c prod_j lambda^{x_j} (1-lambda)^{1-x_j}, log-sum-exp over
// classes. Row must be fully observed 0/1.
double pattern_log_likelihood(const ModelParameters& params, const ItemPartition& partition,
                              std::span<const std::uint8_t> row);

// Sum of pattern_log_likelihood over rows; identical rows are aggregated by
// pattern multiplicity, which leaves the result unchanged to 1e-10.
double dataset_log_likelihood(const ModelParameters& params, const ItemPartition& partition,
                              const ResponseMatrix& matrix);

// Posterior class membership for one row, normalized to sum 1. Computed in
// log space; never returns NaN.
std::vector<double> posterior_class_probabilities(const ModelParameters& params,
                                                  const ItemPartition& partition,
                                                  std::span<const std::uint8_t> row);

// Dimension frequency: lambda_bar_d = sum_c pi_c * mean_{j in d} lambda_{j|c}.
// Entries lie in (0,1) and need not sum to 1.
std::vector<double> dimension_frequency(const ModelParameters& params,
                                        const ItemPartition& partition);

namespace numeric {

double logistic(double x);
double logit(double p);
double log_sum_exp(std::span<const double> v);
double softplus(double x);  // log(1 + e^x), overflow-safe

}  // namespace numeric

}  // namespace dimscale
