#include "dimscale/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dimscale {

namespace numeric {

double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace numeric

namespace {

void check_row(std::span<const std::uint8_t> row, std::size_t n_items) {
  if (row.size() != n_items)
    throw std::invalid_argument("row length does not match the item count");
  for (std::uint8_t v : row) {
    if (v != 0 && v != 1) throw std::invalid_argument("row entries must be exactly 0 or 1");
  }
}

// Per-class log-likelihood of one fully observed row.
double class_row_loglik(const ModelParameters& params, const ItemPartition& partition,
                        std::span<const std::uint8_t> row, std::size_t c) {
  double acc = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double lambda = success_probability(params, partition, j, c);
    acc += row[j] ? std::log(lambda) : std::log1p(-lambda);
  }
  return acc;
}

std::vector<double> class_log_joint(const ModelParameters& params, const ItemPartition& partition,
                                    std::span<const std::uint8_t> row) {
  const std::size_t k = params.n_classes();
  std::vector<double> logp(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double pi = params.class_weights[c];
    logp[c] = (pi > 0.0 ? std::log(pi) : -std::numeric_limits<double>::infinity()) +
              class_row_loglik(params, partition, row, c);
  }
  return logp;
}

}  // namespace

double success_probability(const ModelParameters& params, const ItemPartition& partition,
                           std::size_t item, std::size_t latent_class) {
  if (item >= params.n_items()) throw std::out_of_range("success_probability: item out of range");
  if (latent_class >= params.n_classes())
    throw std::out_of_range("success_probability: class out of range");
  const std::size_t d = partition.dimension_of(item);
  const double eta = params.discriminations[item] *
                     (params.abilities(latent_class, d) - params.difficulties[item]);
  return std::clamp(numeric::logistic(eta), kLambdaFloor, 1.0 - kLambdaFloor);
}

double pattern_log_likelihood(const ModelParameters& params, const ItemPartition& partition,
                              std::span<const std::uint8_t> row) {
  check_row(row, params.n_items());
  const auto logp = class_log_joint(params, partition, row);
  return numeric::log_sum_exp(logp);
}

double dataset_log_likelihood(const ModelParameters& params, const ItemPartition& partition,
                              const ResponseMatrix& matrix) {
  if (matrix.n_items() != params.n_items()) {
    std::ostringstream msg;
    msg << "dataset_log_likelihood: matrix has " << matrix.n_items() << " items, parameters have "
        << params.n_items();
    throw std::invalid_argument(msg.str());
  }
  // Aggregate identical rows; first-occurrence order keeps the reduction
  // deterministic.
  std::map<std::vector<std::uint8_t>, double> counts;
  std::vector<const std::vector<std::uint8_t>*> order;
  for (std::size_t r = 0; r < matrix.n_respondents(); ++r) {
    const auto row = matrix.row(r);
    std::vector<std::uint8_t> key(row.begin(), row.end());
    auto [it, inserted] = counts.try_emplace(std::move(key), 0.0);
    it->second += 1.0;
    if (inserted) order.push_back(&it->first);
  }
  double total = 0.0;
  for (const auto* pattern : order) {
    total += counts.at(*pattern) * pattern_log_likelihood(params, partition, *pattern);
  }
  return total;
}

std::vector<double> posterior_class_probabilities(const ModelParameters& params,
                                                  const ItemPartition& partition,
                                                  std::span<const std::uint8_t> row) {
  check_row(row, params.n_items());
  auto logp = class_log_joint(params, partition, row);
  const double lse = numeric::log_sum_exp(logp);
  std::vector<double> post(logp.size());
  if (!std::isfinite(lse)) {
    // All classes underflowed (possible only with zero weights); fall back to
    // the prior so the result is still a probability vector.
    return params.class_weights;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < post.size(); ++c) {
    post[c] = std::exp(logp[c] - lse);
    total += post[c];
  }
  for (double& p : post) p /= total;
  return post;
}

std::vector<double> dimension_frequency(const ModelParameters& params,
                                        const ItemPartition& partition) {
  const std::size_t s = partition.n_groups();
  const std::size_t k = params.n_classes();
  std::vector<double> freq(s, 0.0);
  for (std::size_t d = 0; d < s; ++d) {
    for (std::size_t c = 0; c < k; ++c) {
      double mean = 0.0;
      for (int j : partition.group(d)) mean += success_probability(params, partition, j, c);
      mean /= static_cast<double>(partition.group(d).size());
      freq[d] += params.class_weights[c] * mean;
    }
  }
  return freq;
}

}  // namespace dimscale
