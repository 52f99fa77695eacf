#include "dimscale/simulate.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dimscale/model.hpp"
#include "dimscale/rng.hpp"

namespace dimscale {

namespace {

std::vector<std::string> default_item_ids(std::size_t n_items) {
  std::vector<std::string> ids;
  ids.reserve(n_items);
  for (std::size_t j = 0; j < n_items; ++j) {
    std::ostringstream id;
    id << "item" << (j + 1 < 10 ? "0" : "") << j + 1;
    ids.push_back(id.str());
  }
  return ids;
}

double binom2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

void SimulationSpec::validate() const {
  if (n_respondents == 0) throw std::invalid_argument("SimulationSpec: n_respondents must be >= 1");
  true_parameters.validate(true_partition);
  if (!item_ids.empty() && item_ids.size() != true_partition.n_items())
    throw std::invalid_argument("SimulationSpec: item id count does not match J");
}

SimulationSpec SimulationSpec::default_spec(std::size_t n, std::size_t n_items, std::size_t k,
                                            std::size_t s, std::uint64_t seed) {
  if (n_items < 1 || s < 1 || s > n_items || k < 1)
    throw std::invalid_argument("default_spec: requires 1 <= s <= J and k >= 1");
  // Contiguous near-equal groups.
  std::vector<std::vector<int>> groups(s);
  for (std::size_t j = 0; j < n_items; ++j)
    groups[j * s / n_items].push_back(static_cast<int>(j));
  ItemPartition partition(std::move(groups), n_items);

  ModelParameters params;
  params.class_weights.assign(k, 1.0 / static_cast<double>(k));
  params.abilities = Matrix(k, s, 0.0);
  for (std::size_t c = 1; c < k; ++c) {
    const double level = 2.0 * static_cast<double>(c) / static_cast<double>(std::max<std::size_t>(k - 1, 1));
    for (std::size_t d = 0; d < s; ++d) {
      // Alternate signs by dimension so ability columns differ and the
      // dimensional structure is identifiable from the data.
      const double sign = (d + c) % 2 == 0 ? 1.0 : -1.0;
      params.abilities(c, d) = sign * (level + 0.5 * static_cast<double>(d % 3));
    }
  }
  params.difficulties.resize(n_items);
  params.discriminations.resize(n_items);
  const double gamma_cycle[] = {1.3, 0.8, 1.7, 1.1, 1.5, 0.9};
  for (std::size_t j = 0; j < n_items; ++j) {
    params.difficulties[j] = -1.2 + 2.4 * static_cast<double>(j) /
                                        static_cast<double>(std::max<std::size_t>(n_items - 1, 1));
    params.discriminations[j] = gamma_cycle[j % 6];
  }
  for (std::size_t d = 0; d < s; ++d) params.discriminations[partition.reference_item(d)] = 1.0;

  SimulationSpec spec;
  spec.n_respondents = n;
  spec.true_parameters = std::move(params);
  spec.true_partition = std::move(partition);
  spec.seed = seed;
  spec.item_ids = default_item_ids(n_items);
  return spec;
}

ResponseMatrix generate(const SimulationSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_respondents;
  const std::size_t j_count = spec.true_partition.n_items();
  const std::size_t k = spec.true_parameters.n_classes();

  // Conditional success probabilities per class, from the model equation.
  Matrix lambda(k, j_count);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < j_count; ++j)
      lambda(c, j) = success_probability(spec.true_parameters, spec.true_partition, j, c);
  }

  std::vector<std::uint8_t> cells(n * j_count);
  for (std::size_t r = 0; r < n; ++r) {
    Rng rng(substream_seed(spec.seed, r));  // one substream per respondent
    const std::size_t c = rng.categorical(spec.true_parameters.class_weights);
    for (std::size_t j = 0; j < j_count; ++j)
      cells[r * j_count + j] = rng.bernoulli(lambda(c, j)) ? 1 : 0;
  }
  auto ids = spec.item_ids.empty() ? default_item_ids(j_count) : spec.item_ids;
  return ResponseMatrix(std::move(ids), std::move(cells), n);
}

double brute_force_loglik(const ModelParameters& params, const ItemPartition& partition,
                          const ResponseMatrix& matrix) {
  const std::size_t k = params.n_classes();
  const std::size_t j_count = matrix.n_items();
  if (k > 8 || j_count > 12)
    throw std::invalid_argument("brute_force_loglik: guarded to k <= 8 and J <= 12");
  if (j_count != params.n_items())
    throw std::invalid_argument("brute_force_loglik: item count mismatch");

  long double total = 0.0L;
  for (std::size_t r = 0; r < matrix.n_respondents(); ++r) {
    long double row_likelihood = 0.0L;
    for (std::size_t c = 0; c < k; ++c) {
      long double product = static_cast<long double>(params.class_weights[c]);
      for (std::size_t j = 0; j < j_count; ++j) {
        const long double lambda = success_probability(params, partition, j, c);
        product *= matrix(r, j) ? lambda : 1.0L - lambda;
      }
      row_likelihood += product;
    }
    total += std::log(row_likelihood);
  }
  return static_cast<double>(total);
}

double partition_recovery_score(const ItemPartition& truth, const ItemPartition& estimate) {
  if (truth.n_items() != estimate.n_items())
    throw std::invalid_argument("partition_recovery_score: item counts differ");
  const std::size_t n = truth.n_items();
  if (n < 2) return 1.0;  // single item: both partitions are {{0}}
  const std::size_t ga = truth.n_groups();
  const std::size_t gb = estimate.n_groups();

  // Contingency table over co-membership.
  Matrix table(ga, gb, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    table(truth.dimension_of(j), estimate.dimension_of(j)) += 1.0;

  double sum_cells = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (std::size_t a = 0; a < ga; ++a) {
    double row_total = 0.0;
    for (std::size_t b = 0; b < gb; ++b) {
      sum_cells += binom2(table(a, b));
      row_total += table(a, b);
    }
    sum_a += binom2(row_total);
  }
  for (std::size_t b = 0; b < gb; ++b) {
    double col_total = 0.0;
    for (std::size_t a = 0; a < ga; ++a) col_total += table(a, b);
    sum_b += binom2(col_total);
  }
  const double expected = sum_a * sum_b / binom2(static_cast<double>(n));
  const double maximum = 0.5 * (sum_a + sum_b);
  if (maximum == expected) {
    // Both partitions are trivial in the same way, hence identical.
    return 1.0;
  }
  return (sum_cells - expected) / (maximum - expected);
}

}  // namespace dimscale
