#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dimscale/model.hpp"
#include "dimscale/simulate.hpp"
#include "test_support.hpp"

using namespace dimscale;

namespace {

// Minimal one-dimension setup where lambda can be dialled directly:
// singleton partition, gamma = 1 on the reference item.
struct Scalar2pl {
  ItemPartition partition = ItemPartition::singletons(1);
  ModelParameters params;

  Scalar2pl(double beta, double theta2 = 0.0, std::size_t k = 1) {
    params.class_weights.assign(k, 1.0 / static_cast<double>(k));
    params.abilities = Matrix(k, 1, 0.0);
    if (k > 1) params.abilities(1, 0) = theta2;
    params.difficulties = {beta};
    params.discriminations = {1.0};
  }
};

}  // namespace

TEST_CASE("ResponseMatrix validates cells and ids") {
  CHECK_THROWS(ResponseMatrix({"a", "b"}, {0, 1, 2, 0}, 2));      // non-binary cell
  CHECK_THROWS(ResponseMatrix({"a", "a"}, {0, 1, 1, 0}, 2));      // duplicate ids
  CHECK_THROWS(ResponseMatrix({"a"}, {}, 0));                     // empty
  CHECK_THROWS(ResponseMatrix({"a", "b"}, {0, 1, 1}, 2));         // cell count mismatch
  const auto m = ResponseMatrix::from_rows({"a", "b"}, {{1, 0}, {0, 1}, {1, 1}});
  CHECK(m.n_respondents() == 3);
  CHECK(m.n_items() == 2);
  CHECK(m.item_mean(0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("ItemPartition enforces disjoint exhaustive groups") {
  CHECK_THROWS(ItemPartition({{0, 1}, {1, 2}}, 3));  // overlap
  CHECK_THROWS(ItemPartition({{0, 1}}, 3));          // item 2 uncovered
  CHECK_THROWS(ItemPartition({{0}, {}}, 1));         // empty group
  CHECK_THROWS(ItemPartition({{0, 3}}, 3));          // out of range

  const ItemPartition p({{2, 0}, {1, 3}}, 4);
  CHECK(p.n_groups() == 2);
  CHECK(p.group(0) == std::vector<int>{0, 2});  // canonical: sorted, by min member
  CHECK(p.group(1) == std::vector<int>{1, 3});
  CHECK(p.dimension_of(2) == 0);
  CHECK(p.reference_item(1) == 1);
  CHECK(p.is_reference(0));
  CHECK_FALSE(p.is_reference(3));

  const auto merged = p.merged(0, 1);
  CHECK(merged.n_groups() == 1);
  CHECK(merged.group(0) == std::vector<int>{0, 1, 2, 3});
  CHECK(ItemPartition::singletons(3).n_groups() == 3);
  CHECK(ItemPartition::single_group(3).n_groups() == 1);
}

TEST_CASE("ModelParameters validation") {
  const auto partition = ItemPartition::singletons(2);
  Rng rng(11);
  auto params = test::random_parameters(rng, partition, 2);
  CHECK_NOTHROW(params.validate(partition));

  auto bad_weights = params;
  bad_weights.class_weights[0] += 1e-6;
  CHECK_THROWS(bad_weights.validate(partition));

  auto bad_anchor = params;
  bad_anchor.abilities(0, 1) = 0.3;
  CHECK_THROWS(bad_anchor.validate(partition));

  auto bad_reference = params;
  bad_reference.discriminations[0] = 1.2;  // item 0 is a reference
  CHECK_THROWS(bad_reference.validate(partition));

  auto bad_gamma = params;
  bad_gamma.discriminations[1] = -0.5;
  CHECK_THROWS(bad_gamma.validate(partition));
}

TEST_CASE("success_probability matches the logistic form") {
  // logit 0 => one half
  CHECK(success_probability(Scalar2pl(0.0).params, ItemPartition::singletons(1), 0, 0) ==
        doctest::Approx(0.5).epsilon(1e-15));
  // theta - beta = 0 with gamma = 2 (item 1 is free, item 0 anchors the group)
  {
    ItemPartition joint({{0, 1}}, 2);
    ModelParameters params;
    params.class_weights = {0.5, 0.5};
    params.abilities = Matrix(2, 1, 0.0);
    params.abilities(1, 0) = 1.0;
    params.difficulties = {0.0, 1.0};
    params.discriminations = {1.0, 2.0};
    CHECK(success_probability(params, joint, 1, 1) == doctest::Approx(0.5).epsilon(1e-15));
  }
  // independent scalar evaluation of 1 / (1 + exp(-1.05))
  {
    ItemPartition joint({{0, 1}}, 2);
    ModelParameters params;
    params.class_weights = {0.5, 0.5};
    params.abilities = Matrix(2, 1, 0.0);
    params.abilities(1, 0) = 1.2;
    params.difficulties = {0.0, 0.5};
    params.discriminations = {1.0, 1.5};
    const double expected = 1.0 / (1.0 + std::exp(-1.5 * (1.2 - 0.5)));
    CHECK(success_probability(params, joint, 1, 1) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(expected == doctest::Approx(0.740775).epsilon(1e-6));
  }
  // out-of-range indices
  const Scalar2pl model(0.0);
  CHECK_THROWS_AS((void)success_probability(model.params, model.partition, 1, 0),
                  std::out_of_range);
  CHECK_THROWS_AS((void)success_probability(model.params, model.partition, 0, 5),
                  std::out_of_range);
}

TEST_CASE("success_probability is monotone in theta and beta") {
  Rng rng(42);
  for (int rep = 0; rep < 200; ++rep) {
    ItemPartition joint({{0, 1}}, 2);
    ModelParameters params;
    params.class_weights = {0.5, 0.5};
    params.abilities = Matrix(2, 1, 0.0);
    params.abilities(1, 0) = rng.normal(0.0, 2.0);
    params.difficulties = {rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)};
    params.discriminations = {1.0, 0.2 + 2.0 * rng.uniform01()};

    auto higher_theta = params;
    higher_theta.abilities(1, 0) += 0.5 + rng.uniform01();
    CHECK(success_probability(higher_theta, joint, 1, 1) >
          success_probability(params, joint, 1, 1));

    auto higher_beta = params;
    higher_beta.difficulties[1] += 0.5 + rng.uniform01();
    CHECK(success_probability(higher_beta, joint, 1, 1) <
          success_probability(params, joint, 1, 1));
  }
}

TEST_CASE("pattern_log_likelihood basics") {
  // single Bernoulli at lambda one half
  const Scalar2pl model(0.0);
  const std::vector<std::uint8_t> one{1};
  CHECK(pattern_log_likelihood(model.params, model.partition, one) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-14));

  // mixture of identical components collapses to a single class
  {
    Scalar2pl mix(0.4, 0.0, 2);  // both classes share theta = 0
    Scalar2pl single(0.4);
    CHECK(pattern_log_likelihood(mix.params, mix.partition, one) ==
          doctest::Approx(pattern_log_likelihood(single.params, single.partition, one))
              .epsilon(1e-14));
  }

  // non-binary entries rejected
  const std::vector<std::uint8_t> bad{2};
  CHECK_THROWS_AS((void)pattern_log_likelihood(model.params, model.partition, bad),
                  std::invalid_argument);
  const std::vector<std::uint8_t> short_row{};
  CHECK_THROWS_AS((void)pattern_log_likelihood(model.params, model.partition, short_row),
                  std::invalid_argument);
}

TEST_CASE("pattern_log_likelihood agrees with the brute-force oracle") {
  Rng rng(7);
  const auto partition = test::random_partition(rng, 3, 3);
  const auto params = test::random_parameters(rng, partition, 2);
  const auto matrix = ResponseMatrix::from_rows({"a", "b", "c"}, {{1, 0, 1}});
  const double via_pattern =
      pattern_log_likelihood(params, partition, matrix.row(0));
  const double via_oracle = brute_force_loglik(params, partition, matrix);
  CHECK(via_pattern == doctest::Approx(via_oracle).epsilon(1e-12));
}

TEST_CASE("pattern_log_likelihood is label-swap symmetric") {
  Rng rng(19);
  for (int rep = 0; rep < 50; ++rep) {
    const auto partition = test::random_partition(rng, 4, 3);
    auto params = test::random_parameters(rng, partition, 3);
    std::vector<std::uint8_t> row(4);
    for (auto& x : row) x = rng.bernoulli(0.5);
    const double base = pattern_log_likelihood(params, partition, row);

    // swap classes 2 and 3 in pi and theta (anchored class stays put)
    std::swap(params.class_weights[1], params.class_weights[2]);
    for (std::size_t d = 0; d < partition.n_groups(); ++d)
      std::swap(params.abilities(1, d), params.abilities(2, d));
    CHECK(pattern_log_likelihood(params, partition, row) ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("dataset_log_likelihood additivity and aggregation") {
  const Scalar2pl model(0.7);
  const auto twice = ResponseMatrix::from_rows({"a"}, {{1}, {1}});
  const auto once = ResponseMatrix::from_rows({"a"}, {{1}});
  CHECK(dataset_log_likelihood(model.params, model.partition, twice) ==
        2.0 * dataset_log_likelihood(model.params, model.partition, once));

  // k=1 independence: closed-form per item
  {
    Rng rng(3);
    const auto matrix = test::random_matrix(rng, 30, 4);
    const auto partition = ItemPartition::singletons(4);
    const auto params = test::random_parameters(rng, partition, 1);
    double expected = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      const double lambda = success_probability(params, partition, j, 0);
      double n1 = 0.0;
      for (std::size_t r = 0; r < 30; ++r) n1 += matrix(r, j);
      expected += n1 * std::log(lambda) + (30.0 - n1) * std::log1p(-lambda);
    }
    CHECK(dataset_log_likelihood(params, partition, matrix) ==
          doctest::Approx(expected).epsilon(1e-12));
  }

  // aggregation equals the naive row-by-row sum
  {
    Rng rng(5);
    const auto matrix = test::random_matrix(rng, 50, 3);
    const auto partition = test::random_partition(rng, 3, 2);
    const auto params = test::random_parameters(rng, partition, 2);
    double naive = 0.0;
    for (std::size_t r = 0; r < matrix.n_respondents(); ++r)
      naive += pattern_log_likelihood(params, partition, matrix.row(r));
    CHECK(std::abs(dataset_log_likelihood(params, partition, matrix) - naive) < 1e-10);
  }

  // dimension mismatch
  const auto wide = ResponseMatrix::from_rows({"a", "b"}, {{1, 0}});
  CHECK_THROWS_AS((void)dataset_log_likelihood(model.params, model.partition, wide),
                  std::invalid_argument);
}

TEST_CASE("dataset_log_likelihood matches the oracle on random instances") {
  Rng rng(101);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t j_count = 2 + static_cast<std::size_t>(rng.uniform01() * 2);
    const auto matrix = test::random_matrix(rng, 20, j_count);
    const auto partition = test::random_partition(rng, j_count, j_count);
    const auto params = test::random_parameters(rng, partition, 2);
    const double fast = dataset_log_likelihood(params, partition, matrix);
    const double oracle = brute_force_loglik(params, partition, matrix);
    CHECK(std::abs(fast - oracle) < 1e-10);
  }
}

TEST_CASE("posterior_class_probabilities") {
  // equal likelihoods: posterior equals the prior
  {
    ItemPartition part = ItemPartition::singletons(1);
    ModelParameters params;
    params.class_weights = {0.3, 0.7};
    params.abilities = Matrix(2, 1, 0.0);  // identical classes
    params.difficulties = {0.4};
    params.discriminations = {1.0};
    const std::vector<std::uint8_t> row{1};
    const auto post = posterior_class_probabilities(params, part, row);
    CHECK(post[0] == doctest::Approx(0.3).epsilon(1e-13));
    CHECK(post[1] == doctest::Approx(0.7).epsilon(1e-13));
  }
  // k = 1
  {
    const Scalar2pl model(0.2);
    const std::vector<std::uint8_t> row{0};
    const auto post = posterior_class_probabilities(model.params, model.partition, row);
    REQUIRE(post.size() == 1);
    CHECK(post[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
  // asymmetric two-class case against a direct Bayes computation
  {
    ItemPartition part({{0, 1}}, 2);
    ModelParameters params;
    params.class_weights = {0.4, 0.6};
    params.abilities = Matrix(2, 1, 0.0);
    params.abilities(1, 0) = 1.3;
    params.difficulties = {0.2, -0.5};
    params.discriminations = {1.0, 1.8};
    const std::vector<std::uint8_t> row{1, 0};
    double joint[2];
    for (int c = 0; c < 2; ++c) {
      const double l0 = success_probability(params, part, 0, c);
      const double l1 = success_probability(params, part, 1, c);
      joint[c] = params.class_weights[c] * l0 * (1.0 - l1);
    }
    const auto post = posterior_class_probabilities(params, part, row);
    CHECK(post[0] == doctest::Approx(joint[0] / (joint[0] + joint[1])).epsilon(1e-12));
    CHECK(post[0] + post[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("posterior probabilities are a simplex for random inputs") {
  Rng rng(23);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t j_count = 1 + static_cast<std::size_t>(rng.uniform01() * 5);
    const auto partition = test::random_partition(rng, j_count, j_count);
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform01() * 4);
    const auto params = test::random_parameters(rng, partition, k);
    std::vector<std::uint8_t> row(j_count);
    for (auto& x : row) x = rng.bernoulli(0.5);
    const auto post = posterior_class_probabilities(params, partition, row);
    double total = 0.0;
    for (double p : post) {
      CHECK(p >= 0.0);
      CHECK(std::isfinite(p));
      total += p;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("dimension_frequency") {
  // k=1: plain mean of (0.2, 0.4) is 0.3
  {
    ItemPartition part({{0, 1}}, 2);
    ModelParameters params;
    params.class_weights = {1.0};
    params.abilities = Matrix(1, 1, 0.0);
    params.difficulties = {-numeric::logit(0.2), -numeric::logit(0.4)};
    params.discriminations = {1.0, 1.0};
    const auto freq = dimension_frequency(params, part);
    REQUIRE(freq.size() == 1);
    CHECK(freq[0] == doctest::Approx(0.3).epsilon(1e-12));
  }
  // weighted mean: pi = (0.5, 0.5), per-class means (0.2, 0.6) -> 0.4
  {
    ItemPartition part = ItemPartition::singletons(1);
    ModelParameters params;
    params.class_weights = {0.5, 0.5};
    params.abilities = Matrix(2, 1, 0.0);
    params.difficulties = {-numeric::logit(0.2)};
    params.discriminations = {1.0};
    params.abilities(1, 0) = numeric::logit(0.6) + params.difficulties[0];
    const auto freq = dimension_frequency(params, part);
    CHECK(freq[0] == doctest::Approx(0.4).epsilon(1e-12));
  }
  // k=1 reduces to unweighted per-group means; entries lie in (0,1)
  {
    Rng rng(31);
    const auto partition = test::random_partition(rng, 6, 3);
    const auto params = test::random_parameters(rng, partition, 1);
    const auto freq = dimension_frequency(params, partition);
    for (std::size_t d = 0; d < partition.n_groups(); ++d) {
      double mean = 0.0;
      for (int j : partition.group(d)) mean += success_probability(params, partition, j, 0);
      mean /= static_cast<double>(partition.group(d).size());
      CHECK(freq[d] == doctest::Approx(mean).epsilon(1e-14));
      CHECK(freq[d] > 0.0);
      CHECK(freq[d] < 1.0);
    }
  }
}
