#include <doctest.h>

#include <cmath>

#include "dimscale/model.hpp"
#include "dimscale/serialize.hpp"
#include "dimscale/simulate.hpp"
#include "test_support.hpp"

using namespace dimscale;

TEST_CASE("generate: degenerate Bernoulli produces constant columns") {
  // lambda pinned at the ceiling via beta at the box edge
  SimulationSpec spec;
  spec.n_respondents = 20;
  spec.seed = 1;
  spec.true_partition = ItemPartition::singletons(2);
  spec.true_parameters.class_weights = {1.0};
  spec.true_parameters.abilities = Matrix(1, 2, 0.0);
  spec.true_parameters.difficulties = {-35.0, -35.0};
  spec.true_parameters.discriminations = {1.0, 1.0};
  const auto matrix = generate(spec);
  for (std::size_t r = 0; r < 20; ++r) {
    CHECK(matrix(r, 0) == 1);
    CHECK(matrix(r, 1) == 1);
  }
}

TEST_CASE("generate: sample mean tracks lambda at binomial scale") {
  SimulationSpec spec;
  spec.n_respondents = 10000;
  spec.seed = 9;
  spec.true_partition = ItemPartition::singletons(1);
  spec.true_parameters.class_weights = {1.0};
  spec.true_parameters.abilities = Matrix(1, 1, 0.0);
  spec.true_parameters.difficulties = {-numeric::logit(0.3)};
  spec.true_parameters.discriminations = {1.0};
  const auto matrix = generate(spec);
  CHECK(std::abs(matrix.item_mean(0) - 0.3) < 0.015);  // ~3 sigma
}

TEST_CASE("generate: class draws respect the weights") {
  // one item acting as a near-perfect class indicator
  SimulationSpec spec;
  spec.n_respondents = 10000;
  spec.seed = 17;
  spec.true_partition = ItemPartition::singletons(1);
  spec.true_parameters.class_weights = {0.3, 0.7};
  spec.true_parameters.abilities = Matrix(2, 1, 0.0);
  spec.true_parameters.abilities(1, 0) = 40.0;
  spec.true_parameters.difficulties = {20.0};  // class 1 -> lambda ~ 2e-9, class 2 -> ~1
  spec.true_parameters.discriminations = {1.0};
  const auto matrix = generate(spec);
  const double sigma = std::sqrt(0.3 * 0.7 / 10000.0);
  CHECK(std::abs(matrix.item_mean(0) - 0.7) < 4.0 * sigma);
}

TEST_CASE("generate is reproducible") {
  const auto spec = SimulationSpec::default_spec(100, 6, 2, 2, 77);
  const auto a = generate(spec);
  const auto b = generate(spec);
  CHECK(matrix_to_csv(a) == matrix_to_csv(b));

  auto other = spec;
  other.seed = 78;
  CHECK(matrix_to_csv(generate(other)) != matrix_to_csv(a));
}

TEST_CASE("SimulationSpec validation rejects a non-simplex weight vector") {
  auto spec = SimulationSpec::default_spec(10, 4, 2, 2, 1);
  spec.true_parameters.class_weights = {0.6, 0.6};
  CHECK_THROWS(spec.validate());
}

TEST_CASE("brute_force_loglik guards and basics") {
  Rng rng(3);
  const auto big = test::random_matrix(rng, 5, 13);
  const auto params13 = test::random_parameters(rng, ItemPartition::singletons(13), 1);
  CHECK_THROWS(brute_force_loglik(params13, ItemPartition::singletons(13), big));

  const auto small = test::random_matrix(rng, 5, 2);
  const auto params9 = test::random_parameters(rng, ItemPartition::singletons(2), 9);
  CHECK_THROWS(brute_force_loglik(params9, ItemPartition::singletons(2), small));

  // single Bernoulli pmf
  const auto one = ResponseMatrix::from_rows({"a"}, {{1}});
  ModelParameters params;
  params.class_weights = {1.0};
  params.abilities = Matrix(1, 1, 0.0);
  params.difficulties = {-numeric::logit(0.25)};
  params.discriminations = {1.0};
  CHECK(brute_force_loglik(params, ItemPartition::singletons(1), one) ==
        doctest::Approx(std::log(0.25)).epsilon(1e-13));

  // mixture symmetry under label permutation
  const auto partition = test::random_partition(rng, 4, 2);
  auto mixed = test::random_parameters(rng, partition, 3);
  const auto rows = test::random_matrix(rng, 10, 4);
  const double base = brute_force_loglik(mixed, partition, rows);
  std::swap(mixed.class_weights[1], mixed.class_weights[2]);
  for (std::size_t d = 0; d < partition.n_groups(); ++d)
    std::swap(mixed.abilities(1, d), mixed.abilities(2, d));
  CHECK(brute_force_loglik(mixed, partition, rows) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("partition_recovery_score") {
  const auto p1 = ItemPartition({{0, 1}, {2, 3}}, 4);
  CHECK(partition_recovery_score(p1, p1) == 1.0);
  CHECK(partition_recovery_score(p1, ItemPartition({{2, 3}, {0, 1}}, 4)) == 1.0);

  // maximally disagreeing trivial partitions score <= 0
  const auto singles = ItemPartition::singletons(4);
  const auto lump = ItemPartition::single_group(4);
  CHECK(partition_recovery_score(singles, lump) <= 0.0);

  // hand computation for {01|23} vs {02|13}: every contingency cell is 1,
  // so ARI = (0 - 2*2/6) / (2 - 2*2/6) = -0.5
  const auto crossed = ItemPartition({{0, 2}, {1, 3}}, 4);
  CHECK(partition_recovery_score(p1, crossed) == doctest::Approx(-0.5).epsilon(1e-14));

  // symmetry
  Rng rng(10);
  for (int rep = 0; rep < 30; ++rep) {
    const auto a = test::random_partition(rng, 6, 4);
    const auto b = test::random_partition(rng, 6, 4);
    CHECK(partition_recovery_score(a, b) ==
          doctest::Approx(partition_recovery_score(b, a)).epsilon(1e-14));
  }

  CHECK_THROWS(partition_recovery_score(p1, ItemPartition::singletons(5)));
  // identical trivial partitions (degenerate denominator)
  CHECK(partition_recovery_score(singles, singles) == 1.0);
  CHECK(partition_recovery_score(lump, lump) == 1.0);
}

TEST_CASE("simulation spec JSON round-trip") {
  const auto spec = SimulationSpec::default_spec(50, 5, 3, 2, 123);
  const auto restored = simulation_spec_from_json(simulation_spec_to_json(spec));
  CHECK(restored.n_respondents == spec.n_respondents);
  CHECK(restored.seed == spec.seed);
  CHECK(restored.true_partition.groups() == spec.true_partition.groups());
  CHECK(restored.true_parameters.class_weights == spec.true_parameters.class_weights);
  CHECK(restored.true_parameters.abilities == spec.true_parameters.abilities);
  CHECK(matrix_to_csv(generate(restored)) == matrix_to_csv(generate(spec)));
}
