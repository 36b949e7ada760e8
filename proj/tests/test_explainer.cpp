#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "xplain/explainer.hpp"

using namespace xplain;

TEST_CASE("type distribution is normalised over attribute types") {
  const auto schema = AttributeSchema::uniform(3, 4, 3, 5);
  ExplainerModel model(schema, 6);
  RngStream rng(1);
  test_support::randomize(model.params(), rng, 1.5);
  for (int i = 0; i < 50; ++i) {
    const auto x = test_support::random_sample(schema, rng, i % 3);
    const auto p = type_distribution(model, schema, x.features, x.label);
    CHECK(p.size() == 4);
    CHECK(std::abs(test_support::sum(p) - 1.0) <= 1e-12);
    for (double v : p) CHECK(v > 0.0);
  }
}

TEST_CASE("zero weights give a uniform type distribution") {
  const auto schema = AttributeSchema::uniform(2, 5, 2, 3);
  ExplainerModel model(schema, 4);
  const auto p = type_distribution(model, schema, {1.0, 2.0, 3.0}, 1);
  for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(entropy_regularizer(p) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("training candidates bind each type to the sample's own value") {
  const auto schema = AttributeSchema::uniform(3, 3, 4, 2);
  ExplainerModel model(schema, 4);
  RngStream rng(2);
  test_support::randomize(model.params(), rng);
  const auto s = test_support::make_sample({0.5, -1.0}, 2, {3, 0, 2});
  const auto cands = training_candidates(model, schema, s, 1);
  const auto p = type_distribution(model, schema, s.features, 1);
  REQUIRE(cands.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(cands[t].first.type == t);
    CHECK(cands[t].first.value == s.attributes[t]);
    CHECK(cands[t].second == p[t]);
  }
}

TEST_CASE("entropy regularizer handles zeros and point masses") {
  CHECK(entropy_regularizer({1.0, 0.0, 0.0}) == 0.0);
  CHECK(entropy_regularizer({0.5, 0.5}) == doctest::Approx(std::log(2.0)));
  CHECK(entropy_regularizer({0.25, 0.25, 0.5}) == doctest::Approx(1.5 * std::log(2.0)));
}

TEST_CASE("masked x and y reach the explainer as zeros") {
  const auto schema = AttributeSchema::uniform(3, 3, 2, 3);
  ExplainerModel model(schema, 5);
  RngStream rng(3);
  test_support::randomize(model.params(), rng);
  const std::vector<double> big{1e4, -2e4, 3e4};
  const std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK(type_distribution(model, schema, big, 1, {true, false, false}) ==
        type_distribution(model, schema, zero, 1));
  CHECK(type_distribution(model, schema, big, 1) != type_distribution(model, schema, zero, 1));
  CHECK(type_distribution(model, schema, big, 0, {false, true, false}) ==
        type_distribution(model, schema, big, 2, {false, true, false}));
  CHECK(type_distribution(model, schema, zero, 0) != type_distribution(model, schema, zero, 2));
}
