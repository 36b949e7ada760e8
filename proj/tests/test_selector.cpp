#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "support.hpp"
#include "xplain/errors.hpp"
#include "xplain/oracle.hpp"
#include "xplain/selector.hpp"

using namespace xplain;

namespace {

std::size_t argmax_of(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_CASE("concrete draws are normalised and sharpen at low temperature") {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  RngStream rng(1);
  double mean_max = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto c = gumbel_concrete(p, 0.01, rng);
    CHECK(test_support::sum(c) == doctest::Approx(1.0).epsilon(1e-9));
    mean_max += *std::max_element(c.begin(), c.end());
  }
  CHECK(mean_max / 1000.0 >= 0.99);
  for (double tau : {0.1, 0.5, 1.0, 5.0}) {
    const auto c = gumbel_concrete(p, tau, rng);
    CHECK(std::abs(test_support::sum(c) - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS(gumbel_concrete(p, 0.0, rng), ConfigError);
  CHECK_THROWS_AS(gumbel_concrete(p, -1.0, rng), ConfigError);
}

TEST_CASE("argmax of a concrete draw follows the categorical") {
  const std::vector<double> p{0.05, 0.15, 0.5, 0.3};
  RngStream rng(2);
  std::vector<double> freq(p.size(), 0.0);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) freq[argmax_of(gumbel_concrete(p, 0.5, rng))] += 1.0 / draws;
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += 0.5 * std::abs(freq[i] - p[i]);
  CHECK(tv < 0.03);
}

TEST_CASE("union of draws matches the inclusion-exclusion oracle") {
  const std::vector<double> p{0.4, 0.25, 0.2, 0.1, 0.05};
  const std::size_t k = 2;
  const auto subsets = enumerate_subsets(p.size(), k);
  double total = 0.0;
  for (const auto& d : subsets) total += union_probability(p, d, k);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  RngStream rng(3);
  std::map<std::vector<std::size_t>, double> freq;
  const int trials = 50000;
  for (int i = 0; i < trials; ++i) freq[union_of_draws(p, k, rng)] += 1.0 / trials;
  double tv = 0.0;
  for (const auto& d : subsets) tv += 0.5 * std::abs(freq[d] - union_probability(p, d, k));
  CHECK(tv < 0.02);
  ToyWorldShape too_big;
  too_big.pool = 9;
  CHECK_THROWS_AS(make_toy_world(too_big, rng), ConfigError);
}

TEST_CASE("Gumbel-top-k returns k distinct ascending indices") {
  RngStream rng(4);
  const std::vector<double> p{0.3, 0.1, 0.2, 0.15, 0.25};
  for (std::size_t k = 1; k <= p.size(); ++k) {
    const auto d = hard_select(p, k, rng);
    CHECK(d.size() == k);
    CHECK(std::is_sorted(d.begin(), d.end()));
    CHECK(std::set<std::size_t>(d.begin(), d.end()).size() == k);
  }
  CHECK_THROWS_AS(hard_select(p, 0, rng), ConfigError);
  CHECK_THROWS_AS(hard_select(p, 6, rng), ConfigError);
  for (int i = 0; i < 50; ++i) {
    CHECK(hard_select({0.0, 1.0, 0.0}, 1, rng) == std::vector<std::size_t>{1});
  }
  // First pick of Gumbel-top-k is a categorical draw.
  std::vector<double> freq(p.size(), 0.0);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) freq[hard_select(p, 1, rng).front()] += 1.0 / draws;
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(freq[i] - p[i]) < 0.015);
}

TEST_CASE("relaxed k-hot lies in the unit cube and approaches the hard union") {
  const std::vector<double> p{0.4, 0.3, 0.2, 0.1};
  RngStream rng(5);
  diff::Tape tape;
  auto pv = tape.constant(diff::Tensor({1, 4}, p));
  for (int i = 0; i < 200; ++i) {
    const auto& m = relaxed_khot(tape, pv, 3, 0.5, rng).value();
    for (double v : m.values()) {
      CHECK(v > 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
    CHECK(test_support::sum({m.values().begin(), m.values().end()}) >= 1.0 - 1e-9);
  }
  // Same noise at tiny temperature: rounded memberships are the hard union.
  RngStream a(9), b(9);
  for (int i = 0; i < 100; ++i) {
    const auto& m = relaxed_khot(tape, pv, 2, 1e-4, a).value();
    const auto d = union_of_draws(p, 2, b);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK((m.values()[j] > 0.5) == std::binary_search(d.begin(), d.end(), j));
    }
  }
  CHECK_THROWS_AS(relaxed_khot(tape, pv, 5, 0.5, rng), ConfigError);
}

TEST_CASE("selector parameters are a distribution over the pool") {
  const auto schema = AttributeSchema::uniform(3, 3, 2, 4);
  SelectorModel model(schema, 7, 5);
  RngStream rng(6);
  test_support::randomize(model.params(), rng, 0.7);
  for (int i = 0; i < 20; ++i) {
    const auto x = test_support::random_sample(schema, rng, i % 3);
    const LinguisticExplanation s{static_cast<std::size_t>(i % 3), static_cast<std::size_t>(i % 2)};
    const auto p = categorical_params(model, schema, x.features, x.label, s);
    CHECK(p.size() == 7);
    CHECK(test_support::sum(p) == doctest::Approx(1.0).epsilon(1e-12));
    const auto sel = hard_select(model, schema, x.features, x.label, s, 3, rng);
    CHECK(sel.membership_vector(7).size() == 7);
    CHECK(test_support::sum(sel.membership_vector(7)) == 3.0);
  }
  CHECK_THROWS_AS(SelectorModel(schema, 0, 5), ConfigError);
}

TEST_CASE("masked inputs reach the selector as zeros") {
  const auto schema = AttributeSchema::uniform(3, 3, 2, 4);
  SelectorModel model(schema, 6, 5);
  RngStream rng(7);
  test_support::randomize(model.params(), rng, 0.7);
  const std::vector<double> x1{1e3, -1e3, 5e2, 7.0};
  const std::vector<double> x2{0.0, 0.0, 0.0, 0.0};
  const LinguisticExplanation s{1, 1};
  CHECK(categorical_params(model, schema, x1, 2, s, {true, false, false}) ==
        categorical_params(model, schema, x2, 2, s));
  CHECK(categorical_params(model, schema, x1, 2, s) != categorical_params(model, schema, x2, 2, s));
  CHECK(categorical_params(model, schema, x1, 0, s, {false, true, false}) ==
        categorical_params(model, schema, x1, 1, s, {false, true, false}));
  CHECK(categorical_params(model, schema, x1, 0, {0, 0}, {false, false, true}) ==
        categorical_params(model, schema, x1, 0, {2, 1}, {false, false, true}));
}

TEST_CASE("selector edge cases") {
  const auto schema = AttributeSchema::uniform(3, 3, 2, 4);
  SelectorModel zero(schema, 8, 5);
  for (double v : categorical_params(zero, schema, {1.0, 2.0, 3.0, 4.0}, 1, {2, 1})) {
    CHECK(v == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
  }

  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  diff::Tape tape;
  auto pv = tape.constant(diff::Tensor({1, 4}, p));
  RngStream a(11), b(11);
  for (int i = 0; i < 20; ++i) {
    const auto& m = relaxed_khot(tape, pv, 1, 0.5, a).value();
    const auto c = gumbel_concrete(p, 0.5, b);
    for (std::size_t j = 0; j < 4; ++j) CHECK(m.values()[j] == c[j]);
  }

  RngStream rng(12);
  double mean_count = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto& m = relaxed_khot(tape, pv, 2, 0.01, rng).value();
    double sum = 0.0;
    for (double v : m.values()) {
      mean_count += (v > 0.5) / 1000.0;
      sum += v;
    }
    CHECK(sum >= 1.0 - 1e-9);
    CHECK(sum <= 2.0 + 1e-9);
  }
  CHECK(mean_count >= 1.0);
  CHECK(mean_count <= 2.05);

  std::vector<double> peaked(6, 0.006);
  peaked[3] = 0.97;
  int threes = 0;
  for (int i = 0; i < 1000; ++i) threes += hard_select(peaked, 1, rng).front() == 3;
  CHECK(threes >= 950);
  CHECK(hard_select(peaked, 6, rng) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
}
