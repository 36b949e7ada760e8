#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "xplain/checks.hpp"
#include "xplain/oracle.hpp"

using namespace xplain;

namespace {

ToyWorld world_for(std::uint64_t seed) {
  RngStream rng(seed);
  return make_toy_world(random_toy_shape(rng), rng);
}

/// Replaces the reasoner table with the exact posterior p(y|x,s,D).
ToyTables with_exact_reasoner(ToyTables t) {
  for (std::size_t x = 0; x < t.p_y.size(); ++x) {
    for (std::size_t s = 0; s < t.types; ++s) {
      for (std::size_t d = 0; d < t.subsets.size(); ++d) {
        std::vector<double> joint(t.classes);
        double z = 0.0;
        for (std::size_t y = 0; y < t.classes; ++y) {
          joint[y] = t.p_y[x][y] * t.p_s[x][y][s] * t.p_d[x][y][s][d];
          z += joint[y];
        }
        for (std::size_t y = 0; y < t.classes; ++y) {
          t.q[x][s][d][y] = z > 0.0 ? joint[y] / z : 1.0 / static_cast<double>(t.classes);
        }
      }
    }
  }
  return t;
}

}  // namespace

TEST_CASE("tables are normalised distributions") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto t = tabulate(world_for(seed));
    for (std::size_t x = 0; x < t.p_y.size(); ++x) {
      CHECK(test_support::sum(t.p_y[x]) == doctest::Approx(1.0).epsilon(1e-12));
      for (std::size_t y = 0; y < t.classes; ++y) {
        CHECK(test_support::sum(t.p_s[x][y]) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t s = 0; s < t.types; ++s) {
          CHECK(test_support::sum(t.p_d[x][y][s]) == doctest::Approx(1.0).epsilon(1e-12));
        }
      }
      for (std::size_t s = 0; s < t.types; ++s) {
        for (std::size_t d = 0; d < t.subsets.size(); ++d) {
          CHECK(test_support::sum(t.q[x][s][d]) <= 1.0 + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("interaction information identities hold on random worlds") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto info = exact_interaction_info(world_for(seed));
    CHECK(std::abs(info.value - (info.term_A - info.term_B)) <= 1e-9);
    CHECK(std::abs(info.term_A - info.term_A_entropy) <= 1e-9);
    CHECK(std::abs(info.term_B - info.term_B_entropy) <= 1e-9);
    CHECK(info.term_A >= -1e-12);
    CHECK(info.term_B >= -1e-12);
  }
}

TEST_CASE("the bound is tight when the reasoner is the exact posterior") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto exact = with_exact_reasoner(tabulate(world_for(seed)));
    const auto bound = exact_variational_bound(exact);
    CHECK(std::abs(bound.bound - bound.term_A) <= 1e-6);
  }
}

TEST_CASE("the bound never exceeds the exact term over 100 worlds") {
  const auto report = run_oracle_check(99, 100, 0, 0);
  CHECK(report.violations == 0);
  CHECK(report.max_gap <= 1e-9);
  CHECK(report.max_identity_error <= 1e-9);
}

TEST_CASE("term B equals the tabulated conditional mutual information") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto world = world_for(seed);
    double mean = 0.0;
    for (const auto& x : world.inputs) {
      const double b = term_B(world.schema, x, world.predictor, world.models.explainer);
      CHECK(b >= -1e-12);
      mean += b / static_cast<double>(world.inputs.size());
    }
    CHECK(mean == doctest::Approx(exact_interaction_info(world).term_B).epsilon(1e-9));
  }
}

TEST_CASE("term B vanishes when the explainer ignores the class") {
  auto world = world_for(5);
  for (auto& [name, e] : world.models.explainer.params()) {
    if (name.rfind("explainer.y.", 0) == 0) {
      for (double& v : e.value.values()) v = 0.0;
    }
  }
  for (const auto& x : world.inputs) {
    CHECK(std::abs(term_B(world.schema, x, world.predictor, world.models.explainer)) <= 1e-12);
  }
}

TEST_CASE("Monte Carlo bound term is unbiased for the enumerated value") {
  auto world = world_for(17);
  const auto tables = tabulate(world);
  const ObjectiveSettings settings{world.k, 0.5, 0.0, SamplingMode::hard_union};
  RngStream draws(3);
  for (std::size_t x = 0; x < world.inputs.size(); ++x) {
    for (std::size_t y = 0; y < tables.classes; ++y) {
      const double exact = enumerated_bound_term(tables, x, y);
      const int n = 3000;
      double sum = 0.0, sum_sq = 0.0;
      for (int i = 0; i < n; ++i) {
        const double v = bound_term(world.schema, world.inputs[x], y, world.models,
                                    *world.pool_tensors, settings, draws);
        sum += v;
        sum_sq += v * v;
      }
      const double mean = sum / n;
      const double se = std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / (n - 1));
      CHECK(std::abs(mean - exact) <= 4.0 * se + 1e-12);
    }
  }
}

TEST_CASE("training gradients never touch the frozen predictor") {
  auto world = world_for(21);
  const auto before = world.predictor.params().fingerprint();
  const ObjectiveSettings settings{world.k, 0.5, 0.1, SamplingMode::relaxed};
  RngStream rng(4);
  world.models.zero_grad();
  const auto out = total_objective(world.schema, world.inputs, world.predictor, world.models,
                                   *world.pool_tensors, settings, rng);
  CHECK(std::isfinite(out.total));
  CHECK(out.total == doctest::Approx(out.term_A_bound - out.term_B + 0.1 * out.entropy));
  for (const auto& [_, e] : world.predictor.params()) {
    for (double g : e.grad.values()) CHECK(g == 0.0);
  }
  CHECK(world.predictor.params().fingerprint() == before);
  double norm = 0.0;
  for (auto* store : world.models.stores()) {
    for (const auto& [_, e] : *store) {
      for (double g : e.grad.values()) norm += g * g;
    }
  }
  CHECK(norm > 0.0);
}

TEST_CASE("objective evaluation is deterministic for a fixed stream") {
  auto world = world_for(22);
  const ObjectiveSettings settings{world.k, 0.5, 0.1, SamplingMode::relaxed};
  RngStream a(8), b(8);
  const auto r1 = total_objective(world.schema, world.inputs, world.predictor, world.models,
                                  *world.pool_tensors, settings, a);
  const auto r2 = total_objective(world.schema, world.inputs, world.predictor, world.models,
                                  *world.pool_tensors, settings, b);
  CHECK(r1.total == r2.total);
  CHECK(r1.term_A_bound == r2.term_A_bound);
  CHECK(r1.term_B == r2.term_B);
}

TEST_CASE("with a constant reasoner and no entropy term the objective is minus term B") {
  const auto schema = AttributeSchema::uniform(3, 3, 2, 4);
  RngStream rng(30);
  std::vector<Sample> inputs;
  for (int i = 0; i < 4; ++i) inputs.push_back(test_support::random_sample(schema, rng, 0));
  for (auto& s : inputs) s.attributes = {1, 0, 1};
  // Every pool item matches every explanation of every input and has label 2.
  std::vector<Sample> items;
  for (int i = 0; i < 5; ++i) {
    items.push_back(test_support::make_sample({rng.normal(), rng.normal(), 0.0, 1.0}, 2, {1, 0, 1}));
  }
  CandidatePool pool(items);
  PoolTensors tensors(pool, schema);
  PredictorModel predictor(schema, 5);
  predictor.params().init_glorot(rng);
  predictor.freeze();
  ExplanationModels models(schema, pool.size(), ModelDims{6, 4});
  models.init(rng);
  const ObjectiveSettings settings{2, 0.5, 0.0, SamplingMode::relaxed};
  const std::vector<std::size_t> classes{0, 1, 2, 1};
  const auto out = total_objective_for_classes(schema, inputs, classes, predictor, models, tensors,
                                               settings, rng);
  double mean_b = 0.0;
  for (const auto& x : inputs) mean_b += term_B(schema, x, predictor, models.explainer) / 4.0;
  CHECK(std::abs(out.term_A_bound) <= 1e-12);
  CHECK(out.total == doctest::Approx(-mean_b).epsilon(1e-12));
}
