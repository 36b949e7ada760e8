#include "xplain/checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "xplain/gradcheck.hpp"
#include "xplain/oracle.hpp"

namespace xplain {

using diff::ParameterStore;
using diff::Tape;
using diff::Tensor;
using diff::Var;

bool GradientSuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [&](const NamedGradCheck& c) { return c.max_rel_error < tolerance; });
}

nlohmann::json GradientSuiteReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks) {
    list.push_back({{"name", c.name}, {"trials", c.trials}, {"max_rel_error", c.max_rel_error},
                    {"redrawn", c.redrawn}});
  }
  return {{"tolerance", tolerance}, {"passed", passed()}, {"checks", list}};
}

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) {
    v = scale * rng.normal();
  }
  return t;
}

void randomize(ParameterStore& store, RngStream& rng, double scale = 1.0) {
  for (auto& [_, e] : store) {
    for (double& v : e.value.values()) {
      v = scale * rng.normal();
    }
  }
}

std::size_t dim(RngStream& rng, std::size_t lo, std::size_t hi) {
  return lo + rng.uniform_index(hi - lo + 1);
}

// sum(weights * v) with fixed random weights, so no gradient is trivially 1.
Var project(Tape& tape, Var v, const Tensor& weights) {
  return diff::sum_all(diff::mul(v, tape.constant(weights)));
}

constexpr double kKinkMargin = 1e-3;
constexpr std::uint64_t kMaxRedraws = 20;

using Trial = std::function<diff::GradCheckReport(RngStream&, double)>;

diff::GradCheckReport check_once(std::vector<ParameterStore*> stores,
                                 const diff::LossBuilder& loss, double tolerance) {
  return diff::grad_check(stores, loss, tolerance);
}

diff::GradCheckReport dense_trial(RngStream& rng, double tol) {
  const std::size_t b = dim(rng, 1, 4), din = dim(rng, 1, 4), dout = dim(rng, 1, 4);
  ParameterStore s;
  s.add("input", {b, din});
  s.add("w", {din, dout});
  s.add("b", {dout});
  randomize(s, rng);
  const Tensor r = random_tensor({b, dout}, rng);
  return check_once({&s}, [&](Tape& t) {
    return project(t, diff::dense(t.param(s, "input"), t.param(s, "w"), t.param(s, "b")), r);
  }, tol);
}

diff::GradCheckReport softmax_trial(RngStream& rng, double tol) {
  const std::size_t m = dim(rng, 1, 4), n = dim(rng, 1, 6);
  ParameterStore s;
  s.add("z", {m, n});
  randomize(s, rng, 3.0);
  const Tensor r = random_tensor({m, n}, rng);
  return check_once({&s}, [&](Tape& t) {
    Var p = diff::softmax_rows(t.param(s, "z"));
    return diff::add(project(t, p, r), diff::sum_all(diff::entropy_rows(p)));
  }, tol);
}

diff::GradCheckReport elementwise_trial(RngStream& rng, double tol) {
  const std::size_t m = dim(rng, 1, 4), n = dim(rng, 2, 5);
  ParameterStore s;
  s.add("a", {m, n});
  s.add("b", {m, n});
  s.add("c", {m, 1});
  randomize(s, rng);
  const Tensor r = random_tensor({m, n}, rng);
  return check_once({&s}, [&](Tape& t) {
    Var a = t.param(s, "a"), b = t.param(s, "b");
    Var v = diff::add(diff::relu(a), diff::mul(diff::exp(b), a));
    v = diff::sub(v, diff::log(diff::add_scalar(diff::mul(b, b), 1.0)));
    v = diff::mul_col(v, t.param(s, "c"));
    Var gram = diff::matmul_nt(a, b);
    return diff::add(project(t, v, r), diff::mean_all(gram));
  }, tol);
}

diff::GradCheckReport masked_softmax_trial(RngStream& rng, double tol) {
  const std::size_t m = dim(rng, 1, 4), n = dim(rng, 2, 6);
  ParameterStore s;
  s.add("scores", {m, n});
  s.add("members", {m, n});
  randomize(s, rng, 2.0);
  for (double& v : s.at("members").value.values()) {
    v = 0.1 + 0.9 * rng.uniform();
  }
  const Tensor r = random_tensor({m, n}, rng);
  return check_once({&s}, [&](Tape& t) {
    return project(t, diff::masked_softmax_rows(t.param(s, "scores"), t.param(s, "members")), r);
  }, tol);
}

AttributeSchema random_schema(RngStream& rng) {
  return AttributeSchema::uniform(dim(rng, 2, 4), dim(rng, 2, 4), dim(rng, 2, 3), dim(rng, 2, 5));
}

struct RandomInputs {
  Tensor x, y, s;
  std::vector<LinguisticExplanation> items;
};

RandomInputs random_inputs(const AttributeSchema& schema, std::size_t rows, RngStream& rng) {
  RandomInputs in;
  in.x = random_tensor({rows, schema.feature_dim()}, rng);
  std::vector<std::size_t> labels;
  for (std::size_t r = 0; r < rows; ++r) {
    labels.push_back(rng.uniform_index(schema.num_classes()));
    const std::size_t t = rng.uniform_index(schema.num_types());
    in.items.push_back({t, rng.uniform_index(schema.num_values(t))});
  }
  in.y = one_hot_rows(labels, schema.num_classes());
  in.s = encode_explanations(in.items, schema);
  return in;
}

diff::GradCheckReport explainer_trial(RngStream& rng, double tol) {
  const auto schema = random_schema(rng);
  ExplainerModel model(schema, dim(rng, 2, 6));
  randomize(model.params(), rng, 0.7);
  const auto in = random_inputs(schema, dim(rng, 1, 3), rng);
  const Tensor r = random_tensor({in.x.rows(), schema.num_types()}, rng);
  return check_once({&model.params()}, [&](Tape& t) {
    return project(t, diff::log(model.type_probs(t, t.constant(in.x), t.constant(in.y))), r);
  }, tol);
}

diff::GradCheckReport selector_trial(RngStream& rng, double tol) {
  const auto schema = random_schema(rng);
  const std::size_t n = dim(rng, 2, 6);
  SelectorModel model(schema, n, dim(rng, 2, 6));
  randomize(model.params(), rng, 0.7);
  const auto in = random_inputs(schema, dim(rng, 1, 3), rng);
  const Tensor r = random_tensor({in.x.rows(), n}, rng);
  return check_once({&model.params()}, [&](Tape& t) {
    Var p = model.categorical(t, t.constant(in.x), t.constant(in.y), t.constant(in.s));
    return project(t, diff::log(p), r);
  }, tol);
}

diff::GradCheckReport gumbel_trial(RngStream& rng, double tol) {
  const auto schema = random_schema(rng);
  const std::size_t n = dim(rng, 2, 6);
  SelectorModel model(schema, n, dim(rng, 2, 6));
  randomize(model.params(), rng, 0.7);
  const auto in = random_inputs(schema, dim(rng, 1, 3), rng);
  const Tensor r = random_tensor({in.x.rows(), n}, rng);
  const std::size_t k = dim(rng, 1, n);
  const RngStream noise = rng.derive(99);  // common random numbers
  return check_once({&model.params()}, [&](Tape& t) {
    RngStream draw = noise;
    Var p = model.categorical(t, t.constant(in.x), t.constant(in.y), t.constant(in.s));
    Var c = gumbel_concrete(t, p, 0.7, draw);
    Var m = relaxed_khot(t, p, k, 0.7, draw);
    return diff::add(project(t, c, r), project(t, m, r));
  }, tol);
}

diff::GradCheckReport reasoner_trial(RngStream& rng, double tol) {
  const auto schema = random_schema(rng);
  const std::size_t n = dim(rng, 2, 6);
  std::vector<Sample> items;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.label = rng.uniform_index(schema.num_classes());
    for (std::size_t j = 0; j < schema.feature_dim(); ++j) {
      s.features.push_back(rng.normal());
    }
    for (std::size_t t = 0; t < schema.num_types(); ++t) {
      s.attributes.push_back(rng.uniform_index(schema.num_values(t)));
    }
    items.push_back(std::move(s));
  }
  const CandidatePool pool(std::move(items));
  const PoolTensors tensors(pool, schema);
  ReasonerModel model(schema, dim(rng, 2, 5), dim(rng, 2, 6));
  randomize(model.params(), rng, 0.5);
  const auto in = random_inputs(schema, dim(rng, 1, 3), rng);
  Tensor members = Tensor::matrix(in.x.rows(), n);
  for (double& v : members.values()) {
    v = 0.05 + 0.95 * rng.uniform();
  }
  return check_once({&model.params()}, [&](Tape& t) {
    Var q = model.embed(t, t.constant(in.x), t.constant(in.s));
    auto embeds = pool_embeddings(t, model, tensors);
    auto post = reasoner_posterior(t, tensors, embeds, q, in.items, t.constant(members));
    // Offsets keep the logs away from zero where alpha gates a class out.
    Var lp = diff::log(diff::add_scalar(post.class_probs, 0.1));
    Var lu = diff::log(diff::add_scalar(post.unknown, 0.1));
    return diff::add(diff::sum_all(lp), diff::sum_all(lu));
  }, tol);
}

diff::GradCheckReport objective_trial(RngStream& rng, double tol) {
  ToyWorldShape shape;
  shape.inputs = 4;
  shape.weight_scale = 1.0;
  ToyWorld world = make_toy_world(shape, rng);
  std::vector<std::size_t> classes;
  for (std::size_t i = 0; i < world.inputs.size(); ++i) {
    classes.push_back(rng.uniform_index(world.schema.num_classes()));
  }
  const ObjectiveSettings settings{world.k, 0.5, 0.1, SamplingMode::relaxed};
  const RngStream noise = rng.derive(7);
  return check_once(world.models.stores(), [&](Tape& t) {
    RngStream draw = noise;
    return build_objective(t, world.schema, world.inputs, classes, world.predictor, world.models,
                           *world.pool_tensors, settings, draw)
        .loss;
  }, tol);
}

}  // namespace

GradientSuiteReport run_gradient_suite(std::uint64_t seed, std::size_t trials, double tolerance) {
  const std::vector<std::pair<std::string, Trial>> suite = {
      {"dense", dense_trial},
      {"softmax", softmax_trial},
      {"elementwise", elementwise_trial},
      {"masked_softmax", masked_softmax_trial},
      {"explainer", explainer_trial},
      {"selector", selector_trial},
      {"gumbel_concrete", gumbel_trial},
      {"reasoner", reasoner_trial},
      {"objective", objective_trial},
  };
  GradientSuiteReport report;
  report.tolerance = tolerance;
  const RngStream master(seed);
  for (std::size_t c = 0; c < suite.size(); ++c) {
    NamedGradCheck check{suite[c].first, trials, 0.0, 0};
    for (std::size_t i = 0; i < trials; ++i) {
      // Instances with a relu input or max_n tie within reach of the step
      // are redrawn: central differences straddle the kink there.
      for (std::uint64_t attempt = 0;; ++attempt) {
        RngStream rng = master.derive(c).derive(i).derive(attempt);
        const auto report = suite[c].second(rng, tolerance);
        if (report.kink_margin < kKinkMargin && attempt < kMaxRedraws) {
          ++check.redrawn;
          continue;
        }
        check.max_rel_error = std::max(check.max_rel_error, report.max_rel_error);
        break;
      }
    }
    report.checks.push_back(check);
  }
  return report;
}

nlohmann::json OracleCheckReport::to_json() const {
  return {{"configs", configs},
          {"violations", violations},
          {"max_gap", max_gap},
          {"max_identity_error", max_identity_error},
          {"estimator_z_scores", estimator_z_scores}};
}

OracleCheckReport run_oracle_check(std::uint64_t seed, std::size_t configs,
                                   std::size_t estimator_configs, std::size_t trials) {
  OracleCheckReport report;
  report.configs = configs;
  report.max_gap = -std::numeric_limits<double>::infinity();
  const RngStream master(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    RngStream rng = master.derive(c);
    ToyWorld world = make_toy_world(random_toy_shape(rng), rng);
    const ToyTables tables = tabulate(world);
    const auto info = exact_interaction_info(tables);
    const auto bound = exact_variational_bound(tables);
    const double gap = bound.bound - bound.term_A;
    const double identity =
        std::max({std::abs(info.value - (info.term_A - info.term_B)),
                  std::abs(info.term_A - info.term_A_entropy),
                  std::abs(info.term_B - info.term_B_entropy)});
    report.max_gap = std::max(report.max_gap, gap);
    report.max_identity_error = std::max(report.max_identity_error, identity);
    if (gap > 1e-9 || identity > 1e-9) {
      ++report.violations;
    }
    if (c < estimator_configs && trials > 1) {
      const ObjectiveSettings settings{world.k, 0.5, 0.0, SamplingMode::hard_union};
      // The (x, y) with the largest enumerated magnitude; constant pairs
      // (everything gated out) carry no information about bias.
      std::size_t bx = 0, by = 0;
      double exact = enumerated_bound_term(tables, 0, 0);
      for (std::size_t x = 0; x < world.inputs.size(); ++x) {
        for (std::size_t y = 0; y < tables.classes; ++y) {
          const double v = enumerated_bound_term(tables, x, y);
          if (std::abs(v) > std::abs(exact)) {
            bx = x, by = y, exact = v;
          }
        }
      }
      double sum = 0.0, sum_sq = 0.0;
      RngStream draws = rng.derive(1);
      for (std::size_t i = 0; i < trials; ++i) {
        const double v = bound_term(world.schema, world.inputs[bx], by, world.models,
                                    *world.pool_tensors, settings, draws);
        sum += v;
        sum_sq += v * v;
      }
      const double n = static_cast<double>(trials);
      const double mean = sum / n;
      const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
      const double se = std::sqrt(var / n);
      report.estimator_z_scores.push_back(se > 0.0 ? (mean - exact) / se : 0.0);
    }
  }
  return report;
}

}  // namespace xplain
