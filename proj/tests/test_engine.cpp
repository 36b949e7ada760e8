#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "support.hpp"
#include "xplain/engine.hpp"
#include "xplain/errors.hpp"

using namespace xplain;

namespace {

struct Setup {
  AttributeSchema schema = AttributeSchema::uniform(3, 3, 2, 4);
  std::vector<Sample> train;
  CandidatePool pool;
  PredictorModel predictor;
  ExplanationModels models;
  PoolTensors tensors;

  static std::vector<Sample> data(const AttributeSchema& schema) {
    SyntheticConfig cfg;
    cfg.n = 150;
    RngStream rng(1);
    return gen_synthetic(schema, cfg, rng);
  }

  explicit Setup(std::uint64_t init_seed = 2)
      : train(data(schema)),
        pool(std::vector<Sample>(train.begin(), train.begin() + 30)),
        predictor(make_predictor()),
        models(schema, pool.size(), ModelDims{8, 4}),
        tensors(pool, schema) {
    train.erase(train.begin(), train.begin() + 30);
    RngStream rng(init_seed);
    models.init(rng);
  }

  PredictorModel make_predictor() {
    RngStream rng(3);
    PredictorConfig cfg;
    cfg.epochs = 10;
    cfg.hidden = 8;
    return train_predictor(train, schema, cfg, rng);
  }

  std::uint64_t models_fingerprint() {
    std::uint64_t h = 0;
    for (auto* s : models.stores()) h = h * 1000003u + s->fingerprint();
    return h;
  }
};

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 16;
  cfg.epochs = 3;
  cfg.k = 4;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("a training step updates only the explanation models") {
  Setup s;
  const auto predictor_before = s.predictor.params().fingerprint();
  const auto before = s.models_fingerprint();
  const std::span<const Sample> batch(s.train.data(), 16);
  RngStream rng(4);
  const auto out = train_step(s.schema, batch, s.predictor, s.models, s.tensors, small_config(), rng);
  CHECK(std::isfinite(out.total));
  CHECK(s.models_fingerprint() != before);
  CHECK(s.predictor.params().fingerprint() == predictor_before);
}

TEST_CASE("a zero learning rate leaves every weight unchanged") {
  Setup s;
  const auto before = s.models_fingerprint();
  auto cfg = small_config();
  cfg.learning_rate = 0.0;
  RngStream rng(4);
  const auto out = train_step(s.schema, std::span<const Sample>(s.train.data(), 16), s.predictor,
                              s.models, s.tensors, cfg, rng);
  CHECK(std::isfinite(out.total));
  CHECK(s.models_fingerprint() == before);
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(train_step(s.schema, std::span<const Sample>(s.train.data(), 16), s.predictor,
                             s.models, s.tensors, cfg, rng),
                  ConfigError);
}

TEST_CASE("training configuration validation") {
  auto cfg = small_config();
  CHECK_NOTHROW(cfg.validate(30));
  cfg.k = 31;
  CHECK_THROWS_AS(cfg.validate(30), ConfigError);
  cfg = small_config();
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(30), ConfigError);
  cfg = small_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(30), ConfigError);
}

TEST_CASE("training is deterministic and reports every epoch") {
  Setup a, b;
  RngStream ra(9), rb(9);
  std::size_t calls = 0;
  const auto ha = train_explainers(a.schema, a.train, a.predictor, a.models, a.tensors,
                                   small_config(), ra,
                                   [&](std::size_t, const ObjectiveBreakdown&) { ++calls; });
  const auto hb = train_explainers(b.schema, b.train, b.predictor, b.models, b.tensors,
                                   small_config(), rb);
  CHECK(calls == 3);
  REQUIRE(ha.epochs.size() == 3);
  REQUIRE(ha.smoothed_total.size() == 3);
  CHECK(a.models_fingerprint() == b.models_fingerprint());
  for (std::size_t e = 0; e < 3; ++e) CHECK(ha.epochs[e].total == hb.epochs[e].total);
  CHECK(ha.smoothed_total[0] == ha.epochs[0].total);
  CHECK(ha.smoothed_total[1] == doctest::Approx(0.9 * ha.smoothed_total[0] + 0.1 * ha.epochs[1].total));
}

TEST_CASE("generated explanations use distinct top types and k examples each") {
  Setup s;
  const ExplanationSystem sys{s.schema, s.predictor, s.models, s.tensors, 4};
  RngStream rng(6);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& x = s.train[i].features;
    const auto e = generate_explanations(x, 3, sys, rng);
    CHECK(e.predicted_class == argmax(predict_proba(s.predictor, x)));
    REQUIRE(e.pairs.size() == 3);
    std::set<std::size_t> types;
    for (const auto& p : e.pairs) {
      types.insert(p.s.type);
      CHECK(p.selection.indices.size() == 4);
      CHECK(std::set<std::size_t>(p.selection.indices.begin(), p.selection.indices.end()).size() ==
            4);
      CHECK(p.score == p.posterior.class_probs[e.predicted_class]);
    }
    CHECK(types.size() == 3);
    const auto f = type_distribution(s.models.explainer, s.schema, x, e.predicted_class);
    CHECK(f[e.pairs[0].s.type] >= f[e.pairs[1].s.type]);
    CHECK(f[e.pairs[1].s.type] >= f[e.pairs[2].s.type]);
  }
  CHECK_THROWS_AS(generate_explanations(s.train[0].features, 4, sys, rng), ConfigError);
  CHECK_THROWS_AS(generate_explanations(s.train[0].features, 0, sys, rng), ConfigError);
  const ExplanationSystem too_many{s.schema, s.predictor, s.models, s.tensors, 31};
  CHECK_THROWS_AS(generate_explanations(s.train[0].features, 1, too_many, rng), ConfigError);
}

TEST_CASE("rendering and JSON form of an explanation") {
  const auto schema = AttributeSchema::uniform(3, 2, 2, 2);
  Explanation e;
  e.predicted_class = 2;
  e.pairs.push_back({{1, 0}, ExampleSelection::hard({3, 7}), 0.75, {}});
  e.pairs.push_back({{0, 1}, ExampleSelection::hard({1}), 0.5, {}});
  e.rendered = render(schema, e);
  const std::string want_first = "It is " + schema.class_name(2) + " because " +
                                 schema.type(1).name + " is " + schema.value_name(1, 0) +
                                 ", as in examples 3, 7.";
  const std::string want_second = "It is " + schema.class_name(2) + " because " +
                                  schema.type(0).name + " is " + schema.value_name(0, 1) +
                                  ", as in examples 1.";
  CHECK(e.rendered == want_first + "\n" + want_second);
  const auto doc = explanation_to_json(e);
  CHECK(doc["predicted_class"] == 2);
  CHECK(doc["pairs"].size() == 2);
  CHECK(doc["pairs"][0]["example_ids"] == nlohmann::json::array({3, 7}));
  CHECK(doc["pairs"][1]["score"] == 0.5);
  CHECK(doc["rendered"] == e.rendered);
}

TEST_CASE("decision rule between classes and the unknown class") {
  CHECK(decide({{0.3, 0.2}, 0.3}) == std::optional<std::size_t>(0));
  CHECK(decide({{0.1, 0.2}, 0.7}) == std::nullopt);
  CHECK(decide({{0.2, 0.5}, 0.3}) == std::optional<std::size_t>(1));
  CHECK(decide({{0.0, 0.0}, 1.0}) == std::nullopt);
}

TEST_CASE("reasoner path follows the labels of matching examples") {
  const auto schema = AttributeSchema::uniform(3, 2, 2, 2);
  PredictorModel predictor(schema, 3);
  predictor.params().at("predictor.l2.b").value.values()[1] = 5.0;
  predictor.freeze();
  for (std::size_t pool_label : {1u, 2u}) {
    std::vector<Sample> items;
    for (int i = 0; i < 4; ++i) items.push_back(test_support::make_sample({0.0, 0.0}, pool_label, {0, 0}));
    CandidatePool pool(items);
    PoolTensors tensors(pool, schema);
    ExplanationModels models(schema, pool.size(), ModelDims{4, 3});
    RngStream init(1);
    models.init(init);
    const ExplanationSystem sys{schema, predictor, models, tensors, 2};
    RngStream rng(2);
    for (int i = 0; i < 20; ++i) {
      const std::vector<double> x{rng.normal(), rng.normal()};
      CHECK(reasoner_path_predict(x, sys, rng) == std::optional<std::size_t>(pool_label));
    }
  }
}

TEST_CASE("the chosen value recovers the designated value when attributes follow the class") {
  const auto schema = AttributeSchema::uniform(4, 4, 4, 8);
  SyntheticConfig gen;
  gen.n = 400;
  gen.attribute_informativeness = 1.0;
  RngStream data_rng(21);
  auto data = gen_synthetic(schema, gen, data_rng);
  CandidatePool pool(std::vector<Sample>(data.begin(), data.begin() + 80));
  const std::vector<Sample> train(data.begin() + 80, data.begin() + 300);
  const std::vector<Sample> test(data.begin() + 300, data.end());
  RngStream rng(22);
  PredictorConfig pcfg;
  pcfg.epochs = 30;
  const auto predictor = train_predictor(train, schema, pcfg, rng);
  PoolTensors tensors(pool, schema);
  ExplanationModels models(schema, pool.size(), ModelDims{16, 8});
  models.init(rng);
  auto cfg = small_config();
  cfg.k = 10;
  cfg.epochs = 5;
  train_explainers(schema, train, predictor, models, tensors, cfg, rng);
  const ExplanationSystem sys{schema, predictor, models, tensors, 10};
  std::size_t hits = 0;
  for (const auto& s : test) {
    const auto e = generate_explanations(s.features, 1, sys, rng);
    hits += e.pairs[0].s.value == designated_value(schema, e.predicted_class, e.pairs[0].s.type);
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(test.size()) >= 0.8);
}

TEST_CASE("a large entropy coefficient keeps type distributions spread out") {
  Setup s;
  auto cfg = small_config();
  cfg.lambda_entropy = 10.0;
  cfg.epochs = 10;
  RngStream rng(31);
  train_explainers(s.schema, s.train, s.predictor, s.models, s.tensors, cfg, rng);
  double mean_h = 0.0;
  for (const auto& x : s.train) {
    const auto f = type_distribution(s.models.explainer, s.schema, x.features,
                                     argmax(predict_proba(s.predictor, x.features)));
    mean_h += entropy_regularizer(f) / static_cast<double>(s.train.size());
  }
  CHECK(mean_h >= 0.5 * std::log(3.0));
}
