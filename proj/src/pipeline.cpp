#include "xplain/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "xplain/errors.hpp"

namespace xplain {

RngStream stage_stream(std::uint64_t seed, Stage stage) {
  return RngStream(seed).derive(static_cast<std::uint64_t>(stage));
}

nlohmann::json DataSplit::indices_json() const {
  return {{"pool", pool_indices}, {"train", train_indices}, {"eval", eval_indices}};
}

namespace {

std::vector<Sample> pick(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    if (i >= samples.size()) {
      throw DataError("split index " + std::to_string(i) + " out of range for " +
                      std::to_string(samples.size()) + " samples");
    }
    out.push_back(samples[i]);
  }
  return out;
}

}  // namespace

DataSplit make_split(const std::vector<Sample>& samples, double pool_fraction,
                     std::size_t min_pool_size, RngStream& rng) {
  PoolSplit ps = split_pool(samples, pool_fraction, min_pool_size, rng);
  std::vector<std::size_t> rest = ps.remainder_indices;
  rng.shuffle(rest);
  const std::size_t half = (rest.size() + 1) / 2;
  std::vector<std::size_t> train(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> eval(rest.begin() + static_cast<std::ptrdiff_t>(half), rest.end());
  std::sort(train.begin(), train.end());
  std::sort(eval.begin(), eval.end());
  if (train.empty() || eval.empty()) {
    throw ConfigError("split leaves no samples for training or evaluation");
  }
  nlohmann::json doc{{"pool", ps.pool_indices}, {"train", train}, {"eval", eval}};
  return apply_split(samples, doc);
}

DataSplit apply_split(const std::vector<Sample>& samples, const nlohmann::json& indices) {
  DataSplit out;
  try {
    out.pool_indices = indices.at("pool").get<std::vector<std::size_t>>();
    out.train_indices = indices.at("train").get<std::vector<std::size_t>>();
    out.eval_indices = indices.at("eval").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed split file: ") + e.what());
  }
  std::vector<int> owner(samples.size(), -1);
  int group = 0;
  for (const auto* list : {&out.pool_indices, &out.train_indices, &out.eval_indices}) {
    for (std::size_t i : *list) {
      if (i >= samples.size() || owner[i] != -1) {
        throw DataError("split indices overlap or exceed the dataset");
      }
      owner[i] = group;
    }
    ++group;
  }
  out.pool = CandidatePool(pick(samples, out.pool_indices));
  out.train = pick(samples, out.train_indices);
  out.eval = pick(samples, out.eval_indices);
  return out;
}

ExperimentConfig canonical_experiment(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.train.seed = seed;
  // Half the generator's default feature scale.
  c.data.class_separation = 3.0;
  c.data.attribute_offset_scale = 1.0;
  c.data.noise_std = 0.5;
  c.train.learning_rate = 3e-2;
  c.train.lambda_entropy = 0.5;
  return c;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const AttributeSchema schema =
      AttributeSchema::uniform(config.classes, config.types, config.values, config.feature_dim);
  RngStream data_rng = stage_stream(config.seed, Stage::data);
  const auto samples = gen_synthetic(schema, config.data, data_rng);

  RngStream split_rng = stage_stream(config.seed, Stage::split);
  const DataSplit split = make_split(samples, config.pool_fraction, config.train.k, split_rng);

  RngStream predictor_rng = stage_stream(config.seed, Stage::predictor);
  const PredictorModel predictor =
      train_predictor(split.train, schema, config.predictor, predictor_rng);

  ExperimentResult result;
  result.pool_size = split.pool.size();
  result.predictor_fingerprint_before = predictor.params().fingerprint();
  const PoolTensors pool(split.pool, schema);
  ExplanationModels models(schema, split.pool.size(), config.dims);
  RngStream init_rng = stage_stream(config.seed, Stage::init);
  models.init(init_rng);
  RngStream train_rng = stage_stream(config.seed, Stage::train);
  result.history =
      train_explainers(schema, split.train, predictor, models, pool, config.train, train_rng);
  result.predictor_fingerprint_after = predictor.params().fingerprint();

  RngStream direct_rng = stage_stream(config.seed, Stage::direct);
  const auto direct = DirectAttributeBaseline::train(split.train, schema, direct_rng,
                                                     config.direct_hidden, config.direct_epochs);
  const ExplanationSystem system{schema, predictor, models, pool, config.train.k};
  result.report = evaluate_all(split.eval, system, config.m,
                               stage_stream(config.seed, Stage::evaluate), &direct);
  return result;
}

}  // namespace xplain
