#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xplain/models.hpp"
#include "xplain/objective.hpp"
#include "xplain/predictor.hpp"

namespace xplain {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 200;
  std::size_t k = 10;
  double tau = 0.5;
  double lambda_entropy = 0.1;
  std::uint64_t seed = 0;

  /// Throws ConfigError unless every field is positive and k <= pool_size.
  void validate(std::size_t pool_size) const;
  ObjectiveSettings objective() const;
};

/// Steps 1-6 of one iteration on `batch`: sample y from the predictor, build
/// the objective, backpropagate, and apply SGD to the explanation models.
/// A zero learning rate evaluates and backpropagates without updating.
ObjectiveBreakdown train_step(const AttributeSchema& schema, std::span<const Sample> batch,
                              const PredictorModel& predictor, ExplanationModels& models,
                              const PoolTensors& pool, const TrainConfig& config, RngStream& rng);

struct TrainHistory {
  std::vector<ObjectiveBreakdown> epochs;  // sample-weighted epoch means
  /// Exponential smoothing (factor 0.9) of the per-epoch total.
  std::vector<double> smoothed_total;
};

using EpochCallback = std::function<void(std::size_t epoch, const ObjectiveBreakdown&)>;

TrainHistory train_explainers(const AttributeSchema& schema, const std::vector<Sample>& train,
                              const PredictorModel& predictor, ExplanationModels& models,
                              const PoolTensors& pool, const TrainConfig& config, RngStream& rng,
                              const EpochCallback& on_epoch = {});

/// Everything inference needs, bound together. Non-owning.
struct ExplanationSystem {
  const AttributeSchema& schema;
  const PredictorModel& predictor;
  const ExplanationModels& models;
  const PoolTensors& pool;
  std::size_t k;
};

struct ExplanationPair {
  LinguisticExplanation s;
  ExampleSelection selection;  // hard, indices ascending
  double score = 0.0;          // q(predicted_class | x, s, D)
  ReasonerOutput posterior;
};

struct Explanation {
  std::size_t predicted_class = 0;
  std::vector<ExplanationPair> pairs;
  std::string rendered;
};

/// Batched hard-mode reasoner posteriors, one per (s, indices) row.
std::vector<ReasonerOutput> reasoner_posteriors(const ExplanationSystem& system,
                                                const std::vector<double>& x,
                                                const std::vector<LinguisticExplanation>& s,
                                                const std::vector<std::vector<std::size_t>>& sets);

/// Top-M types of f(x, predicted class); per type the value whose sampled
/// example set maximizes the reasoner score. `mask` zeroes explainer and
/// selector inputs.
Explanation generate_explanations(const std::vector<double>& x, std::size_t m,
                                  const ExplanationSystem& system, RngStream& rng,
                                  const InputMask& mask = {});

/// One line per pair: "It is <class> because <type> is <value>, as in examples <ids>."
std::string render(const AttributeSchema& schema, const Explanation& explanation);

nlohmann::json explanation_to_json(const Explanation& explanation);

/// Reasoner route y -> (s, D) -> y'. nullopt means the unknown class won
/// (ties go to the lower index, so a class beats unknown on a tie).
std::optional<std::size_t> reasoner_path_predict(const std::vector<double>& x,
                                                 const ExplanationSystem& system, RngStream& rng,
                                                 const InputMask& mask = {});

/// argmax over [class_probs..., unknown]; nullopt for unknown.
std::optional<std::size_t> decide(const ReasonerOutput& out);

}  // namespace xplain
