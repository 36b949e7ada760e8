#pragma once

#include <span>
#include <vector>

#include "xplain/autodiff.hpp"
#include "xplain/models.hpp"
#include "xplain/predictor.hpp"

namespace xplain {

/// Floor applied to reasoner probabilities before any logarithm.
inline constexpr double kReasonerFloor = 1e-6;

enum class SamplingMode {
  relaxed,     // element-wise max of k concrete draws (training)
  hard_union,  // union of k independent categorical draws (oracle checks)
};

struct ObjectiveSettings {
  std::size_t k = 10;
  double tau = 0.5;
  double lambda_entropy = 0.1;
  SamplingMode mode = SamplingMode::relaxed;
};

struct ObjectiveBreakdown {
  double term_A_bound = 0.0;
  double term_B = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

/// Per-sample columns [B x 1] plus the scalar loss (= -mean total).
struct ObjectiveGraph {
  diff::Var bound;
  diff::Var term_b;
  diff::Var entropy;
  diff::Var total;
  diff::Var loss;
};

/// Records the full objective for a batch with given classes. Gradients
/// reach whichever stores were registered on `tape` via Tape::train.
ObjectiveGraph build_objective(diff::Tape& tape, const AttributeSchema& schema,
                               std::span<const Sample> batch, std::span<const std::size_t> classes,
                               const PredictorModel& predictor, const ExplanationModels& models,
                               const PoolTensors& pool, const ObjectiveSettings& settings,
                               RngStream& rng);

/// Single-sample lower-bound term: exact expectation over the T training
/// candidates, one sampled selection per candidate.
double bound_term(const AttributeSchema& schema, const Sample& sample, std::size_t y,
                  const ExplanationModels& models, const PoolTensors& pool,
                  const ObjectiveSettings& settings, RngStream& rng);

/// I(y, s | x) of the explainer under the predictor, by exact summation.
double term_B(const AttributeSchema& schema, const Sample& sample,
              const PredictorModel& predictor, const ExplainerModel& explainer);

/// Samples y per input from the predictor, evaluates the batch objective
/// and accumulates gradients into the explainer, selector and reasoner.
ObjectiveBreakdown total_objective(const AttributeSchema& schema, std::span<const Sample> batch,
                                   const PredictorModel& predictor, ExplanationModels& models,
                                   const PoolTensors& pool, const ObjectiveSettings& settings,
                                   RngStream& rng);

/// Same as total_objective with the classes fixed by the caller.
ObjectiveBreakdown total_objective_for_classes(const AttributeSchema& schema,
                                               std::span<const Sample> batch,
                                               std::span<const std::size_t> classes,
                                               const PredictorModel& predictor,
                                               ExplanationModels& models, const PoolTensors& pool,
                                               const ObjectiveSettings& settings, RngStream& rng);

}  // namespace xplain
