#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "xplain/eval.hpp"

namespace xplain {

/// Child-stream indices of the master seed, one per pipeline stage. The CLI
/// stages and run_experiment use the same indices, so a staged CLI run and
/// an in-process run with the same seed agree.
enum class Stage : std::uint64_t {
  data = 0,
  split = 1,
  predictor = 2,
  init = 3,
  train = 4,
  direct = 5,
  evaluate = 6,
  explain = 7,
};

RngStream stage_stream(std::uint64_t seed, Stage stage);

/// Pool / explainer-training / evaluation partition of one dataset.
struct DataSplit {
  CandidatePool pool;
  std::vector<Sample> train;
  std::vector<Sample> eval;
  std::vector<std::size_t> pool_indices;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> eval_indices;

  nlohmann::json indices_json() const;
};

/// Stratified pool of round(fraction * n) samples; the remainder is shuffled
/// and halved into training (first half, rounded up) and evaluation.
DataSplit make_split(const std::vector<Sample>& samples, double pool_fraction,
                     std::size_t min_pool_size, RngStream& rng);
/// Rebuilds a split from indices_json().
DataSplit apply_split(const std::vector<Sample>& samples, const nlohmann::json& indices);

struct ExperimentConfig {
  std::size_t classes = 4;
  std::size_t types = 4;
  std::size_t values = 4;
  std::size_t feature_dim = 16;
  SyntheticConfig data{1000};
  double pool_fraction = 0.2;
  PredictorConfig predictor;
  TrainConfig train;
  ModelDims dims;
  std::size_t m = 3;
  std::size_t direct_hidden = 512;
  std::size_t direct_epochs = 60;
  std::uint64_t seed = 0;
};

/// Settings of the synthetic end-to-end acceptance run (N = 200 pool items).
ExperimentConfig canonical_experiment(std::uint64_t seed);

struct ExperimentResult {
  EvalReport report;
  TrainHistory history;
  std::uint64_t predictor_fingerprint_before = 0;
  std::uint64_t predictor_fingerprint_after = 0;
  std::size_t pool_size = 0;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace xplain
