#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "xplain/autodiff.hpp"
#include "xplain/data.hpp"
#include "xplain/rng.hpp"

namespace xplain {

struct PredictorConfig {
  std::size_t hidden = 64;
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 60;
};

/// The classifier being explained: dense -> relu -> dense -> softmax.
class PredictorModel {
 public:
  PredictorModel(const AttributeSchema& schema, std::size_t hidden);

  diff::ParameterStore& params() { return params_; }
  const diff::ParameterStore& params() const { return params_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t hidden() const { return hidden_; }

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  /// Logits [B x K]. Weights are constants unless params() is registered
  /// as trainable on `tape`.
  diff::Var logits(diff::Tape& tape, diff::Var x) const;

  /// Row-wise class probabilities for a [B x d] feature matrix.
  diff::Tensor predict_proba_batch(const diff::Tensor& features) const;

  void save(const std::filesystem::path& dir) const;
  static PredictorModel load(const std::filesystem::path& dir, const AttributeSchema& schema);

 private:
  diff::ParameterStore params_;
  std::size_t num_classes_;
  std::size_t feature_dim_;
  std::size_t hidden_;
  bool frozen_ = false;
};

/// Minibatch SGD on cross-entropy; the returned model is frozen.
PredictorModel train_predictor(const std::vector<Sample>& train, const AttributeSchema& schema,
                               const PredictorConfig& config, RngStream& rng);

std::vector<double> predict_proba(const PredictorModel& model, const std::vector<double>& x);

/// Categorical draw from predict_proba.
std::size_t sample_class(const PredictorModel& model, const std::vector<double>& x,
                         RngStream& rng);

/// Inverse-CDF draw from a normalised probability vector.
std::size_t sample_categorical(const std::vector<double>& probs, RngStream& rng);

std::size_t argmax(const std::vector<double>& v);

}  // namespace xplain
