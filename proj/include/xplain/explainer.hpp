#pragma once

#include <utility>
#include <vector>

#include "xplain/autodiff.hpp"
#include "xplain/data.hpp"
#include "xplain/encoding.hpp"

namespace xplain {

/// p(s|x,y) over attribute types: x and one-hot y are projected to a common
/// space, summed, rectified, and projected to T logits.
class ExplainerModel {
 public:
  ExplainerModel(const AttributeSchema& schema, std::size_t common_dim);

  diff::ParameterStore& params() { return params_; }
  const diff::ParameterStore& params() const { return params_; }
  std::size_t num_types() const { return num_types_; }

  /// [B x T] type probabilities for x [B x d] and y_onehot [B x K].
  diff::Var type_probs(diff::Tape& tape, diff::Var x, diff::Var y_onehot) const;

 private:
  diff::ParameterStore params_;
  std::size_t num_types_;
};

std::vector<double> type_distribution(const ExplainerModel& model, const AttributeSchema& schema,
                                      const std::vector<double>& x, std::size_t y,
                                      const InputMask& mask = {});

/// One candidate per type t: (t, attributes[t]) with probability f(x,y)[t].
std::vector<std::pair<LinguisticExplanation, double>> training_candidates(
    const ExplainerModel& model, const AttributeSchema& schema, const Sample& sample,
    std::size_t y);

/// -sum p log p with 0 log 0 = 0.
double entropy_regularizer(const std::vector<double>& probabilities);

}  // namespace xplain
