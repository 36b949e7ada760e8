#include "xplain/explainer.hpp"

#include <cmath>

namespace xplain {

using diff::Tape;
using diff::Var;

ExplainerModel::ExplainerModel(const AttributeSchema& schema, std::size_t common_dim)
    : num_types_(schema.num_types()) {
  params_.add("explainer.x.w", {schema.feature_dim(), common_dim});
  params_.add("explainer.x.b", {common_dim});
  params_.add("explainer.y.w", {schema.num_classes(), common_dim});
  params_.add("explainer.y.b", {common_dim});
  params_.add("explainer.out.w", {common_dim, num_types_});
  params_.add("explainer.out.b", {num_types_});
}

Var ExplainerModel::type_probs(Tape& tape, Var x, Var y_onehot) const {
  Var hx = diff::dense(x, tape.param(params_, "explainer.x.w"),
                       tape.param(params_, "explainer.x.b"));
  Var hy = diff::dense(y_onehot, tape.param(params_, "explainer.y.w"),
                       tape.param(params_, "explainer.y.b"));
  Var h = diff::relu(diff::add(hx, hy));
  Var logits = diff::dense(h, tape.param(params_, "explainer.out.w"),
                           tape.param(params_, "explainer.out.b"));
  return diff::softmax_rows(logits);
}

std::vector<double> type_distribution(const ExplainerModel& model, const AttributeSchema& schema,
                                      const std::vector<double>& x, std::size_t y,
                                      const InputMask& mask) {
  Tape tape;
  const std::vector<double>* rows[] = {&x};
  const std::size_t labels[] = {y};
  Var xv = tape.constant(feature_rows(rows, schema.feature_dim(), mask.drop_x));
  Var yv = tape.constant(one_hot_rows(labels, schema.num_classes(), mask.drop_y));
  const auto& p = model.type_probs(tape, xv, yv).value();
  return {p.values().begin(), p.values().end()};
}

std::vector<std::pair<LinguisticExplanation, double>> training_candidates(
    const ExplainerModel& model, const AttributeSchema& schema, const Sample& sample,
    std::size_t y) {
  const auto probs = type_distribution(model, schema, sample.features, y);
  std::vector<std::pair<LinguisticExplanation, double>> out;
  out.reserve(probs.size());
  for (std::size_t t = 0; t < probs.size(); ++t) {
    out.push_back({LinguisticExplanation{t, sample.attributes.at(t)}, probs[t]});
  }
  return out;
}

double entropy_regularizer(const std::vector<double>& probabilities) {
  double h = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) {
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace xplain
