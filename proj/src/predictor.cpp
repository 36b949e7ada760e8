#include "xplain/predictor.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "xplain/encoding.hpp"
#include "xplain/errors.hpp"

namespace xplain {

using diff::Tape;
using diff::Tensor;
using diff::Var;

PredictorModel::PredictorModel(const AttributeSchema& schema, std::size_t hidden)
    : num_classes_(schema.num_classes()), feature_dim_(schema.feature_dim()), hidden_(hidden) {
  if (hidden == 0) {
    throw ConfigError("predictor hidden width must be positive");
  }
  params_.add("predictor.l1.w", {feature_dim_, hidden_});
  params_.add("predictor.l1.b", {hidden_});
  params_.add("predictor.l2.w", {hidden_, num_classes_});
  params_.add("predictor.l2.b", {num_classes_});
}

Var PredictorModel::logits(Tape& tape, Var x) const {
  if (x.cols() != feature_dim_) {
    throw ConfigError("predictor expects " + std::to_string(feature_dim_) + " features, got " +
                      std::to_string(x.cols()));
  }
  Var h = diff::relu(diff::dense(x, tape.param(params_, "predictor.l1.w"),
                                 tape.param(params_, "predictor.l1.b")));
  return diff::dense(h, tape.param(params_, "predictor.l2.w"),
                     tape.param(params_, "predictor.l2.b"));
}

Tensor PredictorModel::predict_proba_batch(const Tensor& features) const {
  Tape tape;
  Var x = tape.constant(features);
  return diff::softmax_rows(logits(tape, x)).value();
}

void PredictorModel::save(const std::filesystem::path& dir) const {
  diff::save_checkpoint(dir / "predictor.json", params_);
  std::ofstream meta(dir / "predictor.meta.json");
  if (!meta) {
    throw ConfigError("cannot write predictor metadata in " + dir.string());
  }
  meta << nlohmann::json{{"frozen", frozen_},
                         {"hidden", hidden_},
                         {"feature_dim", feature_dim_},
                         {"num_classes", num_classes_}}
              .dump(2)
       << '\n';
}

PredictorModel PredictorModel::load(const std::filesystem::path& dir,
                                    const AttributeSchema& schema) {
  std::ifstream in(dir / "predictor.meta.json");
  if (!in) {
    throw ConfigError("missing predictor metadata in " + dir.string());
  }
  nlohmann::json meta;
  in >> meta;
  PredictorModel model(schema, meta.at("hidden").get<std::size_t>());
  diff::restore_into(model.params_, diff::load_checkpoint(dir / "predictor.json"));
  if (meta.value("frozen", false)) {
    model.freeze();
  }
  return model;
}

PredictorModel train_predictor(const std::vector<Sample>& train, const AttributeSchema& schema,
                               const PredictorConfig& config, RngStream& rng) {
  if (train.empty()) {
    throw ConfigError("train_predictor: empty training set");
  }
  if (config.batch_size == 0) {
    throw ConfigError("train_predictor: batch size must be positive");
  }
  PredictorModel model(schema, config.hidden);
  model.params().init_glorot(rng);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const std::vector<double>*> rows;
      std::vector<std::size_t> labels;
      for (std::size_t i = start; i < end; ++i) {
        rows.push_back(&train[order[i]].features);
        labels.push_back(train[order[i]].label);
      }
      Tape tape;
      tape.train(model.params());
      Var x = tape.constant(feature_rows(rows, schema.feature_dim()));
      Var y = tape.constant(one_hot_rows(labels, schema.num_classes()));
      Var probs = diff::softmax_rows(model.logits(tape, x));
      Var nll = diff::scale(
          diff::sum_all(diff::mul(diff::log(diff::clamp_min(probs, 1e-300)), y)),
          -1.0 / static_cast<double>(rows.size()));
      if (!std::isfinite(nll.value()[0])) {
        throw NumericalError("train_predictor: non-finite loss at epoch " +
                             std::to_string(epoch));
      }
      tape.backward(nll);
      diff::sgd_step(model.params(), config.learning_rate, config.weight_decay);
    }
  }
  model.freeze();
  return model;
}

std::vector<double> predict_proba(const PredictorModel& model, const std::vector<double>& x) {
  const std::vector<double>* rows[] = {&x};
  Tensor probs = model.predict_proba_batch(feature_rows(rows, model.feature_dim()));
  return {probs.values().begin(), probs.values().end()};
}

std::size_t sample_categorical(const std::vector<double>& probs, RngStream& rng) {
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  const double u = rng.uniform() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) {
      return i;
    }
  }
  // Round-off fallback: last index with positive mass.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) {
      return i;
    }
  }
  return 0;
}

std::size_t sample_class(const PredictorModel& model, const std::vector<double>& x,
                         RngStream& rng) {
  return sample_categorical(predict_proba(model, x), rng);
}

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) {
      best = i;
    }
  }
  return best;
}

}  // namespace xplain
