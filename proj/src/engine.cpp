#include "xplain/engine.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "xplain/errors.hpp"

namespace xplain {

using diff::Tape;
using diff::Tensor;
using diff::Var;

void TrainConfig::validate(std::size_t pool_size) const {
  auto require = [](bool ok, const char* what) {
    if (!ok) {
      throw ConfigError(std::string("training configuration: ") + what);
    }
  };
  require(learning_rate > 0.0, "learning rate must be positive");
  require(weight_decay >= 0.0, "weight decay must be nonnegative");
  require(batch_size > 0, "batch size must be positive");
  require(epochs > 0, "epoch count must be positive");
  require(k > 0, "k must be positive");
  require(k <= pool_size, "k exceeds the candidate pool size");
  require(tau > 0.0, "tau must be positive");
  require(lambda_entropy >= 0.0, "entropy coefficient must be nonnegative");
}

ObjectiveSettings TrainConfig::objective() const {
  return {k, tau, lambda_entropy, SamplingMode::relaxed};
}

ObjectiveBreakdown train_step(const AttributeSchema& schema, std::span<const Sample> batch,
                              const PredictorModel& predictor, ExplanationModels& models,
                              const PoolTensors& pool, const TrainConfig& config, RngStream& rng) {
  if (config.learning_rate < 0.0) {
    throw ConfigError("train_step: negative learning rate");
  }
  models.zero_grad();
  ObjectiveBreakdown out =
      total_objective(schema, batch, predictor, models, pool, config.objective(), rng);
  if (config.learning_rate > 0.0) {
    for (auto* store : models.stores()) {
      diff::sgd_step(*store, config.learning_rate, config.weight_decay);
    }
  } else {
    models.zero_grad();
  }
  return out;
}

TrainHistory train_explainers(const AttributeSchema& schema, const std::vector<Sample>& train,
                              const PredictorModel& predictor, ExplanationModels& models,
                              const PoolTensors& pool, const TrainConfig& config, RngStream& rng,
                              const EpochCallback& on_epoch) {
  config.validate(pool.size());
  if (train.empty()) {
    throw ConfigError("train_explainers: empty training set");
  }
  TrainHistory history;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sample> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    ObjectiveBreakdown mean;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train[order[i]]);
      }
      const auto step = train_step(schema, batch, predictor, models, pool, config, rng);
      const double w = static_cast<double>(batch.size()) / static_cast<double>(train.size());
      mean.term_A_bound += w * step.term_A_bound;
      mean.term_B += w * step.term_B;
      mean.entropy += w * step.entropy;
      mean.total += w * step.total;
    }
    history.epochs.push_back(mean);
    history.smoothed_total.push_back(history.smoothed_total.empty()
                                         ? mean.total
                                         : 0.9 * history.smoothed_total.back() + 0.1 * mean.total);
    if (on_epoch) {
      on_epoch(epoch, mean);
    }
  }
  return history;
}

namespace {

Tensor membership_rows(const std::vector<std::vector<std::size_t>>& sets, std::size_t n) {
  Tensor m = Tensor::matrix(sets.size(), n);
  for (std::size_t r = 0; r < sets.size(); ++r) {
    for (std::size_t i : sets[r]) {
      m(r, i) = 1.0;
    }
  }
  return m;
}

Tensor repeated_row(const std::vector<double>& x, std::size_t times, bool zero) {
  Tensor out = Tensor::matrix(times, x.size());
  if (!zero) {
    for (std::size_t r = 0; r < times; ++r) {
      std::copy(x.begin(), x.end(), out.row(r).begin());
    }
  }
  return out;
}

}  // namespace

std::vector<ReasonerOutput> reasoner_posteriors(const ExplanationSystem& system,
                                                const std::vector<double>& x,
                                                const std::vector<LinguisticExplanation>& s,
                                                const std::vector<std::vector<std::size_t>>& sets) {
  if (s.size() != sets.size() || s.empty()) {
    throw ConfigError("reasoner_posteriors: explanation and selection lists must align");
  }
  for (const auto& d : sets) {
    if (d.empty()) {
      throw ConfigError("reasoner_posteriors: empty example set");
    }
  }
  Tape tape;
  const auto& reasoner = system.models.reasoner;
  Var query = reasoner.embed(tape, tape.constant(repeated_row(x, s.size(), false)),
                             tape.constant(encode_explanations(s, system.schema)));
  auto embeds = pool_embeddings(tape, reasoner, system.pool);
  auto post = reasoner_posterior(tape, system.pool, embeds, query, s,
                                 tape.constant(membership_rows(sets, system.pool.size())));
  std::vector<ReasonerOutput> out(s.size());
  for (std::size_t r = 0; r < s.size(); ++r) {
    auto row = post.class_probs.value().row(r);
    out[r].class_probs.assign(row.begin(), row.end());
    out[r].unknown_prob = post.unknown.value()[r];
  }
  return out;
}

Explanation generate_explanations(const std::vector<double>& x, std::size_t m,
                                  const ExplanationSystem& system, RngStream& rng,
                                  const InputMask& mask) {
  const auto& schema = system.schema;
  if (m == 0 || m > schema.num_types()) {
    throw ConfigError("generate_explanations: M must lie in [1, T], got " + std::to_string(m));
  }
  if (system.k == 0 || system.k > system.pool.size()) {
    throw ConfigError("generate_explanations: k must lie in [1, pool size]");
  }
  Explanation out;
  out.predicted_class = argmax(predict_proba(system.predictor, x));
  const std::size_t c = out.predicted_class;

  const auto f = type_distribution(system.models.explainer, schema, x, c, mask);
  std::vector<std::size_t> ranked(f.size());
  std::iota(ranked.begin(), ranked.end(), std::size_t{0});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
  ranked.resize(m);

  std::vector<LinguisticExplanation> rows;
  for (std::size_t t : ranked) {
    for (std::size_t v = 0; v < schema.num_values(t); ++v) {
      rows.push_back({t, v});
    }
  }
  Tape tape;
  const std::vector<std::size_t> classes(rows.size(), c);
  Var p = system.models.selector.categorical(
      tape, tape.constant(repeated_row(x, rows.size(), mask.drop_x)),
      tape.constant(one_hot_rows(classes, schema.num_classes(), mask.drop_y)),
      tape.constant(encode_explanations(rows, schema, mask.drop_s)));
  std::vector<std::vector<std::size_t>> sets;
  sets.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto row = p.value().row(r);
    sets.push_back(hard_select({row.begin(), row.end()}, system.k, rng));
  }
  const auto posts = reasoner_posteriors(system, x, rows, sets);

  std::size_t r = 0;
  for (std::size_t t : ranked) {
    std::size_t best = r;
    for (std::size_t v = 0; v < schema.num_values(t); ++v, ++r) {
      if (posts[r].class_probs[c] > posts[best].class_probs[c]) {
        best = r;
      }
    }
    out.pairs.push_back({rows[best], ExampleSelection::hard(sets[best]),
                         posts[best].class_probs[c], posts[best]});
  }
  out.rendered = render(schema, out);
  return out;
}

std::string render(const AttributeSchema& schema, const Explanation& explanation) {
  std::ostringstream text;
  for (std::size_t i = 0; i < explanation.pairs.size(); ++i) {
    const auto& pair = explanation.pairs[i];
    if (i > 0) {
      text << '\n';
    }
    text << "It is " << schema.class_name(explanation.predicted_class) << " because "
         << schema.type(pair.s.type).name << " is " << schema.value_name(pair.s.type, pair.s.value)
         << ", as in examples ";
    for (std::size_t j = 0; j < pair.selection.indices.size(); ++j) {
      text << (j > 0 ? ", " : "") << pair.selection.indices[j];
    }
    text << '.';
  }
  return text.str();
}

nlohmann::json explanation_to_json(const Explanation& explanation) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& pair : explanation.pairs) {
    pairs.push_back({{"type", pair.s.type},
                     {"value", pair.s.value},
                     {"example_ids", pair.selection.indices},
                     {"score", pair.score}});
  }
  return {{"predicted_class", explanation.predicted_class},
          {"pairs", std::move(pairs)},
          {"rendered", explanation.rendered}};
}

std::optional<std::size_t> decide(const ReasonerOutput& out) {
  const std::size_t c = argmax(out.class_probs);
  if (out.unknown_prob > out.class_probs[c]) {
    return std::nullopt;
  }
  return c;
}

std::optional<std::size_t> reasoner_path_predict(const std::vector<double>& x,
                                                 const ExplanationSystem& system, RngStream& rng,
                                                 const InputMask& mask) {
  const auto e = generate_explanations(x, 1, system, rng, mask);
  return decide(e.pairs.front().posterior);
}

}  // namespace xplain
