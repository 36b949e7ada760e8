#include "xplain/objective.hpp"

#include <cmath>
#include <sstream>

#include "xplain/errors.hpp"

namespace xplain {

using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

Tensor repeated_features(std::span<const Sample> batch, std::size_t times, std::size_t dim) {
  Tensor out = Tensor::matrix(batch.size() * times, dim);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t r = 0; r < times; ++r) {
      std::copy(batch[b].features.begin(), batch[b].features.end(),
                out.row(b * times + r).begin());
    }
  }
  return out;
}

// Exact I(y, s | x) per sample, [B x 1].
Var term_b_rows(Tape& tape, const AttributeSchema& schema, std::span<const Sample> batch,
                const Tensor& class_probs, const ExplainerModel& explainer) {
  const std::size_t k = schema.num_classes();
  const std::size_t rows = batch.size() * k;
  std::vector<std::size_t> labels(rows);
  Tensor py = Tensor::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    labels[r] = r % k;
    py[r] = class_probs(r / k, r % k);
  }
  Var x = tape.constant(repeated_features(batch, k, schema.feature_dim()));
  Var y = tape.constant(one_hot_rows(labels, k));
  Var f_all = explainer.type_probs(tape, x, y);
  Var joint = diff::mul_col(f_all, tape.constant(std::move(py)));
  Var marginal = diff::repeat_rows(diff::group_sum_rows(joint, k), k);
  Var log_ratio = diff::sub(diff::log(diff::clamp_min(f_all, kProbabilityFloor)),
                            diff::log(diff::clamp_min(marginal, kProbabilityFloor)));
  return diff::group_sum_rows(diff::row_sum(diff::mul(joint, log_ratio)), k);
}

}  // namespace

namespace {

void check_batch(std::span<const Sample> batch, std::span<const std::size_t> classes,
                 const PoolTensors& pool, const ObjectiveSettings& settings) {
  if (batch.empty() || classes.size() != batch.size()) {
    throw ConfigError("objective: batch and class lists must be nonempty and aligned");
  }
  if (settings.k == 0 || settings.k > pool.size()) {
    throw ConfigError("objective: subset size k must lie in [1, pool size]");
  }
}

// Lower-bound term per sample, [B x 1], given explainer output f [B x T].
Var bound_rows(Tape& tape, const AttributeSchema& schema, std::span<const Sample> batch,
               std::span<const std::size_t> classes, Var f, const ExplanationModels& models,
               const PoolTensors& pool, const ObjectiveSettings& settings, RngStream& rng) {
  const std::size_t b_count = batch.size();
  const std::size_t t_count = schema.num_types();
  const std::size_t k_count = schema.num_classes();
  const std::size_t n = pool.size();

  // Candidate rows (b, t): explanation (t, attributes_b[t]).
  const std::size_t r1 = b_count * t_count;
  std::vector<LinguisticExplanation> candidates(r1);
  std::vector<std::size_t> candidate_classes(r1);
  for (std::size_t b = 0; b < b_count; ++b) {
    for (std::size_t t = 0; t < t_count; ++t) {
      candidates[b * t_count + t] = {t, batch[b].attributes.at(t)};
      candidate_classes[b * t_count + t] = classes[b];
    }
  }
  Var xr = tape.constant(repeated_features(batch, t_count, schema.feature_dim()));
  Var yr = tape.constant(one_hot_rows(candidate_classes, k_count));
  Var sr = tape.constant(encode_explanations(candidates, schema));

  Var p = models.selector.categorical(tape, xr, yr, sr);
  Var membership;
  if (settings.mode == SamplingMode::relaxed) {
    membership = relaxed_khot(tape, p, settings.k, settings.tau, rng);
  } else {
    Tensor m = Tensor::matrix(r1, n);
    for (std::size_t r = 0; r < r1; ++r) {
      auto row = p.value().row(r);
      for (std::size_t i : union_of_draws({row.begin(), row.end()}, settings.k, rng)) {
        m(r, i) = 1.0;
      }
    }
    membership = tape.constant(std::move(m));
  }

  // Rows (b, s, s'): q(y_b | x_b, s', D_s).
  Var query = models.reasoner.embed(tape, xr, sr);
  auto pool_embeds = pool_embeddings(tape, models.reasoner, pool);
  const std::size_t r2 = r1 * t_count;
  std::vector<std::size_t> query_rows(r2), member_rows(r2), target_classes(r2);
  std::vector<LinguisticExplanation> row_explanations(r2);
  Tensor diagonal = Tensor::matrix(r1, t_count);
  for (std::size_t b = 0; b < b_count; ++b) {
    for (std::size_t s = 0; s < t_count; ++s) {
      diagonal(b * t_count + s, s) = 1.0;
      for (std::size_t sp = 0; sp < t_count; ++sp) {
        const std::size_t r = (b * t_count + s) * t_count + sp;
        query_rows[r] = b * t_count + sp;
        member_rows[r] = b * t_count + s;
        target_classes[r] = classes[b];
        row_explanations[r] = candidates[b * t_count + sp];
      }
    }
  }
  auto post = reasoner_posterior(tape, pool, pool_embeds, diff::gather_rows(query, query_rows),
                                 row_explanations, diff::gather_rows(membership, member_rows));
  Var q = diff::row_sum(
      diff::mul(post.class_probs, tape.constant(one_hot_rows(target_classes, k_count))));
  Var q_mat = diff::reshape(diff::clamp_min(q, kReasonerFloor), r1, t_count);
  Var numerator = diff::row_sum(diff::mul(diff::log(q_mat), tape.constant(std::move(diagonal))));
  Var denominator = diff::row_sum(diff::mul(diff::repeat_rows(f, t_count), q_mat));
  Var ratio = diff::sub(numerator, diff::log(denominator));
  return diff::group_sum_rows(diff::mul(diff::reshape(f, r1, 1), ratio), t_count);
}

}  // namespace

ObjectiveGraph build_objective(Tape& tape, const AttributeSchema& schema,
                               std::span<const Sample> batch, std::span<const std::size_t> classes,
                               const PredictorModel& predictor, const ExplanationModels& models,
                               const PoolTensors& pool, const ObjectiveSettings& settings,
                               RngStream& rng) {
  check_batch(batch, classes, pool, settings);
  const Tensor features = feature_rows(batch, schema.feature_dim());
  Var x = tape.constant(features);
  Var y = tape.constant(one_hot_rows(classes, schema.num_classes()));
  Var f = models.explainer.type_probs(tape, x, y);

  ObjectiveGraph g;
  g.entropy = diff::entropy_rows(f);
  g.term_b = term_b_rows(tape, schema, batch, predictor.predict_proba_batch(features),
                         models.explainer);
  g.bound = bound_rows(tape, schema, batch, classes, f, models, pool, settings, rng);
  g.total = diff::add(diff::sub(g.bound, g.term_b), diff::scale(g.entropy, settings.lambda_entropy));
  g.loss = diff::scale(diff::mean_all(g.total), -1.0);
  return g;
}

double bound_term(const AttributeSchema& schema, const Sample& sample, std::size_t y,
                  const ExplanationModels& models, const PoolTensors& pool,
                  const ObjectiveSettings& settings, RngStream& rng) {
  const Sample batch[] = {sample};
  const std::size_t classes[] = {y};
  check_batch(batch, classes, pool, settings);
  Tape tape;
  Var f = models.explainer.type_probs(
      tape, tape.constant(feature_rows(batch, schema.feature_dim())),
      tape.constant(one_hot_rows(classes, schema.num_classes())));
  return bound_rows(tape, schema, batch, classes, f, models, pool, settings, rng).value()[0];
}

double term_B(const AttributeSchema& schema, const Sample& sample,
              const PredictorModel& predictor, const ExplainerModel& explainer) {
  Tape tape;
  const Sample batch[] = {sample};
  Tensor probs = predictor.predict_proba_batch(feature_rows(batch, schema.feature_dim()));
  return term_b_rows(tape, schema, batch, probs, explainer).value()[0];
}

ObjectiveBreakdown total_objective_for_classes(const AttributeSchema& schema,
                                               std::span<const Sample> batch,
                                               std::span<const std::size_t> classes,
                                               const PredictorModel& predictor,
                                               ExplanationModels& models, const PoolTensors& pool,
                                               const ObjectiveSettings& settings, RngStream& rng) {
  if (!predictor.frozen()) {
    throw ConfigError("total_objective requires a frozen predictor");
  }
  Tape tape;
  for (auto* s : models.stores()) {
    tape.train(*s);
  }
  auto g = build_objective(tape, schema, batch, classes, predictor, models, pool, settings, rng);

  ObjectiveBreakdown out;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double total = g.total.value()[b];
    if (!std::isfinite(total)) {
      std::ostringstream msg;
      msg << "non-finite objective at batch sample " << b << " (bound=" << g.bound.value()[b]
          << ", term_B=" << g.term_b.value()[b] << ", entropy=" << g.entropy.value()[b] << ")";
      throw NumericalError(msg.str());
    }
    out.term_A_bound += g.bound.value()[b] * inv;
    out.term_B += g.term_b.value()[b] * inv;
    out.entropy += g.entropy.value()[b] * inv;
    out.total += total * inv;
  }
  tape.backward(g.loss);
  return out;
}

ObjectiveBreakdown total_objective(const AttributeSchema& schema, std::span<const Sample> batch,
                                   const PredictorModel& predictor, ExplanationModels& models,
                                   const PoolTensors& pool, const ObjectiveSettings& settings,
                                   RngStream& rng) {
  std::vector<std::size_t> classes;
  classes.reserve(batch.size());
  const Tensor probs = predictor.predict_proba_batch(feature_rows(batch, schema.feature_dim()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto row = probs.row(b);
    classes.push_back(sample_categorical({row.begin(), row.end()}, rng));
  }
  return total_objective_for_classes(schema, batch, classes, predictor, models, pool, settings,
                                     rng);
}

}  // namespace xplain
