#include "xplain/reasoner.hpp"

#include "xplain/errors.hpp"

namespace xplain {

using diff::Tape;
using diff::Tensor;
using diff::Var;

PoolTensors::PoolTensors(const CandidatePool& pool, const AttributeSchema& schema)
    : pool_(&pool),
      features_(feature_rows(pool.samples(), schema.feature_dim())),
      labels_onehot_(Tensor::matrix(pool.size(), schema.num_classes())) {
  if (pool.size() == 0) {
    throw ConfigError("candidate pool is empty");
  }
  for (std::size_t i = 0; i < pool.size(); ++i) {
    validate_sample(pool[i], schema);
    labels_onehot_(i, pool[i].label) = 1.0;
  }
  for (std::size_t t = 0; t < schema.num_types(); ++t) {
    std::vector<LinguisticExplanation> items;
    items.reserve(pool.size());
    for (const auto& s : pool.samples()) {
      items.push_back({t, s.attributes[t]});
    }
    encoded_.push_back(encode_explanations(items, schema));
  }
}

std::vector<double> PoolTensors::alpha_row(const LinguisticExplanation& s) const {
  std::vector<double> a(size());
  for (std::size_t i = 0; i < size(); ++i) {
    a[i] = alpha(s, (*pool_)[i].attributes);
  }
  return a;
}

ReasonerModel::ReasonerModel(const AttributeSchema& schema, std::size_t embed_dim,
                             std::size_t common_dim)
    : embed_dim_(embed_dim) {
  params_.add("reasoner.x.w", {schema.feature_dim(), common_dim});
  params_.add("reasoner.x.b", {common_dim});
  params_.add("reasoner.s.w", {explanation_width(schema), common_dim});
  params_.add("reasoner.s.b", {common_dim});
  params_.add("reasoner.out.w", {common_dim, embed_dim});
  params_.add("reasoner.out.b", {embed_dim});
}

Var ReasonerModel::embed(Tape& tape, Var x, Var s_encoded) const {
  Var hx = diff::dense(x, tape.param(params_, "reasoner.x.w"), tape.param(params_, "reasoner.x.b"));
  Var hs = diff::dense(s_encoded, tape.param(params_, "reasoner.s.w"),
                       tape.param(params_, "reasoner.s.b"));
  Var h = diff::relu(diff::add(hx, hs));
  return diff::dense(h, tape.param(params_, "reasoner.out.w"),
                     tape.param(params_, "reasoner.out.b"));
}

double alpha(const LinguisticExplanation& s, const std::vector<std::size_t>& attributes) {
  return attributes.at(s.type) == s.value ? 1.0 : 0.0;
}

std::vector<Var> pool_embeddings(Tape& tape, const ReasonerModel& model, const PoolTensors& pool) {
  std::vector<Var> out;
  Var x = tape.constant(pool.features());
  for (std::size_t t = 0; t < pool.num_types(); ++t) {
    out.push_back(model.embed(tape, x, tape.constant(pool.encoded(t))));
  }
  return out;
}

PosteriorVars reasoner_posterior(Tape& tape, const PoolTensors& pool,
                                 std::span<const Var> pool_embeds, Var query_embed,
                                 std::span<const LinguisticExplanation> row_explanations,
                                 Var membership) {
  const std::size_t rows = row_explanations.size();
  const std::size_t n = pool.size();
  if (query_embed.rows() != rows || membership.rows() != rows || membership.cols() != n) {
    throw ConfigError("reasoner_posterior: row counts disagree");
  }

  // Group rows by explanation type so each type's similarity space is one matmul.
  std::vector<std::vector<std::size_t>> by_type(pool_embeds.size());
  for (std::size_t r = 0; r < rows; ++r) {
    by_type.at(row_explanations[r].type).push_back(r);
  }
  std::vector<Var> blocks;
  std::vector<std::size_t> position(rows);
  std::size_t offset = 0;
  for (std::size_t t = 0; t < by_type.size(); ++t) {
    if (by_type[t].empty()) {
      continue;
    }
    Var q = diff::gather_rows(query_embed, by_type[t]);
    blocks.push_back(diff::matmul_nt(q, pool_embeds[t]));
    for (std::size_t j = 0; j < by_type[t].size(); ++j) {
      position[by_type[t][j]] = offset + j;
    }
    offset += by_type[t].size();
  }
  Var stacked = blocks.size() == 1 ? blocks.front() : diff::concat_rows(blocks);
  Var scores = diff::gather_rows(stacked, position);

  Tensor gate = Tensor::matrix(rows, n);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto a = pool.alpha_row(row_explanations[r]);
    std::copy(a.begin(), a.end(), gate.row(r).begin());
  }

  PosteriorVars out;
  out.weights = diff::masked_softmax_rows(scores, membership);
  Var gated = diff::mul(out.weights, tape.constant(std::move(gate)));
  out.class_probs = diff::matmul(gated, tape.constant(pool.labels_onehot()));
  out.unknown = diff::rsub_scalar(1.0, diff::row_sum(gated));
  return out;
}

namespace {

PosteriorVars single_posterior(Tape& tape, const ReasonerModel& model,
                               const AttributeSchema& schema, const PoolTensors& pool,
                               const std::vector<double>& x, const LinguisticExplanation& s,
                               const ExampleSelection& selection) {
  const std::vector<double>* rows[] = {&x};
  const LinguisticExplanation items[] = {s};
  Var query = model.embed(tape, tape.constant(feature_rows(rows, schema.feature_dim())),
                          tape.constant(encode_explanations(items, schema)));
  auto embeds = pool_embeddings(tape, model, pool);
  Var m = tape.constant(Tensor({1, pool.size()}, selection.membership_vector(pool.size())));
  return reasoner_posterior(tape, pool, embeds, query, items, m);
}

}  // namespace

std::vector<double> match_weights(const ReasonerModel& model, const AttributeSchema& schema,
                                  const PoolTensors& pool, const std::vector<double>& x,
                                  const LinguisticExplanation& s,
                                  const ExampleSelection& selection) {
  if (selection.mode == ExampleSelection::Mode::hard && selection.indices.empty()) {
    throw ConfigError("match_weights: empty selection");
  }
  Tape tape;
  const auto& w = single_posterior(tape, model, schema, pool, x, s, selection).weights.value();
  if (selection.mode == ExampleSelection::Mode::relaxed) {
    return {w.values().begin(), w.values().end()};
  }
  std::vector<double> out;
  for (std::size_t i : selection.indices) {
    out.push_back(w[i]);
  }
  return out;
}

ReasonerOutput class_posterior(const ReasonerModel& model, const AttributeSchema& schema,
                               const PoolTensors& pool, const std::vector<double>& x,
                               const LinguisticExplanation& s, const ExampleSelection& selection) {
  Tape tape;
  auto post = single_posterior(tape, model, schema, pool, x, s, selection);
  const auto& cp = post.class_probs.value();
  return {{cp.values().begin(), cp.values().end()}, post.unknown.value()[0]};
}

}  // namespace xplain
