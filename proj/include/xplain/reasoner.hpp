#pragma once

#include <span>
#include <vector>

#include "xplain/autodiff.hpp"
#include "xplain/data.hpp"
#include "xplain/encoding.hpp"
#include "xplain/selector.hpp"

namespace xplain {

/// Constant tensors derived from the candidate pool, built once per pool.
class PoolTensors {
 public:
  PoolTensors(const CandidatePool& pool, const AttributeSchema& schema);

  std::size_t size() const { return pool_->size(); }
  std::size_t num_types() const { return encoded_.size(); }
  const CandidatePool& pool() const { return *pool_; }
  const diff::Tensor& features() const { return features_; }
  const diff::Tensor& labels_onehot() const { return labels_onehot_; }
  /// Row i encodes (t, attributes_i[t]): pool items seen through type t.
  const diff::Tensor& encoded(std::size_t type) const { return encoded_.at(type); }
  /// alpha(s, attributes_i) for every pool item.
  std::vector<double> alpha_row(const LinguisticExplanation& s) const;

 private:
  const CandidatePool* pool_;
  diff::Tensor features_;
  diff::Tensor labels_onehot_;
  std::vector<diff::Tensor> encoded_;
};

/// Embedding network g(x, s) of the matching-style reasoner q(y|x,s,D).
class ReasonerModel {
 public:
  ReasonerModel(const AttributeSchema& schema, std::size_t embed_dim, std::size_t common_dim);

  diff::ParameterStore& params() { return params_; }
  const diff::ParameterStore& params() const { return params_; }
  std::size_t embed_dim() const { return embed_dim_; }

  diff::Var embed(diff::Tape& tape, diff::Var x, diff::Var s_encoded) const;

 private:
  diff::ParameterStore params_;
  std::size_t embed_dim_;
};

struct ReasonerOutput {
  std::vector<double> class_probs;
  double unknown_prob = 0.0;
};

/// 1 iff the explanation's value equals the sample's value at that type.
double alpha(const LinguisticExplanation& s, const std::vector<std::size_t>& attributes);

/// Pool embeddings g(x_i, (t, attributes_i[t])) for every type t.
std::vector<diff::Var> pool_embeddings(diff::Tape& tape, const ReasonerModel& model,
                                       const PoolTensors& pool);

struct PosteriorVars {
  diff::Var weights;      // [R x N]
  diff::Var class_probs;  // [R x K]
  diff::Var unknown;      // [R x 1]
};

/// Batched posterior. Row r scores the pool in the similarity space of
/// row_explanations[r].type, weights members by membership[r] and gates
/// them by alpha.
PosteriorVars reasoner_posterior(diff::Tape& tape, const PoolTensors& pool,
                                 std::span<const diff::Var> pool_embeds, diff::Var query_embed,
                                 std::span<const LinguisticExplanation> row_explanations,
                                 diff::Var membership);

/// Weights over the selection: over selection.indices (in order) for hard
/// selections, over the full pool for relaxed ones.
std::vector<double> match_weights(const ReasonerModel& model, const AttributeSchema& schema,
                                  const PoolTensors& pool, const std::vector<double>& x,
                                  const LinguisticExplanation& s,
                                  const ExampleSelection& selection);

ReasonerOutput class_posterior(const ReasonerModel& model, const AttributeSchema& schema,
                               const PoolTensors& pool, const std::vector<double>& x,
                               const LinguisticExplanation& s, const ExampleSelection& selection);

}  // namespace xplain
