#pragma once

#include <vector>

#include "xplain/autodiff.hpp"
#include "xplain/data.hpp"
#include "xplain/encoding.hpp"
#include "xplain/rng.hpp"

namespace xplain {

/// Floor applied to categorical parameters before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;
/// Clamp for the uniform draws behind Gumbel noise.
inline constexpr double kUniformClamp = 1e-12;

/// p(D|x,y,s): categorical parameters over the N pool candidates from
/// projections of x, one-hot y and the encoded explanation s.
class SelectorModel {
 public:
  SelectorModel(const AttributeSchema& schema, std::size_t pool_size, std::size_t common_dim);

  diff::ParameterStore& params() { return params_; }
  const diff::ParameterStore& params() const { return params_; }
  std::size_t pool_size() const { return pool_size_; }

  /// [B x N] categorical parameters.
  diff::Var categorical(diff::Tape& tape, diff::Var x, diff::Var y_onehot,
                        diff::Var s_encoded) const;

 private:
  diff::ParameterStore params_;
  std::size_t pool_size_;
};

struct ExampleSelection {
  enum class Mode { relaxed, hard };
  Mode mode = Mode::hard;
  std::vector<double> membership;    // relaxed: length N, entries in (0, 1]
  std::vector<std::size_t> indices;  // hard: distinct pool indices

  static ExampleSelection hard(std::vector<std::size_t> indices);
  static ExampleSelection relaxed(std::vector<double> membership);

  /// Membership vector of length n (0/1 for hard selections).
  std::vector<double> membership_vector(std::size_t n) const;
};

/// Gumbel noise -log(-log u) for a [rows x cols] block.
diff::Tensor gumbel_noise(std::size_t rows, std::size_t cols, RngStream& rng);

/// Row-wise concrete relaxation softmax((log p + G) / tau).
diff::Var gumbel_concrete(diff::Tape& tape, diff::Var p, double tau, RngStream& rng);

/// Element-wise max of k independent concrete draws.
diff::Var relaxed_khot(diff::Tape& tape, diff::Var p, std::size_t k, double tau,
                       RngStream& rng);

std::vector<double> gumbel_concrete(const std::vector<double>& p, double tau, RngStream& rng);

/// Gumbel-top-k: k distinct indices sampled without replacement.
std::vector<std::size_t> hard_select(const std::vector<double>& p, std::size_t k,
                                     RngStream& rng);

/// Union of k independent categorical (Gumbel-max) draws; may hold fewer
/// than k indices. Returned ascending.
std::vector<std::size_t> union_of_draws(const std::vector<double>& p, std::size_t k,
                                        RngStream& rng);

// Single-input conveniences.
std::vector<double> categorical_params(const SelectorModel& model, const AttributeSchema& schema,
                                       const std::vector<double>& x, std::size_t y,
                                       const LinguisticExplanation& s,
                                       const InputMask& mask = {});
ExampleSelection relaxed_khot(const SelectorModel& model, const AttributeSchema& schema,
                              const std::vector<double>& x, std::size_t y,
                              const LinguisticExplanation& s, std::size_t k, double tau,
                              RngStream& rng);
ExampleSelection hard_select(const SelectorModel& model, const AttributeSchema& schema,
                             const std::vector<double>& x, std::size_t y,
                             const LinguisticExplanation& s, std::size_t k, RngStream& rng);

}  // namespace xplain
