#include "xplain/selector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xplain/errors.hpp"

namespace xplain {

using diff::Tape;
using diff::Tensor;
using diff::Var;

SelectorModel::SelectorModel(const AttributeSchema& schema, std::size_t pool_size,
                             std::size_t common_dim)
    : pool_size_(pool_size) {
  if (pool_size == 0) {
    throw ConfigError("selector needs a nonempty pool");
  }
  params_.add("selector.x.w", {schema.feature_dim(), common_dim});
  params_.add("selector.x.b", {common_dim});
  params_.add("selector.y.w", {schema.num_classes(), common_dim});
  params_.add("selector.y.b", {common_dim});
  params_.add("selector.s.w", {explanation_width(schema), common_dim});
  params_.add("selector.s.b", {common_dim});
  params_.add("selector.out.w", {common_dim, pool_size});
  params_.add("selector.out.b", {pool_size});
}

Var SelectorModel::categorical(Tape& tape, Var x, Var y_onehot, Var s_encoded) const {
  Var hx = diff::dense(x, tape.param(params_, "selector.x.w"), tape.param(params_, "selector.x.b"));
  Var hy = diff::dense(y_onehot, tape.param(params_, "selector.y.w"),
                       tape.param(params_, "selector.y.b"));
  Var hs = diff::dense(s_encoded, tape.param(params_, "selector.s.w"),
                       tape.param(params_, "selector.s.b"));
  Var h = diff::relu(diff::add(diff::add(hx, hy), hs));
  return diff::softmax_rows(
      diff::dense(h, tape.param(params_, "selector.out.w"), tape.param(params_, "selector.out.b")));
}

ExampleSelection ExampleSelection::hard(std::vector<std::size_t> indices) {
  ExampleSelection s;
  s.mode = Mode::hard;
  s.indices = std::move(indices);
  return s;
}

ExampleSelection ExampleSelection::relaxed(std::vector<double> membership) {
  ExampleSelection s;
  s.mode = Mode::relaxed;
  s.membership = std::move(membership);
  return s;
}

std::vector<double> ExampleSelection::membership_vector(std::size_t n) const {
  if (mode == Mode::relaxed) {
    if (membership.size() != n) {
      throw ConfigError("relaxed selection length does not match the pool");
    }
    return membership;
  }
  std::vector<double> m(n, 0.0);
  for (std::size_t i : indices) {
    if (i >= n) {
      throw ConfigError("selection index outside the pool");
    }
    m[i] = 1.0;
  }
  return m;
}

namespace {

double gumbel(RngStream& rng) {
  const double u = std::clamp(rng.uniform(), kUniformClamp, 1.0 - kUniformClamp);
  return -std::log(-std::log(u));
}

void check_k(std::size_t k, std::size_t n) {
  if (k == 0) {
    throw ConfigError("subset size k must be positive");
  }
  if (k > n) {
    throw ConfigError("subset size k=" + std::to_string(k) + " exceeds pool size " +
                      std::to_string(n));
  }
}

std::vector<double> perturbed_keys(const std::vector<double>& p, RngStream& rng) {
  std::vector<double> keys(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    keys[i] = std::log(std::max(p[i], kProbabilityFloor)) + gumbel(rng);
  }
  return keys;
}

}  // namespace

Tensor gumbel_noise(std::size_t rows, std::size_t cols, RngStream& rng) {
  Tensor g = Tensor::matrix(rows, cols);
  for (double& v : g.values()) {
    v = gumbel(rng);
  }
  return g;
}

Var gumbel_concrete(Tape& tape, Var p, double tau, RngStream& rng) {
  if (!(tau > 0.0)) {
    throw ConfigError("temperature tau must be positive");
  }
  Var logp = diff::log(diff::clamp_min(p, kProbabilityFloor));
  Var noise = tape.constant(gumbel_noise(p.rows(), p.cols(), rng));
  return diff::softmax_rows(diff::scale(diff::add(logp, noise), 1.0 / tau));
}

Var relaxed_khot(Tape& tape, Var p, std::size_t k, double tau, RngStream& rng) {
  check_k(k, p.cols());
  std::vector<Var> draws;
  draws.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    draws.push_back(gumbel_concrete(tape, p, tau, rng));
  }
  return k == 1 ? draws.front() : diff::max_n(draws);
}

std::vector<double> gumbel_concrete(const std::vector<double>& p, double tau, RngStream& rng) {
  Tape tape;
  Var pv = tape.constant(Tensor({1, p.size()}, p));
  const auto& c = gumbel_concrete(tape, pv, tau, rng).value();
  return {c.values().begin(), c.values().end()};
}

std::vector<std::size_t> hard_select(const std::vector<double>& p, std::size_t k,
                                     RngStream& rng) {
  check_k(k, p.size());
  const auto keys = perturbed_keys(p, rng);
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&keys](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> union_of_draws(const std::vector<double>& p, std::size_t k,
                                        RngStream& rng) {
  check_k(k, p.size());
  std::vector<std::size_t> picked;
  for (std::size_t j = 0; j < k; ++j) {
    const auto keys = perturbed_keys(p, rng);
    std::size_t best = 0;
    for (std::size_t i = 1; i < keys.size(); ++i) {
      if (keys[i] > keys[best]) {
        best = i;
      }
    }
    picked.push_back(best);
  }
  std::sort(picked.begin(), picked.end());
  picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
  return picked;
}

std::vector<double> categorical_params(const SelectorModel& model, const AttributeSchema& schema,
                                       const std::vector<double>& x, std::size_t y,
                                       const LinguisticExplanation& s, const InputMask& mask) {
  Tape tape;
  const std::vector<double>* rows[] = {&x};
  const std::size_t labels[] = {y};
  const LinguisticExplanation items[] = {s};
  Var xv = tape.constant(feature_rows(rows, schema.feature_dim(), mask.drop_x));
  Var yv = tape.constant(one_hot_rows(labels, schema.num_classes(), mask.drop_y));
  Var sv = tape.constant(encode_explanations(items, schema, mask.drop_s));
  const auto& p = model.categorical(tape, xv, yv, sv).value();
  return {p.values().begin(), p.values().end()};
}

ExampleSelection relaxed_khot(const SelectorModel& model, const AttributeSchema& schema,
                              const std::vector<double>& x, std::size_t y,
                              const LinguisticExplanation& s, std::size_t k, double tau,
                              RngStream& rng) {
  const auto p = categorical_params(model, schema, x, y, s);
  Tape tape;
  Var pv = tape.constant(Tensor({1, p.size()}, p));
  const auto& m = relaxed_khot(tape, pv, k, tau, rng).value();
  return ExampleSelection::relaxed({m.values().begin(), m.values().end()});
}

ExampleSelection hard_select(const SelectorModel& model, const AttributeSchema& schema,
                             const std::vector<double>& x, std::size_t y,
                             const LinguisticExplanation& s, std::size_t k, RngStream& rng) {
  return ExampleSelection::hard(hard_select(categorical_params(model, schema, x, y, s), k, rng));
}

}  // namespace xplain
