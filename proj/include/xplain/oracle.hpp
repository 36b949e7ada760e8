#pragma once

#include <memory>
#include <vector>

#include "xplain/models.hpp"
#include "xplain/objective.hpp"
#include "xplain/predictor.hpp"

namespace xplain {

/// Small fully enumerable world: every subset of the pool of size <= k can
/// be listed, so every expectation has an exact value.
struct ToyWorld {
  AttributeSchema schema;
  std::vector<Sample> inputs;  // uniform p(x) over these
  std::unique_ptr<CandidatePool> pool;
  std::size_t k = 1;
  PredictorModel predictor;
  ExplanationModels models;

  std::unique_ptr<PoolTensors> pool_tensors;
};

struct ToyWorldShape {
  std::size_t inputs = 3;
  std::size_t classes = 3;
  std::size_t types = 3;
  std::size_t values = 2;
  std::size_t pool = 5;
  std::size_t k = 2;
  std::size_t feature_dim = 3;
  /// Multiplies the initial weights so distributions are far from uniform.
  double weight_scale = 2.0;
};

ToyWorld make_toy_world(const ToyWorldShape& shape, RngStream& rng);

/// Randomized shape within inputs<=4, K<=3, T<=3, N<=6, k<=2.
ToyWorldShape random_toy_shape(RngStream& rng);

/// Explicit probability tables of one ToyWorld.
struct ToyTables {
  std::size_t classes = 0;
  std::size_t types = 0;
  std::vector<std::vector<std::size_t>> subsets;      // all D with 1 <= |D| <= k
  std::vector<std::vector<double>> p_y;               // [x][y]
  std::vector<std::vector<std::vector<double>>> p_s;  // [x][y][s]
  std::vector<std::vector<std::vector<std::vector<double>>>> p_d;  // [x][y][s][D]
  std::vector<std::vector<std::vector<std::vector<double>>>> q;    // [x][s][D][y]
};

/// All subsets of {0..n-1} with 1..k elements, ascending, by size then lexicographic.
std::vector<std::vector<std::size_t>> enumerate_subsets(std::size_t n, std::size_t k);

/// Probability that the union of k independent draws from p equals `subset`.
double union_probability(const std::vector<double>& p, const std::vector<std::size_t>& subset,
                         std::size_t k);

ToyTables tabulate(const ToyWorld& world);

struct InteractionInfo {
  double value = 0.0;           // via joint entropies
  double term_A = 0.0;          // I(y,s|x,D) via log-ratio summation
  double term_B = 0.0;          // I(y,s|x) via log-ratio summation
  double term_A_entropy = 0.0;  // I(y,s|x,D) via entropies
  double term_B_entropy = 0.0;  // I(y,s|x) via entropies
};

InteractionInfo exact_interaction_info(const ToyTables& tables);
InteractionInfo exact_interaction_info(const ToyWorld& world);

struct VariationalBound {
  double bound = 0.0;
  double term_A = 0.0;
};

/// Bound built from the reasoner with the exact p(s|x,D).
VariationalBound exact_variational_bound(const ToyTables& tables);
VariationalBound exact_variational_bound(const ToyWorld& world);

/// Exact expectation of bound_term under hard_union sampling for input x
/// and class y.
double enumerated_bound_term(const ToyTables& tables, std::size_t x, std::size_t y);

}  // namespace xplain
