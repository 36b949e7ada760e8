#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace xplain {

struct NamedGradCheck {
  std::string name;
  std::size_t trials = 0;
  double max_rel_error = 0.0;
  std::size_t redrawn = 0;  // instances skipped for sitting on a kink
};

struct GradientSuiteReport {
  std::vector<NamedGradCheck> checks;
  double tolerance = 0.0;
  bool passed() const;
  nlohmann::json to_json() const;
};

/// Central-difference checks of every differentiable building block and of
/// the full objective on a 4-input toy world; `trials` randomized instances
/// per check.
GradientSuiteReport run_gradient_suite(std::uint64_t seed, std::size_t trials,
                                       double tolerance = 1e-3);

struct OracleCheckReport {
  std::size_t configs = 0;
  std::size_t violations = 0;
  double max_gap = 0.0;             // max over configs of bound - term_A
  double max_identity_error = 0.0;  // |I - (A - B)| and cross-path disagreement
  std::vector<double> estimator_z_scores;
  nlohmann::json to_json() const;
};

/// Random toy worlds: variational inequality and identity checks on each;
/// Monte-Carlo bound_term z-scores on the first `estimator_configs` worlds.
OracleCheckReport run_oracle_check(std::uint64_t seed, std::size_t configs,
                                   std::size_t estimator_configs, std::size_t trials);

}  // namespace xplain
