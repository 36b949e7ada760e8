#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xplain/autodiff.hpp"

namespace xplain::diff {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<std::size_t> flagged;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  /// Tape::kink_margin of the unperturbed evaluation.
  double kink_margin = 0.0;
  bool passed() const { return max_rel_error <= tolerance; }
};

/// Builds a scalar loss on the given tape, reading parameters from the
/// stores under check (already registered trainable on the tape). Must be a
/// pure function of the parameter values.
using LossBuilder = std::function<Var(Tape&)>;

/// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients from
/// dominating with round-off.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Compares analytic gradients with central differences (step `step`) for
/// every element of every store. Throws NumericalError if two evaluations at
/// identical parameters disagree bit-wise.
GradCheckReport grad_check(const std::vector<ParameterStore*>& stores, const LossBuilder& loss,
                           double tolerance, double step = 1e-4);

}  // namespace xplain::diff
