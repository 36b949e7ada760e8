#include "xplain/gradcheck.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "xplain/errors.hpp"

namespace xplain::diff {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const std::vector<ParameterStore*>& stores, const LossBuilder& loss) {
  Tape tape;
  for (ParameterStore* s : stores) {
    tape.train(*s);
  }
  Var out = loss(tape);
  if (out.value().size() != 1) {
    throw ConfigError("grad_check: loss must be a single element");
  }
  return out.value()[0];
}

}  // namespace

GradCheckReport grad_check(const std::vector<ParameterStore*>& stores, const LossBuilder& loss,
                           double tolerance, double step) {
  const double first = evaluate(stores, loss);
  const double second = evaluate(stores, loss);
  if (std::bit_cast<std::uint64_t>(first) != std::bit_cast<std::uint64_t>(second)) {
    throw NumericalError("grad_check: computation is not reproducible (" + std::to_string(first) +
                         " vs " + std::to_string(second) + ")");
  }

  for (ParameterStore* s : stores) {
    s->zero_grad();
  }
  double kink_margin = 0.0;
  {
    Tape tape;
    for (ParameterStore* s : stores) {
      tape.train(*s);
    }
    Var out = loss(tape);
    tape.backward(out);
    kink_margin = tape.kink_margin();
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  report.kink_margin = kink_margin;
  for (ParameterStore* s : stores) {
    for (auto& [name, entry] : *s) {
      GradCheckEntry result{name, 0.0, 0, {}};
      auto values = entry.value.values();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + step;
        const double plus = evaluate(stores, loss);
        values[i] = saved - step;
        const double minus = evaluate(stores, loss);
        values[i] = saved;
        const double numeric = (plus - minus) / (2.0 * step);
        const double err = relative_error(entry.grad[i], numeric);
        if (err > result.max_rel_error) {
          result.max_rel_error = err;
          result.worst_index = i;
        }
        if (err > tolerance) {
          result.flagged.push_back(i);
        }
      }
      report.max_rel_error = std::max(report.max_rel_error, result.max_rel_error);
      report.entries.push_back(std::move(result));
    }
    s->zero_grad();
  }
  return report;
}

}  // namespace xplain::diff
