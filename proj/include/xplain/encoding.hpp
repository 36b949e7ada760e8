#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xplain/data.hpp"
#include "xplain/tensor.hpp"

namespace xplain {

/// One (attribute type, attribute value) pair.
struct LinguisticExplanation {
  std::size_t type = 0;
  std::size_t value = 0;

  bool operator==(const LinguisticExplanation&) const = default;
};

/// Inputs replaced by zero vectors when generating explanations (ablations).
struct InputMask {
  bool drop_x = false;
  bool drop_y = false;
  bool drop_s = false;
};

/// Rows of `features`, one per sample; zeros if `zero` is set.
diff::Tensor feature_rows(std::span<const std::vector<double>* const> features,
                          std::size_t dim, bool zero = false);
diff::Tensor feature_rows(std::span<const Sample> samples, std::size_t dim, bool zero = false);

diff::Tensor one_hot_rows(std::span<const std::size_t> labels, std::size_t width,
                          bool zero = false);

/// Type one-hot (length T) followed by value one-hot (length max V).
std::size_t explanation_width(const AttributeSchema& schema);
diff::Tensor encode_explanations(std::span<const LinguisticExplanation> items,
                                 const AttributeSchema& schema, bool zero = false);

}  // namespace xplain
