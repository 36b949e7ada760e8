#include "xplain/encoding.hpp"

#include <algorithm>

#include "xplain/errors.hpp"

namespace xplain {

diff::Tensor feature_rows(std::span<const std::vector<double>* const> features,
                          std::size_t dim, bool zero) {
  diff::Tensor out = diff::Tensor::matrix(features.size(), dim);
  for (std::size_t r = 0; r < features.size(); ++r) {
    if (features[r]->size() != dim) {
      throw ConfigError("feature vector has " + std::to_string(features[r]->size()) +
                        " entries, expected " + std::to_string(dim));
    }
    if (!zero) {
      std::copy(features[r]->begin(), features[r]->end(), out.row(r).begin());
    }
  }
  return out;
}

diff::Tensor feature_rows(std::span<const Sample> samples, std::size_t dim, bool zero) {
  std::vector<const std::vector<double>*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) {
    ptrs.push_back(&s.features);
  }
  return feature_rows(ptrs, dim, zero);
}

diff::Tensor one_hot_rows(std::span<const std::size_t> labels, std::size_t width, bool zero) {
  diff::Tensor out = diff::Tensor::matrix(labels.size(), width);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= width) {
      throw ConfigError("one-hot index out of range");
    }
    if (!zero) {
      out(r, labels[r]) = 1.0;
    }
  }
  return out;
}

std::size_t explanation_width(const AttributeSchema& schema) {
  return schema.num_types() + schema.max_values();
}

diff::Tensor encode_explanations(std::span<const LinguisticExplanation> items,
                                 const AttributeSchema& schema, bool zero) {
  const std::size_t t_count = schema.num_types();
  diff::Tensor out = diff::Tensor::matrix(items.size(), explanation_width(schema));
  for (std::size_t r = 0; r < items.size(); ++r) {
    const auto& s = items[r];
    if (s.type >= t_count || s.value >= schema.num_values(s.type)) {
      throw ConfigError("linguistic explanation (" + std::to_string(s.type) + ", " +
                        std::to_string(s.value) + ") outside the schema");
    }
    if (!zero) {
      out(r, s.type) = 1.0;
      out(r, t_count + s.value) = 1.0;
    }
  }
  return out;
}

}  // namespace xplain
