#include "xplain/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "xplain/errors.hpp"

namespace xplain::diff {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace {

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty()) {
    throw ConfigError("tensor shape must have at least one dimension");
  }
  for (std::size_t d : shape) {
    if (d == 0) {
      throw ConfigError("tensor dimensions must be positive");
    }
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(element_count(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_shape(shape_);
  if (values_.size() != element_count(shape_)) {
    std::ostringstream msg;
    msg << "tensor value count " << values_.size() << " does not match shape product "
        << element_count(shape_);
    throw ConfigError(msg.str());
  }
}

Tensor Tensor::row_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 1) {
    return 1;
  }
  return shape_.empty() ? 0 : size() / shape_.back();
}

std::size_t Tensor::cols() const { return shape_.empty() ? 0 : shape_.back(); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  return Tensor(std::move(shape), values_);
}

}  // namespace xplain::diff
