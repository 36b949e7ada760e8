#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xplain/rng.hpp"

namespace xplain {

struct AttributeType {
  std::string name;
  std::size_t num_values = 0;
  std::vector<std::string> value_names;  // defaults to v0, v1, ...

  bool operator==(const AttributeType&) const = default;
};

/// Classes, attribute types with their value cardinalities, and feature size.
class AttributeSchema {
 public:
  AttributeSchema(std::size_t num_classes, std::vector<AttributeType> types,
                  std::size_t feature_dim, std::vector<std::string> class_names = {});

  /// Uniform schema: `num_types` types each with `values_per_type` values.
  static AttributeSchema uniform(std::size_t num_classes, std::size_t num_types,
                                 std::size_t values_per_type, std::size_t feature_dim);

  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_types() const { return types_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t num_values(std::size_t type) const { return types_.at(type).num_values; }
  std::size_t max_values() const { return max_values_; }
  const AttributeType& type(std::size_t t) const { return types_.at(t); }
  const std::vector<AttributeType>& types() const { return types_; }
  const std::string& class_name(std::size_t c) const { return class_names_.at(c); }
  const std::string& value_name(std::size_t t, std::size_t v) const {
    return types_.at(t).value_names.at(v);
  }

  nlohmann::json to_json() const;
  static AttributeSchema from_json(const nlohmann::json& doc);
  static AttributeSchema load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const AttributeSchema&) const = default;

 private:
  std::size_t num_classes_;
  std::vector<AttributeType> types_;
  std::size_t feature_dim_;
  std::vector<std::string> class_names_;
  std::size_t max_values_ = 0;
};

struct Sample {
  std::vector<double> features;
  std::size_t label = 0;
  std::vector<std::size_t> attributes;  // full ground-truth assignment

  bool operator==(const Sample&) const = default;
};

/// Throws DataError when `s` does not satisfy `schema`.
void validate_sample(const Sample& s, const AttributeSchema& schema);

/// Ordered candidate examples; selector logits index into this order.
class CandidatePool {
 public:
  CandidatePool() = default;
  explicit CandidatePool(std::vector<Sample> samples) : samples_(std::move(samples)) {}

  std::size_t size() const { return samples_.size(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const { return samples_; }

 private:
  std::vector<Sample> samples_;
};

struct SyntheticConfig {
  std::size_t n = 0;
  double class_separation = 6.0;
  double attribute_informativeness = 0.8;
  double attribute_offset_scale = 2.0;
  double noise_std = 1.0;
};

/// Designated value of attribute type `t` for class `c`.
std::size_t designated_value(const AttributeSchema& schema, std::size_t c, std::size_t t);

/// Class-balanced labels (i mod K). Features are a class prototype plus one
/// offset per (type, value) of the sample's attributes plus isotropic noise.
std::vector<Sample> gen_synthetic(const AttributeSchema& schema, const SyntheticConfig& config,
                                  RngStream& rng);

std::vector<Sample> load_dataset(const std::filesystem::path& path, const AttributeSchema& schema);
void save_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples);

nlohmann::json sample_to_json(const Sample& s);
/// `line` is used only for error messages.
Sample sample_from_json(const nlohmann::json& doc, const AttributeSchema& schema,
                        std::size_t line);

struct PoolSplit {
  CandidatePool pool;
  std::vector<Sample> remainder;
  std::vector<std::size_t> pool_indices;       // into the input list, ascending
  std::vector<std::size_t> remainder_indices;  // ascending
};

/// Class-stratified partition. Pool size is round(fraction * n), allocated
/// to classes by largest remainder (ties to the lower class).
PoolSplit split_pool(const std::vector<Sample>& samples, double pool_fraction,
                     std::size_t min_pool_size, RngStream& rng);

}  // namespace xplain
