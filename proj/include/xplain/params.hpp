#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xplain/rng.hpp"
#include "xplain/tensor.hpp"

namespace xplain::diff {

struct ParameterEntry {
  Tensor value;
  Tensor grad;
};

/// Named trainable arrays with paired gradient buffers. Iteration order is
/// lexicographic by name, which fixes every traversal (init, update, hash).
class ParameterStore {
 public:
  using Map = std::map<std::string, ParameterEntry>;

  ParameterEntry& add(const std::string& name, std::vector<std::size_t> shape);
  ParameterEntry& at(const std::string& name);
  const ParameterEntry& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;

  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  void zero_grad();
  void fill(double v);

  /// Glorot-uniform for rank-2 entries, zero for rank-1 (biases).
  void init_glorot(RngStream& rng);

  /// FNV-1a over names, shapes and value bits.
  std::uint64_t fingerprint() const;

  /// Copies values of every entry in `other` whose name also lives here.
  void assign_values(const ParameterStore& other);

 private:
  Map entries_;
};

/// w <- w - lr * (g + wd * w), then zero the gradients.
void sgd_step(ParameterStore& params, double learning_rate, double weight_decay);

// Checkpoint: {"format_version":1, "entries": {name: {"shape":[..], "values":[..]}}}
nlohmann::json to_checkpoint_json(const ParameterStore& params);
ParameterStore from_checkpoint_json(const nlohmann::json& doc);
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params);
ParameterStore load_checkpoint(const std::filesystem::path& path);

/// Loads values from `source` into `target`, requiring identical names and shapes.
void restore_into(ParameterStore& target, const ParameterStore& source);

/// Merges stores with disjoint names (for multi-model checkpoints).
ParameterStore merge_stores(const std::vector<const ParameterStore*>& stores);

/// Entries of `source` whose name starts with `prefix`.
ParameterStore filter_prefix(const ParameterStore& source, const std::string& prefix);

}  // namespace xplain::diff
