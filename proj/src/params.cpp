#include "xplain/params.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xplain/errors.hpp"

namespace xplain::diff {

ParameterEntry& ParameterStore::add(const std::string& name, std::vector<std::size_t> shape) {
  if (entries_.count(name) != 0) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  Tensor value(shape);
  Tensor grad(std::move(shape));
  auto [it, _] = entries_.emplace(name, ParameterEntry{std::move(value), std::move(grad)});
  return it->second;
}

ParameterEntry& ParameterStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw ConfigError("unknown parameter: " + name);
  }
  return it->second;
}

const ParameterEntry& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw ConfigError("unknown parameter: " + name);
  }
  return it->second;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) {
    n += e.value.size();
  }
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, e] : entries_) {
    e.grad.fill(0.0);
  }
}

void ParameterStore::fill(double v) {
  for (auto& [_, e] : entries_) {
    e.value.fill(v);
  }
}

void ParameterStore::init_glorot(RngStream& rng) {
  for (auto& [_, e] : entries_) {
    if (e.value.rank() == 1) {
      e.value.fill(0.0);
      continue;
    }
    const double fan_in = static_cast<double>(e.value.rows());
    const double fan_out = static_cast<double>(e.value.cols());
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : e.value.values()) {
      w = a * (2.0 * rng.uniform() - 1.0);
    }
  }
}

std::uint64_t ParameterStore::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, e] : entries_) {
    for (char c : name) {
      feed(static_cast<unsigned char>(c));
    }
    for (std::size_t d : e.value.shape()) {
      feed(d);
    }
    for (double v : e.value.values()) {
      feed(std::bit_cast<std::uint64_t>(v));
    }
  }
  return h;
}

void ParameterStore::assign_values(const ParameterStore& other) {
  for (const auto& [name, e] : other.entries_) {
    auto it = entries_.find(name);
    if (it != entries_.end()) {
      it->second.value = e.value;
    }
  }
}

void sgd_step(ParameterStore& params, double learning_rate, double weight_decay) {
  if (!(learning_rate > 0.0)) {
    throw ConfigError("learning rate must be positive");
  }
  if (weight_decay < 0.0) {
    throw ConfigError("weight decay must be nonnegative");
  }
  for (auto& [_, e] : params) {
    auto w = e.value.values();
    auto g = e.grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= learning_rate * (g[i] + weight_decay * w[i]);
    }
  }
  params.zero_grad();
}

nlohmann::json to_checkpoint_json(const ParameterStore& params) {
  nlohmann::json entries = nlohmann::json::object();
  for (const auto& [name, e] : params) {
    entries[name] = {{"shape", e.value.shape()},
                     {"values", std::vector<double>(e.value.values().begin(),
                                                    e.value.values().end())}};
  }
  return {{"format_version", 1}, {"entries", std::move(entries)}};
}

ParameterStore from_checkpoint_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format_version", 0) != 1 || !doc.contains("entries")) {
    throw DataError("checkpoint: expected format_version 1 with an entries object");
  }
  ParameterStore store;
  for (const auto& [name, item] : doc.at("entries").items()) {
    auto shape = item.at("shape").get<std::vector<std::size_t>>();
    auto values = item.at("values").get<std::vector<double>>();
    Tensor t(shape, std::move(values));
    store.add(name, shape).value = std::move(t);
  }
  return store;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write checkpoint: " + path.string());
  }
  out << to_checkpoint_json(params).dump() << '\n';
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read checkpoint: " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("checkpoint " + path.string() + ": " + ex.what());
  }
  return from_checkpoint_json(doc);
}

void restore_into(ParameterStore& target, const ParameterStore& source) {
  if (target.size() != source.size()) {
    throw DataError("checkpoint entry count mismatch");
  }
  for (auto& [name, e] : target) {
    if (!source.contains(name)) {
      throw DataError("checkpoint is missing entry " + name);
    }
    const auto& src = source.at(name);
    if (!src.value.same_shape(e.value)) {
      throw DataError("checkpoint shape mismatch for " + name);
    }
    e.value = src.value;
    e.grad.fill(0.0);
  }
}

ParameterStore merge_stores(const std::vector<const ParameterStore*>& stores) {
  ParameterStore out;
  for (const auto* s : stores) {
    for (const auto& [name, e] : *s) {
      out.add(name, e.value.shape()).value = e.value;
    }
  }
  return out;
}

ParameterStore filter_prefix(const ParameterStore& source, const std::string& prefix) {
  ParameterStore out;
  for (const auto& [name, e] : source) {
    if (name.rfind(prefix, 0) == 0) {
      out.add(name, e.value.shape()).value = e.value;
    }
  }
  return out;
}

}  // namespace xplain::diff
