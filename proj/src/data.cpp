#include "xplain/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "xplain/errors.hpp"

namespace xplain {

AttributeSchema::AttributeSchema(std::size_t num_classes, std::vector<AttributeType> types,
                                 std::size_t feature_dim, std::vector<std::string> class_names)
    : num_classes_(num_classes),
      types_(std::move(types)),
      feature_dim_(feature_dim),
      class_names_(std::move(class_names)) {
  if (num_classes_ < 2) {
    throw ConfigError("schema needs at least 2 classes");
  }
  if (types_.size() < 2) {
    throw ConfigError("schema needs at least 2 attribute types");
  }
  if (feature_dim_ == 0) {
    throw ConfigError("schema feature_dim must be positive");
  }
  for (std::size_t t = 0; t < types_.size(); ++t) {
    auto& type = types_[t];
    if (type.num_values < 2) {
      throw ConfigError("attribute type '" + type.name + "' needs at least 2 values");
    }
    if (type.value_names.empty()) {
      for (std::size_t v = 0; v < type.num_values; ++v) {
        type.value_names.push_back("v" + std::to_string(v));
      }
    } else if (type.value_names.size() != type.num_values) {
      throw ConfigError("attribute type '" + type.name + "' has " +
                        std::to_string(type.value_names.size()) + " value names for " +
                        std::to_string(type.num_values) + " values");
    }
    max_values_ = std::max(max_values_, type.num_values);
  }
  if (class_names_.empty()) {
    for (std::size_t c = 0; c < num_classes_; ++c) {
      class_names_.push_back("class" + std::to_string(c));
    }
  } else if (class_names_.size() != num_classes_) {
    throw ConfigError("class_names length does not match num_classes");
  }
}

AttributeSchema AttributeSchema::uniform(std::size_t num_classes, std::size_t num_types,
                                         std::size_t values_per_type, std::size_t feature_dim) {
  std::vector<AttributeType> types;
  for (std::size_t t = 0; t < num_types; ++t) {
    types.push_back({"attr" + std::to_string(t), values_per_type, {}});
  }
  return AttributeSchema(num_classes, std::move(types), feature_dim);
}

nlohmann::json AttributeSchema::to_json() const {
  nlohmann::json types = nlohmann::json::array();
  for (const auto& t : types_) {
    types.push_back({{"name", t.name}, {"num_values", t.num_values}, {"value_names", t.value_names}});
  }
  return {{"num_classes", num_classes_},
          {"feature_dim", feature_dim_},
          {"attribute_types", std::move(types)},
          {"class_names", class_names_}};
}

AttributeSchema AttributeSchema::from_json(const nlohmann::json& doc) {
  try {
    std::vector<AttributeType> types;
    for (const auto& item : doc.at("attribute_types")) {
      AttributeType t;
      t.name = item.at("name").get<std::string>();
      t.num_values = item.at("num_values").get<std::size_t>();
      if (item.contains("value_names")) {
        t.value_names = item.at("value_names").get<std::vector<std::string>>();
      }
      types.push_back(std::move(t));
    }
    std::vector<std::string> class_names;
    if (doc.contains("class_names")) {
      class_names = doc.at("class_names").get<std::vector<std::string>>();
    }
    return AttributeSchema(doc.at("num_classes").get<std::size_t>(), std::move(types),
                           doc.at("feature_dim").get<std::size_t>(), std::move(class_names));
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("schema: ") + ex.what());
  }
}

AttributeSchema AttributeSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read schema: " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("schema " + path.string() + ": " + ex.what());
  }
  return from_json(doc);
}

void AttributeSchema::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write schema: " + path.string());
  }
  out << to_json().dump(2) << '\n';
}

void validate_sample(const Sample& s, const AttributeSchema& schema) {
  if (s.features.size() != schema.feature_dim()) {
    throw DataError("expected " + std::to_string(schema.feature_dim()) + " features, got " +
                    std::to_string(s.features.size()));
  }
  for (double v : s.features) {
    if (!std::isfinite(v)) {
      throw DataError("non-finite feature value");
    }
  }
  if (s.label >= schema.num_classes()) {
    throw DataError("label " + std::to_string(s.label) + " out of range");
  }
  if (s.attributes.size() != schema.num_types()) {
    throw DataError("expected " + std::to_string(schema.num_types()) + " attributes, got " +
                    std::to_string(s.attributes.size()));
  }
  for (std::size_t t = 0; t < s.attributes.size(); ++t) {
    if (s.attributes[t] >= schema.num_values(t)) {
      throw DataError("attribute type " + std::to_string(t) + " ('" + schema.type(t).name +
                      "') value " + std::to_string(s.attributes[t]) + " out of range [0," +
                      std::to_string(schema.num_values(t)) + ")");
    }
  }
}

std::size_t designated_value(const AttributeSchema& schema, std::size_t c, std::size_t t) {
  return (c + t) % schema.num_values(t);
}

namespace {

std::vector<double> random_direction(std::size_t d, double length, RngStream& rng) {
  std::vector<double> v(d);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) {
    x *= length / norm;
  }
  return v;
}

}  // namespace

std::vector<Sample> gen_synthetic(const AttributeSchema& schema, const SyntheticConfig& config,
                                  RngStream& rng) {
  const std::size_t k = schema.num_classes();
  const std::size_t d = schema.feature_dim();
  if (config.n < 4 * k) {
    throw ConfigError("gen_synthetic needs n >= 4 * num_classes");
  }
  if (config.attribute_informativeness < 0.0 || config.attribute_informativeness > 1.0) {
    throw ConfigError("attribute_informativeness must lie in [0, 1]");
  }

  // Prototypes at pairwise distance ~class_separation for near-orthogonal directions.
  std::vector<std::vector<double>> prototypes;
  for (std::size_t c = 0; c < k; ++c) {
    prototypes.push_back(random_direction(d, config.class_separation / std::sqrt(2.0), rng));
  }
  std::vector<std::vector<std::vector<double>>> offsets(schema.num_types());
  for (std::size_t t = 0; t < schema.num_types(); ++t) {
    for (std::size_t v = 0; v < schema.num_values(t); ++v) {
      offsets[t].push_back(random_direction(d, config.attribute_offset_scale, rng));
    }
  }

  std::vector<Sample> out;
  out.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    Sample s;
    s.label = i % k;
    s.attributes.resize(schema.num_types());
    for (std::size_t t = 0; t < schema.num_types(); ++t) {
      const double u = rng.uniform();
      s.attributes[t] = u < config.attribute_informativeness
                            ? designated_value(schema, s.label, t)
                            : rng.uniform_index(schema.num_values(t));
    }
    s.features = prototypes[s.label];
    for (std::size_t t = 0; t < schema.num_types(); ++t) {
      const auto& off = offsets[t][s.attributes[t]];
      for (std::size_t j = 0; j < d; ++j) {
        s.features[j] += off[j];
      }
    }
    for (double& x : s.features) {
      x += config.noise_std * rng.normal();
    }
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::json sample_to_json(const Sample& s) {
  return {{"features", s.features}, {"label", s.label}, {"attributes", s.attributes}};
}

Sample sample_from_json(const nlohmann::json& doc, const AttributeSchema& schema,
                        std::size_t line) {
  Sample s;
  try {
    s.features = doc.at("features").get<std::vector<double>>();
    const auto label = doc.at("label").get<long long>();
    if (label < 0) {
      throw DataError("negative label");
    }
    s.label = static_cast<std::size_t>(label);
    for (const auto& a : doc.at("attributes")) {
      const auto v = a.get<long long>();
      if (v < 0) {
        throw DataError("negative attribute value");
      }
      s.attributes.push_back(static_cast<std::size_t>(v));
    }
    validate_sample(s, schema);
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("line " + std::to_string(line) + ": " + ex.what());
  } catch (const DataError& ex) {
    throw DataError("line " + std::to_string(line) + ": " + ex.what());
  }
  return s;
}

std::vector<Sample> load_dataset(const std::filesystem::path& path,
                                 const AttributeSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read dataset: " + path.string());
  }
  std::vector<Sample> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("line " + std::to_string(line) + ": malformed JSON: " + ex.what());
    }
    out.push_back(sample_from_json(doc, schema, line));
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write dataset: " + path.string());
  }
  for (const auto& s : samples) {
    out << sample_to_json(s).dump() << '\n';
  }
}

PoolSplit split_pool(const std::vector<Sample>& samples, double pool_fraction,
                     std::size_t min_pool_size, RngStream& rng) {
  if (!(pool_fraction > 0.0 && pool_fraction < 1.0)) {
    throw ConfigError("pool fraction must lie in (0, 1)");
  }
  std::size_t num_classes = 0;
  for (const auto& s : samples) {
    num_classes = std::max(num_classes, s.label + 1);
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    by_class[samples[i].label].push_back(i);
  }

  const auto target = static_cast<std::size_t>(
      std::llround(pool_fraction * static_cast<double>(samples.size())));
  if (target < min_pool_size || target == 0) {
    throw ConfigError("pool of " + std::to_string(target) + " samples is smaller than required " +
                      std::to_string(std::max<std::size_t>(min_pool_size, 1)));
  }

  // Largest-remainder allocation of the pool across classes.
  std::vector<std::size_t> quota(num_classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double exact = pool_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i) {
    const std::size_t c = remainders[i].second;
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  std::vector<char> in_pool(samples.size(), 0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto members = by_class[c];
    rng.shuffle(members);
    for (std::size_t i = 0; i < quota[c]; ++i) {
      in_pool[members[i]] = 1;
    }
  }

  PoolSplit split;
  std::vector<Sample> pool_samples;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (in_pool[i]) {
      split.pool_indices.push_back(i);
      pool_samples.push_back(samples[i]);
    } else {
      split.remainder_indices.push_back(i);
      split.remainder.push_back(samples[i]);
    }
  }
  split.pool = CandidatePool(std::move(pool_samples));
  return split;
}

}  // namespace xplain
