#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "xplain/data.hpp"
#include "xplain/params.hpp"
#include "xplain/rng.hpp"

namespace test_support {

inline xplain::Sample make_sample(std::vector<double> features, std::size_t label,
                                  std::vector<std::size_t> attributes) {
  xplain::Sample s;
  s.features = std::move(features);
  s.label = label;
  s.attributes = std::move(attributes);
  return s;
}

inline xplain::Sample random_sample(const xplain::AttributeSchema& schema, xplain::RngStream& rng,
                                    std::size_t label) {
  xplain::Sample s;
  s.label = label;
  for (std::size_t j = 0; j < schema.feature_dim(); ++j) {
    s.features.push_back(rng.normal());
  }
  for (std::size_t t = 0; t < schema.num_types(); ++t) {
    s.attributes.push_back(rng.uniform_index(schema.num_values(t)));
  }
  return s;
}

inline void randomize(xplain::diff::ParameterStore& store, xplain::RngStream& rng,
                      double scale = 1.0) {
  for (auto& [_, e] : store) {
    for (double& v : e.value.values()) {
      v = scale * rng.normal();
    }
  }
}

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("xplain_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test_support
