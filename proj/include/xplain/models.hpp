#pragma once

#include <filesystem>
#include <vector>

#include "xplain/explainer.hpp"
#include "xplain/reasoner.hpp"
#include "xplain/selector.hpp"

namespace xplain {

struct ModelDims {
  std::size_t common_dim = 64;
  std::size_t embed_dim = 32;
};

/// The three jointly trained networks.
struct ExplanationModels {
  ExplanationModels(const AttributeSchema& schema, std::size_t pool_size, const ModelDims& dims);

  ExplainerModel explainer;
  SelectorModel selector;
  ReasonerModel reasoner;
  ModelDims dims;

  std::vector<diff::ParameterStore*> stores();
  void init(RngStream& rng);
  void zero_grad();

  /// Writes explainers.json (all three prefixes) and explainers.meta.json.
  void save(const std::filesystem::path& dir) const;
  static ExplanationModels load(const std::filesystem::path& dir, const AttributeSchema& schema,
                                std::size_t pool_size);
};

}  // namespace xplain
