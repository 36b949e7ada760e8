#include "xplain/models.hpp"

#include <fstream>

#include "xplain/errors.hpp"

namespace xplain {

ExplanationModels::ExplanationModels(const AttributeSchema& schema, std::size_t pool_size,
                                     const ModelDims& d)
    : explainer(schema, d.common_dim),
      selector(schema, pool_size, d.common_dim),
      reasoner(schema, d.embed_dim, d.common_dim),
      dims(d) {}

std::vector<diff::ParameterStore*> ExplanationModels::stores() {
  return {&explainer.params(), &selector.params(), &reasoner.params()};
}

void ExplanationModels::init(RngStream& rng) {
  for (auto* s : stores()) {
    s->init_glorot(rng);
  }
}

void ExplanationModels::zero_grad() {
  for (auto* s : stores()) {
    s->zero_grad();
  }
}

void ExplanationModels::save(const std::filesystem::path& dir) const {
  diff::save_checkpoint(dir / "explainers.json",
                        diff::merge_stores({&explainer.params(), &selector.params(),
                                            &reasoner.params()}));
  std::ofstream meta(dir / "explainers.meta.json");
  if (!meta) {
    throw ConfigError("cannot write explainer metadata in " + dir.string());
  }
  meta << nlohmann::json{{"common_dim", dims.common_dim},
                         {"embed_dim", dims.embed_dim},
                         {"pool_size", selector.pool_size()}}
              .dump(2)
       << '\n';
}

ExplanationModels ExplanationModels::load(const std::filesystem::path& dir,
                                          const AttributeSchema& schema, std::size_t pool_size) {
  std::ifstream in(dir / "explainers.meta.json");
  if (!in) {
    throw ConfigError("missing explainer metadata in " + dir.string());
  }
  nlohmann::json meta;
  in >> meta;
  if (meta.at("pool_size").get<std::size_t>() != pool_size) {
    throw ConfigError("explainer checkpoint was trained for a different pool size");
  }
  ModelDims dims{meta.at("common_dim").get<std::size_t>(), meta.at("embed_dim").get<std::size_t>()};
  ExplanationModels models(schema, pool_size, dims);
  const auto all = diff::load_checkpoint(dir / "explainers.json");
  diff::restore_into(models.explainer.params(), diff::filter_prefix(all, "explainer."));
  diff::restore_into(models.selector.params(), diff::filter_prefix(all, "selector."));
  diff::restore_into(models.reasoner.params(), diff::filter_prefix(all, "reasoner."));
  return models;
}

}  // namespace xplain
