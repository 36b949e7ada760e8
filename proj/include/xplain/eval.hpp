#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xplain/engine.hpp"

namespace xplain {

struct FidelityResult {
  double predictor_accuracy = 0.0;
  double reasoner_accuracy = 0.0;  // unknown counts as wrong
  double consistency = 0.0;        // unknown counts as inconsistent
};

/// Sample i draws from rng.derive(i), so results do not depend on order.
FidelityResult consistency_metric(const std::vector<Sample>& eval, const ExplanationSystem& system,
                                  const RngStream& rng, const InputMask& mask = {});

/// Per-type attribute classifiers from features alone (dense -> relu -> dense).
class DirectAttributeBaseline {
 public:
  static DirectAttributeBaseline train(const std::vector<Sample>& train,
                                       const AttributeSchema& schema, RngStream& rng,
                                       std::size_t hidden = 512, std::size_t epochs = 60);

  std::size_t predict(const std::vector<double>& x, std::size_t type) const;
  /// Fraction of `samples` whose type-t attribute is recovered.
  double accuracy(const std::vector<Sample>& samples, std::size_t type) const;

 private:
  std::vector<PredictorModel> per_type_;
};

struct AttributeAccuracy {
  double ours = 0.0;
  double random_baseline = 0.0;
  std::optional<double> direct_baseline;
};

/// Compares each chosen (type, value) of M-pair explanations against the
/// sample's ground truth. The baselines are scored on the same chosen types.
AttributeAccuracy attribute_accuracy(const std::vector<Sample>& eval,
                                     const ExplanationSystem& system, std::size_t m,
                                     const RngStream& rng,
                                     const DirectAttributeBaseline* direct = nullptr);

/// For each column j, the row index of the largest entry (ties to the lowest).
std::vector<std::size_t> identify(const std::vector<std::vector<double>>& q);

struct ComplementarityResult {
  std::size_t m = 0;
  double accuracy = 0.0;
  double baseline_accuracy = 0.0;
  /// confusion[j][i]: pairs whose example set j was attributed to explanation i.
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::vector<std::size_t>> baseline_confusion;
};

ComplementarityResult complementarity_eval(const std::vector<Sample>& eval,
                                           const ExplanationSystem& system, std::size_t m,
                                           const RngStream& rng);

/// Keys "none", "x", "y", "s". The "none" entry reproduces consistency_metric.
std::map<std::string, FidelityResult> ablation_eval(const std::vector<Sample>& eval,
                                                    const ExplanationSystem& system,
                                                    const RngStream& rng);

struct EvalReport {
  std::size_t eval_count = 0;
  std::size_t m = 0;
  FidelityResult fidelity;
  AttributeAccuracy attributes;
  std::map<std::size_t, ComplementarityResult> complementarity;  // by M
  std::map<std::string, FidelityResult> ablations;
};

/// Runs every metric. Each metric uses its own child stream of `rng`.
EvalReport evaluate_all(const std::vector<Sample>& eval, const ExplanationSystem& system,
                        std::size_t m, const RngStream& rng,
                        const DirectAttributeBaseline* direct = nullptr);

nlohmann::json report_to_json(const EvalReport& report);
/// Throws DataError if the document lacks a field or holds a rate outside [0, 1].
void validate_report_json(const nlohmann::json& doc);

std::string curve_csv(const EvalReport& report);      // M,ours,baseline
std::string confusion_csv(const ComplementarityResult& result);

}  // namespace xplain
