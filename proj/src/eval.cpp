#include "xplain/eval.hpp"

#include <sstream>

#include "xplain/errors.hpp"

namespace xplain {

namespace {

void require_nonempty(const std::vector<Sample>& eval, const char* who) {
  if (eval.empty()) {
    throw ConfigError(std::string(who) + ": empty evaluation set");
  }
}

double rate(std::size_t hits, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

FidelityResult consistency_metric(const std::vector<Sample>& eval, const ExplanationSystem& system,
                                  const RngStream& rng, const InputMask& mask) {
  require_nonempty(eval, "consistency_metric");
  std::size_t predictor_hits = 0, reasoner_hits = 0, agree = 0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    RngStream local = rng.derive(i);
    const std::size_t predicted = argmax(predict_proba(system.predictor, eval[i].features));
    const auto routed = reasoner_path_predict(eval[i].features, system, local, mask);
    predictor_hits += predicted == eval[i].label;
    reasoner_hits += routed && *routed == eval[i].label;
    agree += routed && *routed == predicted;
  }
  return {rate(predictor_hits, eval.size()), rate(reasoner_hits, eval.size()),
          rate(agree, eval.size())};
}

DirectAttributeBaseline DirectAttributeBaseline::train(const std::vector<Sample>& train,
                                                       const AttributeSchema& schema,
                                                       RngStream& rng, std::size_t hidden,
                                                       std::size_t epochs) {
  DirectAttributeBaseline out;
  PredictorConfig config;
  config.hidden = hidden;
  config.epochs = epochs;
  for (std::size_t t = 0; t < schema.num_types(); ++t) {
    // Same network shape as the predictor, with the type's values as classes.
    AttributeSchema per_type(schema.num_values(t), schema.types(), schema.feature_dim());
    std::vector<Sample> relabeled = train;
    for (auto& s : relabeled) {
      s.label = s.attributes.at(t);
    }
    out.per_type_.push_back(train_predictor(relabeled, per_type, config, rng));
  }
  return out;
}

std::size_t DirectAttributeBaseline::predict(const std::vector<double>& x,
                                             std::size_t type) const {
  return argmax(predict_proba(per_type_.at(type), x));
}

double DirectAttributeBaseline::accuracy(const std::vector<Sample>& samples,
                                         std::size_t type) const {
  std::size_t hits = 0;
  for (const auto& s : samples) {
    hits += predict(s.features, type) == s.attributes.at(type);
  }
  return rate(hits, samples.size());
}

AttributeAccuracy attribute_accuracy(const std::vector<Sample>& eval,
                                     const ExplanationSystem& system, std::size_t m,
                                     const RngStream& rng, const DirectAttributeBaseline* direct) {
  require_nonempty(eval, "attribute_accuracy");
  std::size_t ours = 0, direct_hits = 0, total = 0;
  double chance = 0.0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    RngStream local = rng.derive(i);
    const auto e = generate_explanations(eval[i].features, m, system, local);
    for (const auto& pair : e.pairs) {
      const std::size_t truth = eval[i].attributes.at(pair.s.type);
      ours += pair.s.value == truth;
      chance += 1.0 / static_cast<double>(system.schema.num_values(pair.s.type));
      if (direct) {
        direct_hits += direct->predict(eval[i].features, pair.s.type) == truth;
      }
      ++total;
    }
  }
  AttributeAccuracy out;
  out.ours = rate(ours, total);
  out.random_baseline = chance / static_cast<double>(total);
  if (direct) {
    out.direct_baseline = rate(direct_hits, total);
  }
  return out;
}

std::vector<std::size_t> identify(const std::vector<std::vector<double>>& q) {
  std::vector<std::size_t> out;
  if (q.empty()) {
    return out;
  }
  for (std::size_t j = 0; j < q.front().size(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.size(); ++i) {
      if (q[i][j] > q[best][j]) {
        best = i;
      }
    }
    out.push_back(best);
  }
  return out;
}

ComplementarityResult complementarity_eval(const std::vector<Sample>& eval,
                                           const ExplanationSystem& system, std::size_t m,
                                           const RngStream& rng) {
  require_nonempty(eval, "complementarity_eval");
  if (m == 0 || m > system.schema.num_types()) {
    throw ConfigError("complementarity_eval: M must lie in [1, T]");
  }
  ComplementarityResult out;
  out.m = m;
  out.confusion.assign(m, std::vector<std::size_t>(m, 0));
  out.baseline_confusion = out.confusion;
  std::size_t hits = 0, baseline_hits = 0;

  for (std::size_t n = 0; n < eval.size(); ++n) {
    RngStream local = rng.derive(n);
    const auto e = generate_explanations(eval[n].features, m, system, local);
    std::vector<LinguisticExplanation> s;
    std::vector<std::vector<std::size_t>> sets;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        s.push_back(e.pairs[i].s);
        sets.push_back(e.pairs[j].selection.indices);
      }
    }
    // Baseline rows: every explanation shares the example set of the first.
    for (std::size_t i = 0; i < m; ++i) {
      s.push_back(e.pairs[i].s);
      sets.push_back(e.pairs[0].selection.indices);
    }
    const auto posts = reasoner_posteriors(system, eval[n].features, s, sets);
    const std::size_t y = e.predicted_class;
    std::vector<std::vector<double>> q(m, std::vector<double>(m));
    std::vector<std::vector<double>> qb(m, std::vector<double>(m));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        q[i][j] = posts[i * m + j].class_probs[y];
        qb[i][j] = posts[m * m + i].class_probs[y];
      }
    }
    const auto picked = identify(q);
    const auto picked_baseline = identify(qb);
    for (std::size_t j = 0; j < m; ++j) {
      hits += picked[j] == j;
      baseline_hits += picked_baseline[j] == j;
      ++out.confusion[j][picked[j]];
      ++out.baseline_confusion[j][picked_baseline[j]];
    }
  }
  out.accuracy = rate(hits, eval.size() * m);
  out.baseline_accuracy = rate(baseline_hits, eval.size() * m);
  return out;
}

std::map<std::string, FidelityResult> ablation_eval(const std::vector<Sample>& eval,
                                                    const ExplanationSystem& system,
                                                    const RngStream& rng) {
  std::map<std::string, FidelityResult> out;
  out["none"] = consistency_metric(eval, system, rng, {});
  out["x"] = consistency_metric(eval, system, rng, {true, false, false});
  out["y"] = consistency_metric(eval, system, rng, {false, true, false});
  out["s"] = consistency_metric(eval, system, rng, {false, false, true});
  return out;
}

namespace {

enum Stream : std::uint64_t { kFidelity = 1, kAttributes = 2, kComplementarity = 3 };

}  // namespace

EvalReport evaluate_all(const std::vector<Sample>& eval, const ExplanationSystem& system,
                        std::size_t m, const RngStream& rng,
                        const DirectAttributeBaseline* direct) {
  require_nonempty(eval, "evaluate");
  if (m == 0 || m > system.schema.num_types()) {
    throw ConfigError("evaluate: M must lie in [1, T]");
  }
  EvalReport report;
  report.eval_count = eval.size();
  report.m = m;
  // Ablations share the fidelity stream so "none" equals the main result.
  report.ablations = ablation_eval(eval, system, rng.derive(kFidelity));
  report.fidelity = report.ablations.at("none");
  report.attributes = attribute_accuracy(eval, system, m, rng.derive(kAttributes), direct);
  const RngStream comp = rng.derive(kComplementarity);
  for (std::size_t mm = 1; mm <= system.schema.num_types(); ++mm) {
    report.complementarity[mm] = complementarity_eval(eval, system, mm, comp.derive(mm));
  }
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json accuracy_by_m = nlohmann::json::object();
  nlohmann::json baseline_by_m = nlohmann::json::object();
  for (const auto& [mm, c] : report.complementarity) {
    accuracy_by_m[std::to_string(mm)] = c.accuracy;
    baseline_by_m[std::to_string(mm)] = c.baseline_accuracy;
  }
  const auto& main = report.complementarity.at(report.m);
  nlohmann::json ablations = nlohmann::json::object();
  for (const auto& [key, f] : report.ablations) {
    ablations[key] = {{"accuracy", f.reasoner_accuracy}, {"consistency", f.consistency}};
  }
  nlohmann::json direct = nullptr;
  if (report.attributes.direct_baseline) {
    direct = *report.attributes.direct_baseline;
  }
  return {{"eval_count", report.eval_count},
          {"m", report.m},
          {"predictor_accuracy", report.fidelity.predictor_accuracy},
          {"reasoner_accuracy", report.fidelity.reasoner_accuracy},
          {"consistency", report.fidelity.consistency},
          {"attribute_accuracy",
           {{"ours", report.attributes.ours},
            {"random_baseline", report.attributes.random_baseline},
            {"direct_baseline", direct}}},
          {"complementarity",
           {{"accuracy_by_M", accuracy_by_m},
            {"baseline_by_M", baseline_by_m},
            {"confusion", main.confusion},
            {"baseline_confusion", main.baseline_confusion}}},
          {"ablations", ablations}};
}

void validate_report_json(const nlohmann::json& doc) {
  auto fail = [](const std::string& what) { throw DataError("invalid report: " + what); };
  auto check_rate = [&](const nlohmann::json& v, const std::string& name) {
    if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0) {
      fail(name + " must be a number in [0, 1]");
    }
  };
  try {
    const auto count = doc.at("eval_count").get<std::size_t>();
    const auto m = doc.at("m").get<std::size_t>();
    for (const char* key : {"predictor_accuracy", "reasoner_accuracy", "consistency"}) {
      check_rate(doc.at(key), key);
    }
    const auto& attr = doc.at("attribute_accuracy");
    check_rate(attr.at("ours"), "attribute_accuracy.ours");
    check_rate(attr.at("random_baseline"), "attribute_accuracy.random_baseline");
    if (!attr.at("direct_baseline").is_null()) {
      check_rate(attr.at("direct_baseline"), "attribute_accuracy.direct_baseline");
    }
    const auto& comp = doc.at("complementarity");
    for (const char* key : {"accuracy_by_M", "baseline_by_M"}) {
      for (const auto& [mm, v] : comp.at(key).items()) {
        check_rate(v, std::string(key) + "." + mm);
      }
    }
    for (const char* key : {"confusion", "baseline_confusion"}) {
      const auto& rows = comp.at(key);
      if (rows.size() != m) {
        fail(std::string(key) + " must have M rows");
      }
      for (const auto& row : rows) {
        std::size_t sum = 0;
        for (const auto& v : row) {
          sum += v.get<std::size_t>();
        }
        if (row.size() != m || sum != count) {
          fail(std::string(key) + " rows must have M entries summing to eval_count");
        }
      }
    }
    for (const auto& [key, entry] : doc.at("ablations").items()) {
      check_rate(entry.at("accuracy"), "ablations." + key + ".accuracy");
      check_rate(entry.at("consistency"), "ablations." + key + ".consistency");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
}

std::string curve_csv(const EvalReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "M,ours,baseline\n";
  for (const auto& [mm, c] : report.complementarity) {
    out << mm << ',' << c.accuracy << ',' << c.baseline_accuracy << '\n';
  }
  return out.str();
}

std::string confusion_csv(const ComplementarityResult& result) {
  std::ostringstream out;
  out << "example_set";
  for (std::size_t i = 0; i < result.m; ++i) {
    out << ",explanation_" << i;
  }
  out << '\n';
  for (std::size_t j = 0; j < result.m; ++j) {
    out << j;
    for (std::size_t i = 0; i < result.m; ++i) {
      out << ',' << result.confusion[j][i];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace xplain
