#include "xplain/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "xplain/checks.hpp"
#include "xplain/errors.hpp"
#include "xplain/pipeline.hpp"

namespace xplain {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string schema;
  std::string data;
  std::string checkpoint_dir;
  std::string out;
  std::uint64_t seed = 0;
  double pool_fraction = 0.5;

  // gen-data
  std::size_t n = 1000;
  std::size_t classes = 4, types = 4, values = 4, feature_dim = 16;
  SyntheticConfig synthetic;

  // train-predictor
  PredictorConfig predictor;

  // train-explainers / explain / evaluate
  TrainConfig train;
  ModelDims dims;
  std::size_t m = 3;
  std::size_t limit = 0;
  std::size_t direct_hidden = 512;
  std::size_t direct_epochs = 60;
  bool skip_direct = false;

  // oracle-check / grad-check
  std::size_t configs = 100;
  std::size_t estimator_configs = 3;
  std::size_t trials = 20000;
  std::size_t grad_trials = 20;
  double tolerance = 1e-3;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) {
    throw ConfigError("cannot write " + path.string());
  }
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read " + path.string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

fs::path ensure_dir(const std::string& dir, const char* flag) {
  if (dir.empty()) {
    throw ConfigError(std::string("missing required flag ") + flag);
  }
  fs::create_directories(dir);
  return dir;
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) {
    throw ConfigError(std::string("missing required flag ") + flag);
  }
  if (!fs::exists(path)) {
    throw ConfigError(std::string(flag) + " path does not exist: " + path);
  }
}

// Dataset + split + predictor as recorded by train-predictor.
struct Loaded {
  AttributeSchema schema;
  DataSplit split;
  PredictorModel predictor;
};

Loaded load_stage(const Options& o) {
  require_file(o.schema, "--schema");
  require_file(o.data, "--data");
  require_file(o.checkpoint_dir, "--checkpoint-dir");
  AttributeSchema schema = AttributeSchema::load(o.schema);
  const auto samples = load_dataset(o.data, schema);
  const fs::path dir = o.checkpoint_dir;
  DataSplit split = apply_split(samples, read_json(dir / "split.json"));
  PredictorModel predictor = PredictorModel::load(dir, schema);
  if (!predictor.frozen()) {
    throw ConfigError("predictor checkpoint is not frozen");
  }
  return {std::move(schema), std::move(split), std::move(predictor)};
}

// k recorded at training time unless overridden on the command line.
std::size_t resolve_k(const Options& o, const CLI::App& sub, const fs::path& dir) {
  if (sub.count("--k") > 0) {
    return o.train.k;
  }
  const fs::path config = dir / "train_config.json";
  return fs::exists(config) ? read_json(config).at("k").get<std::size_t>() : o.train.k;
}

int gen_data(const Options& o) {
  const fs::path out = ensure_dir(o.out, "--out");
  AttributeSchema schema = o.schema.empty()
                               ? AttributeSchema::uniform(o.classes, o.types, o.values, o.feature_dim)
                               : AttributeSchema::load(o.schema);
  SyntheticConfig config = o.synthetic;
  config.n = o.n;
  RngStream rng = stage_stream(o.seed, Stage::data);
  const auto samples = gen_synthetic(schema, config, rng);
  schema.save(out / "schema.json");
  save_dataset(out / "data.jsonl", samples);
  std::cout << "wrote " << samples.size() << " samples to " << (out / "data.jsonl").string()
            << '\n';
  return 0;
}

int train_predictor_cmd(const Options& o) {
  require_file(o.schema, "--schema");
  require_file(o.data, "--data");
  const fs::path dir = ensure_dir(o.checkpoint_dir, "--checkpoint-dir");
  const AttributeSchema schema = AttributeSchema::load(o.schema);
  const auto samples = load_dataset(o.data, schema);
  RngStream split_rng = stage_stream(o.seed, Stage::split);
  const DataSplit split = make_split(samples, o.pool_fraction, o.train.k, split_rng);
  RngStream rng = stage_stream(o.seed, Stage::predictor);
  const PredictorModel model = train_predictor(split.train, schema, o.predictor, rng);
  model.save(dir);
  write_text(dir / "split.json", split.indices_json().dump() + "\n");

  std::size_t hits = 0;
  for (const auto& s : split.eval) {
    hits += argmax(predict_proba(model, s.features)) == s.label;
  }
  std::cout << "pool " << split.pool.size() << ", train " << split.train.size() << ", eval "
            << split.eval.size() << "; held-out accuracy "
            << static_cast<double>(hits) / static_cast<double>(split.eval.size()) << '\n';
  return 0;
}

int train_explainers_cmd(const Options& o) {
  Loaded in = load_stage(o);
  const fs::path dir = o.checkpoint_dir;
  TrainConfig config = o.train;
  config.seed = o.seed;
  config.validate(in.split.pool.size());
  const PoolTensors pool(in.split.pool, in.schema);
  ExplanationModels models(in.schema, in.split.pool.size(), o.dims);
  RngStream init_rng = stage_stream(o.seed, Stage::init);
  models.init(init_rng);
  RngStream rng = stage_stream(o.seed, Stage::train);

  std::ostringstream history;
  history.precision(17);
  history << "epoch,term_A_bound,term_B,entropy,total\n";
  train_explainers(in.schema, in.split.train, in.predictor, models, pool, config, rng,
                   [&](std::size_t epoch, const ObjectiveBreakdown& b) {
                     history << epoch << ',' << b.term_A_bound << ',' << b.term_B << ','
                             << b.entropy << ',' << b.total << '\n';
                     if ((epoch + 1) % 20 == 0 || epoch == 0) {
                       std::cout << "epoch " << epoch + 1 << " objective " << b.total << '\n';
                     }
                   });
  models.save(dir);
  write_text(dir / "train_config.json",
             nlohmann::json{{"learning_rate", config.learning_rate},
                            {"weight_decay", config.weight_decay},
                            {"batch_size", config.batch_size},
                            {"epochs", config.epochs},
                            {"k", config.k},
                            {"tau", config.tau},
                            {"lambda_entropy", config.lambda_entropy},
                            {"seed", config.seed}}
                     .dump(2) +
                 "\n");
  write_text(dir / "training_history.csv", history.str());
  return 0;
}

int explain_cmd(const Options& o, const CLI::App& sub) {
  Loaded in = load_stage(o);
  const fs::path out = ensure_dir(o.out, "--out");
  const fs::path dir = o.checkpoint_dir;
  const PoolTensors pool(in.split.pool, in.schema);
  const ExplanationModels models = ExplanationModels::load(dir, in.schema, in.split.pool.size());
  const ExplanationSystem system{in.schema, in.predictor, models, pool, resolve_k(o, sub, dir)};
  const RngStream rng = stage_stream(o.seed, Stage::explain);
  const std::size_t count =
      o.limit == 0 ? in.split.eval.size() : std::min(o.limit, in.split.eval.size());
  std::string lines;
  for (std::size_t i = 0; i < count; ++i) {
    RngStream local = rng.derive(i);
    const auto e = generate_explanations(in.split.eval[i].features, o.m, system, local);
    auto doc = explanation_to_json(e);
    doc["sample"] = in.split.eval_indices[i];
    lines += doc.dump() + "\n";
    if (i < 3) {
      std::cout << "sample " << in.split.eval_indices[i] << ":\n" << e.rendered << '\n';
    }
  }
  write_text(out / "explanations.jsonl", lines);
  return 0;
}

int evaluate_cmd(const Options& o, const CLI::App& sub) {
  Loaded in = load_stage(o);
  const fs::path out = ensure_dir(o.out, "--out");
  const fs::path dir = o.checkpoint_dir;
  const PoolTensors pool(in.split.pool, in.schema);
  const ExplanationModels models = ExplanationModels::load(dir, in.schema, in.split.pool.size());
  const ExplanationSystem system{in.schema, in.predictor, models, pool, resolve_k(o, sub, dir)};

  std::optional<DirectAttributeBaseline> direct;
  if (!o.skip_direct) {
    RngStream rng = stage_stream(o.seed, Stage::direct);
    direct = DirectAttributeBaseline::train(in.split.train, in.schema, rng, o.direct_hidden,
                                            o.direct_epochs);
  }
  const EvalReport report = evaluate_all(in.split.eval, system, o.m,
                                         stage_stream(o.seed, Stage::evaluate),
                                         direct ? &*direct : nullptr);
  const auto doc = report_to_json(report);
  validate_report_json(doc);
  write_text(out / "report.json", doc.dump(2) + "\n");
  write_text(out / "curve_accuracy_vs_M.csv", curve_csv(report));
  write_text(out / "confusion_M.csv", confusion_csv(report.complementarity.at(report.m)));
  std::cout << doc.dump(2) << '\n';
  return 0;
}

int oracle_check_cmd(const Options& o) {
  const auto report = run_oracle_check(o.seed, o.configs, o.estimator_configs, o.trials);
  const auto doc = report.to_json();
  if (!o.out.empty()) {
    write_text(ensure_dir(o.out, "--out") / "oracle_report.json", doc.dump(2) + "\n");
  }
  std::cout << doc.dump(2) << '\n';
  if (report.violations > 0) {
    std::cerr << "oracle-check: " << report.violations << " violation(s)\n";
    return 2;
  }
  return 0;
}

int grad_check_cmd(const Options& o) {
  const auto report = run_gradient_suite(o.seed, o.grad_trials, o.tolerance);
  const auto doc = report.to_json();
  if (!o.out.empty()) {
    write_text(ensure_dir(o.out, "--out") / "grad_report.json", doc.dump(2) + "\n");
  }
  std::cout << doc.dump(2) << '\n';
  return report.passed() ? 0 : 2;
}

void add_data_flags(CLI::App* sub, Options& o) {
  sub->add_option("--schema", o.schema, "Schema JSON file");
  sub->add_option("--data", o.data, "Dataset (line-delimited JSON)");
  sub->add_option("--checkpoint-dir", o.checkpoint_dir, "Checkpoint directory");
}

void add_training_flags(CLI::App* sub, Options& o) {
  sub->add_option("--epochs", o.train.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--lr", o.train.learning_rate, "Learning rate")->capture_default_str();
  sub->add_option("--weight-decay", o.train.weight_decay, "Weight decay")->capture_default_str();
  sub->add_option("--batch-size", o.train.batch_size, "Minibatch size")->capture_default_str();
  sub->add_option("--tau", o.train.tau, "Gumbel-softmax temperature")->capture_default_str();
  sub->add_option("--lambda-entropy", o.train.lambda_entropy, "Entropy coefficient")
      ->capture_default_str();
  sub->add_option("--common-dim", o.dims.common_dim, "Common-space width")->capture_default_str();
  sub->add_option("--embed-dim", o.dims.embed_dim, "Reasoner embedding width")
      ->capture_default_str();
}

}  // namespace

int run_cli(int argc, char** argv) {
  Options o;
  CLI::App app{"Trains and evaluates complementary linguistic and example-based explanations"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic attributed dataset");
  gen->add_option("--schema", o.schema, "Existing schema (otherwise a uniform one is built)");
  gen->add_option("--out", o.out, "Output directory")->required();
  gen->add_option("--n", o.n, "Number of samples")->capture_default_str();
  gen->add_option("--classes", o.classes, "Classes K")->capture_default_str();
  gen->add_option("--types", o.types, "Attribute types T")->capture_default_str();
  gen->add_option("--values", o.values, "Values per type")->capture_default_str();
  gen->add_option("--feature-dim", o.feature_dim, "Feature dimension d")->capture_default_str();
  gen->add_option("--class-separation", o.synthetic.class_separation)->capture_default_str();
  gen->add_option("--informativeness", o.synthetic.attribute_informativeness)
      ->capture_default_str();
  gen->add_option("--offset-scale", o.synthetic.attribute_offset_scale)->capture_default_str();
  gen->add_option("--noise", o.synthetic.noise_std)->capture_default_str();
  gen->add_option("--seed", o.seed)->capture_default_str();

  auto* tp = app.add_subcommand("train-predictor", "Split the data and train the frozen predictor");
  add_data_flags(tp, o);
  tp->add_option("--pool-fraction", o.pool_fraction, "Fraction of samples in the candidate pool")
      ->capture_default_str();
  tp->add_option("--k", o.train.k, "Subset size (minimum pool size)")->capture_default_str();
  tp->add_option("--epochs", o.predictor.epochs)->capture_default_str();
  tp->add_option("--lr", o.predictor.learning_rate)->capture_default_str();
  tp->add_option("--weight-decay", o.predictor.weight_decay)->capture_default_str();
  tp->add_option("--batch-size", o.predictor.batch_size)->capture_default_str();
  tp->add_option("--hidden", o.predictor.hidden)->capture_default_str();
  tp->add_option("--seed", o.seed)->capture_default_str();

  auto* te = app.add_subcommand("train-explainers", "Train explainer, selector and reasoner");
  add_data_flags(te, o);
  add_training_flags(te, o);
  te->add_option("--k", o.train.k, "Examples per explanation")->capture_default_str();
  te->add_option("--seed", o.seed)->capture_default_str();

  auto* ex = app.add_subcommand("explain", "Explain the evaluation samples");
  add_data_flags(ex, o);
  ex->add_option("--out", o.out, "Output directory")->required();
  ex->add_option("--m", o.m, "Explanation pairs per sample")->capture_default_str();
  ex->add_option("--k", o.train.k, "Examples per explanation (default: as trained)");
  ex->add_option("--limit", o.limit, "Explain only the first N samples (0 = all)");
  ex->add_option("--seed", o.seed)->capture_default_str();

  auto* ev = app.add_subcommand("evaluate", "Fidelity, attribute accuracy, complementarity");
  add_data_flags(ev, o);
  ev->add_option("--out", o.out, "Output directory")->required();
  ev->add_option("--m", o.m, "Explanation pairs per sample")->capture_default_str();
  ev->add_option("--k", o.train.k, "Examples per explanation (default: as trained)");
  ev->add_option("--direct-hidden", o.direct_hidden)->capture_default_str();
  ev->add_option("--direct-epochs", o.direct_epochs)->capture_default_str();
  ev->add_flag("--skip-direct", o.skip_direct, "Skip the direct attribute baseline");
  ev->add_option("--seed", o.seed)->capture_default_str();

  auto* oc = app.add_subcommand("oracle-check", "Exact oracles on random toy worlds");
  oc->add_option("--configs", o.configs)->capture_default_str();
  oc->add_option("--estimator-configs", o.estimator_configs)->capture_default_str();
  oc->add_option("--trials", o.trials)->capture_default_str();
  oc->add_option("--out", o.out, "Directory for oracle_report.json");
  oc->add_option("--seed", o.seed)->capture_default_str();

  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient suite");
  gc->add_option("--trials", o.grad_trials)->capture_default_str();
  gc->add_option("--tolerance", o.tolerance)->capture_default_str();
  gc->add_option("--out", o.out, "Directory for grad_report.json");
  gc->add_option("--seed", o.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*gen) return gen_data(o);
    if (*tp) return train_predictor_cmd(o);
    if (*te) return train_explainers_cmd(o);
    if (*ex) return explain_cmd(o, *ex);
    if (*ev) return evaluate_cmd(o, *ev);
    if (*oc) return oracle_check_cmd(o);
    if (*gc) return grad_check_cmd(o);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  std::vector<std::string> copy = args;
  for (auto& a : copy) {
    argv.push_back(a.data());
  }
  argv.push_back(nullptr);
  return run_cli(static_cast<int>(copy.size()), argv.data());
}

}  // namespace xplain
