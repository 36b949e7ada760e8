#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "xplain/cli.hpp"
#include "xplain/eval.hpp"

using namespace xplain;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "xplain");
  return run_cli(args);
}

}  // namespace

TEST_CASE("invalid invocations exit with status 1") {
  const auto dir = test_support::scratch_dir("cli_usage");
  CHECK(run({}) == 1);
  CHECK(run({"no-such-command"}) == 1);
  CHECK(run({"gen-data", "--out", dir.string(), "--bogus", "3"}) == 1);
  CHECK(run({"gen-data"}) == 1);
  CHECK(run({"gen-data", "--out", dir.string(), "--classes", "1"}) == 1);
  CHECK(run({"train-predictor", "--schema", (dir / "none.json").string(), "--data",
             (dir / "none.jsonl").string(), "--checkpoint-dir", dir.string()}) == 1);
}

TEST_CASE("gen-data is deterministic for a fixed seed") {
  const auto a = test_support::scratch_dir("cli_gen_a");
  const auto b = test_support::scratch_dir("cli_gen_b");
  const auto c = test_support::scratch_dir("cli_gen_c");
  CHECK(run({"gen-data", "--out", a.string(), "--n", "50", "--seed", "3"}) == 0);
  CHECK(run({"gen-data", "--out", b.string(), "--n", "50", "--seed", "3"}) == 0);
  CHECK(run({"gen-data", "--out", c.string(), "--n", "50", "--seed", "4"}) == 0);
  CHECK(slurp(a / "data.jsonl") == slurp(b / "data.jsonl"));
  CHECK(slurp(a / "schema.json") == slurp(b / "schema.json"));
  CHECK(slurp(a / "data.jsonl") != slurp(c / "data.jsonl"));
}

TEST_CASE("the full pipeline runs end to end on a small dataset") {
  const auto dir = test_support::scratch_dir("cli_pipeline");
  const std::string data = (dir / "data").string();
  const std::string ckpt = (dir / "ckpt").string();
  const std::string out = (dir / "out").string();
  const std::string schema = (dir / "data" / "schema.json").string();
  const std::string samples = (dir / "data" / "data.jsonl").string();
  REQUIRE(run({"gen-data", "--out", data, "--n", "120", "--types", "3", "--values", "3",
               "--feature-dim", "6", "--seed", "1"}) == 0);
  REQUIRE(run({"train-predictor", "--schema", schema, "--data", samples, "--checkpoint-dir", ckpt,
               "--pool-fraction", "0.25", "--k", "4", "--epochs", "5", "--hidden", "8"}) == 0);
  REQUIRE(run({"train-explainers", "--schema", schema, "--data", samples, "--checkpoint-dir",
               ckpt, "--epochs", "2", "--k", "4", "--common-dim", "8", "--embed-dim", "4"}) == 0);
  CHECK(fs::exists(fs::path(ckpt) / "training_history.csv"));
  REQUIRE(run({"explain", "--schema", schema, "--data", samples, "--checkpoint-dir", ckpt, "--out",
               out, "--m", "2", "--limit", "5"}) == 0);
  std::ifstream lines(fs::path(out) / "explanations.jsonl");
  std::size_t count = 0;
  for (std::string line; std::getline(lines, line);) {
    const auto doc = nlohmann::json::parse(line);
    CHECK(doc.at("pairs").size() == 2);
    ++count;
  }
  CHECK(count == 5);
  REQUIRE(run({"evaluate", "--schema", schema, "--data", samples, "--checkpoint-dir", ckpt, "--out",
               out, "--m", "2", "--skip-direct"}) == 0);
  const auto report = nlohmann::json::parse(slurp(fs::path(out) / "report.json"));
  CHECK_NOTHROW(validate_report_json(report));
  CHECK(slurp(fs::path(out) / "curve_accuracy_vs_M.csv").rfind("M,ours,baseline\n", 0) == 0);
  CHECK(fs::exists(fs::path(out) / "confusion_M.csv"));

  const auto first = slurp(fs::path(out) / "report.json");
  REQUIRE(run({"evaluate", "--schema", schema, "--data", samples, "--checkpoint-dir", ckpt, "--out",
               out, "--m", "2", "--skip-direct"}) == 0);
  CHECK(slurp(fs::path(out) / "report.json") == first);
  CHECK(run({"evaluate", "--schema", schema, "--data", samples, "--checkpoint-dir", ckpt, "--out",
             out, "--m", "4", "--skip-direct"}) == 1);
}

TEST_CASE("oracle-check with its defaults reports zero violations") {
  const auto dir = test_support::scratch_dir("cli_oracle");
  CHECK(run({"oracle-check", "--out", dir.string()}) == 0);
  const auto doc = nlohmann::json::parse(slurp(dir / "oracle_report.json"));
  CHECK(doc.at("violations") == 0);
}

TEST_CASE("grad-check passes and writes its report") {
  const auto dir = test_support::scratch_dir("cli_grad");
  CHECK(run({"grad-check", "--trials", "3", "--out", dir.string()}) == 0);
  CHECK(fs::exists(dir / "grad_report.json"));
}
