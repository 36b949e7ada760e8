#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "support.hpp"
#include "xplain/data.hpp"
#include "xplain/errors.hpp"
#include "xplain/pipeline.hpp"

using namespace xplain;

TEST_CASE("schema validation rejects degenerate shapes") {
  CHECK_THROWS_AS(AttributeSchema::uniform(1, 3, 3, 4), ConfigError);
  CHECK_THROWS_AS(AttributeSchema::uniform(3, 1, 3, 4), ConfigError);
  CHECK_THROWS_AS(AttributeSchema::uniform(3, 3, 1, 4), ConfigError);
  CHECK_THROWS_AS(AttributeSchema::uniform(3, 3, 3, 0), ConfigError);
  CHECK_NOTHROW(AttributeSchema::uniform(2, 2, 2, 1));
}

TEST_CASE("schema JSON round trip with default and explicit value names") {
  const auto doc = nlohmann::json::parse(R"({
    "num_classes": 3, "feature_dim": 5,
    "attribute_types": [
      {"name": "color", "num_values": 2, "value_names": ["red", "blue"]},
      {"name": "size", "num_values": 3}
    ]})");
  const auto schema = AttributeSchema::from_json(doc);
  CHECK(schema.num_types() == 2);
  CHECK(schema.value_name(0, 1) == "blue");
  CHECK(schema.value_name(1, 2) == "v2");
  CHECK(schema.max_values() == 3);
  CHECK(AttributeSchema::from_json(schema.to_json()) == schema);
}

TEST_CASE("gen_synthetic: informativeness 1 pins designated values") {
  const auto schema = AttributeSchema::uniform(4, 3, 5, 6);
  RngStream rng(1);
  SyntheticConfig config{400};
  config.attribute_informativeness = 1.0;
  for (const auto& s : gen_synthetic(schema, config, rng)) {
    for (std::size_t t = 0; t < schema.num_types(); ++t) {
      CHECK(s.attributes[t] == designated_value(schema, s.label, t));
    }
  }
}

TEST_CASE("gen_synthetic: informativeness 0 leaves attributes independent of class") {
  // Pearson chi-square on the 4 x 4 class/value table for each type, df = 9,
  // critical value at alpha = 0.01 is 21.666.
  const auto schema = AttributeSchema::uniform(4, 3, 4, 6);
  RngStream rng(2);
  SyntheticConfig config{5000};
  config.attribute_informativeness = 0.0;
  const auto samples = gen_synthetic(schema, config, rng);
  for (std::size_t t = 0; t < schema.num_types(); ++t) {
    double table[4][4] = {};
    for (const auto& s : samples) table[s.label][s.attributes[t]] += 1.0;
    double rows[4] = {}, cols[4] = {};
    for (int c = 0; c < 4; ++c)
      for (int v = 0; v < 4; ++v) rows[c] += table[c][v], cols[v] += table[c][v];
    double chi2 = 0.0;
    for (int c = 0; c < 4; ++c)
      for (int v = 0; v < 4; ++v) {
        const double expected = rows[c] * cols[v] / 5000.0;
        chi2 += (table[c][v] - expected) * (table[c][v] - expected) / expected;
      }
    INFO("type " << t << " chi2 " << chi2);
    CHECK(chi2 < 21.666);
  }
}

TEST_CASE("gen_synthetic: well separated classes are recovered by a nearest-centroid probe") {
  const auto schema = AttributeSchema::uniform(4, 3, 3, 8);
  RngStream rng(3);
  SyntheticConfig config{2000};
  config.class_separation = 10.0;
  const auto samples = gen_synthetic(schema, config, rng);
  std::vector<std::vector<double>> centroid(4, std::vector<double>(8, 0.0));
  std::vector<double> count(4, 0.0);
  for (std::size_t i = 0; i < 1000; ++i) {
    for (std::size_t j = 0; j < 8; ++j) centroid[samples[i].label][j] += samples[i].features[j];
    count[samples[i].label] += 1.0;
  }
  for (std::size_t c = 0; c < 4; ++c)
    for (double& v : centroid[c]) v /= count[c];
  std::size_t hits = 0;
  for (std::size_t i = 1000; i < 2000; ++i) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < 4; ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < 8; ++j) {
        const double diff = samples[i].features[j] - centroid[c][j];
        d += diff * diff;
      }
      if (d < best_d) best_d = d, best = c;
    }
    hits += best == samples[i].label;
  }
  CHECK(static_cast<double>(hits) / 1000.0 >= 0.99);
}

TEST_CASE("gen_synthetic: argument validation and determinism") {
  const auto schema = AttributeSchema::uniform(4, 2, 2, 3);
  RngStream rng(4);
  CHECK_THROWS_AS(gen_synthetic(schema, SyntheticConfig{15}, rng), ConfigError);
  SyntheticConfig bad{100};
  bad.attribute_informativeness = 1.5;
  CHECK_THROWS_AS(gen_synthetic(schema, bad, rng), ConfigError);
  RngStream a(9), b(9);
  CHECK(gen_synthetic(schema, SyntheticConfig{64}, a) == gen_synthetic(schema, SyntheticConfig{64}, b));
}

TEST_CASE("load_dataset: empty file, boundary value, malformed line") {
  const auto schema = AttributeSchema::uniform(2, 3, 4, 2);
  const auto dir = test_support::scratch_dir("data");
  { std::ofstream(dir / "empty.jsonl"); }
  CHECK(load_dataset(dir / "empty.jsonl", schema).empty());

  {
    std::ofstream out(dir / "boundary.jsonl");
    out << R"({"features":[0.5,1.0],"label":1,"attributes":[0,1,2]})" << '\n';
    out << R"({"features":[0.5,1.0],"label":0,"attributes":[0,4,2]})" << '\n';
  }
  try {
    load_dataset(dir / "boundary.jsonl", schema);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("attribute type 1") != std::string::npos);
    CHECK(msg.find("value 4") != std::string::npos);
  }

  {
    std::ofstream out(dir / "malformed.jsonl");
    out << R"({"features":[0.5,1.0],"label":1,"attributes":[0,1,2]})" << '\n';
    out << "\n";
    out << R"({"features":[0.5,1.0],"label":)" << '\n';
  }
  try {
    load_dataset(dir / "malformed.jsonl", schema);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("dataset save/load round trip is bit-exact") {
  const auto schema = AttributeSchema::uniform(3, 3, 3, 5);
  RngStream rng(5);
  const auto samples = gen_synthetic(schema, SyntheticConfig{60}, rng);
  const auto dir = test_support::scratch_dir("roundtrip");
  save_dataset(dir / "d.jsonl", samples);
  CHECK(load_dataset(dir / "d.jsonl", schema) == samples);
}

TEST_CASE("split_pool: sizes, disjointness, stratification, determinism") {
  const auto schema = AttributeSchema::uniform(4, 2, 2, 2);
  RngStream gen(6);
  const auto samples = gen_synthetic(schema, SyntheticConfig{100}, gen);

  RngStream rng(7);
  const auto half = split_pool(samples, 0.5, 1, rng);
  CHECK(half.pool.size() == 50);
  CHECK(half.remainder.size() == 50);
  std::set<std::size_t> seen(half.pool_indices.begin(), half.pool_indices.end());
  for (std::size_t i : half.remainder_indices) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 100);

  RngStream rng2(7);
  const auto strat = split_pool(samples, 0.4, 1, rng2);
  std::vector<int> per_class(4, 0);
  for (const auto& s : strat.pool.samples()) ++per_class[s.label];
  for (int c : per_class) CHECK(c == 10);

  RngStream again(7);
  CHECK(split_pool(samples, 0.5, 1, again).pool_indices == half.pool_indices);

  RngStream rng3(8);
  CHECK_THROWS_AS(split_pool(samples, 0.05, 10, rng3), ConfigError);
  CHECK_THROWS_AS(split_pool(samples, 1.0, 1, rng3), ConfigError);
}

TEST_CASE("three-way split keeps pool, training and evaluation disjoint") {
  const auto schema = AttributeSchema::uniform(4, 2, 2, 2);
  RngStream gen(10);
  const auto samples = gen_synthetic(schema, SyntheticConfig{200}, gen);
  RngStream rng(11);
  const auto split = make_split(samples, 0.2, 10, rng);
  std::set<std::size_t> all;
  for (const auto* list : {&split.pool_indices, &split.train_indices, &split.eval_indices})
    for (std::size_t i : *list) CHECK(all.insert(i).second);
  CHECK(all.size() == 200);
  CHECK(split.pool.size() == 40);
  for (const auto& s : split.pool.samples()) CHECK(s.attributes.size() == 2);

  const auto rebuilt = apply_split(samples, split.indices_json());
  CHECK(rebuilt.eval == split.eval);
  auto overlapping = split.indices_json();
  overlapping["eval"].push_back(split.pool_indices.front());
  CHECK_THROWS_AS(apply_split(samples, overlapping), DataError);
}
