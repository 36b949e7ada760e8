#include "xplain/oracle.hpp"

#include <cmath>

#include "xplain/errors.hpp"

namespace xplain {

namespace {

constexpr std::size_t kMaxOracleK = 2;
constexpr std::size_t kMaxOraclePool = 8;

void guard(std::size_t pool_size, std::size_t k) {
  if (k > kMaxOracleK || pool_size > kMaxOraclePool) {
    throw ConfigError("oracle enumeration refused: needs k <= 2 and N <= 8 (got k=" +
                      std::to_string(k) + ", N=" + std::to_string(pool_size) + ")");
  }
}

double xlogx_sum(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) {
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

ToyWorld make_toy_world(const ToyWorldShape& shape, RngStream& rng) {
  guard(shape.pool, shape.k);
  AttributeSchema schema = AttributeSchema::uniform(shape.classes, shape.types, shape.values,
                                                    shape.feature_dim);
  auto random_sample = [&](std::size_t label) {
    Sample s;
    s.label = label;
    for (std::size_t j = 0; j < shape.feature_dim; ++j) {
      s.features.push_back(rng.normal());
    }
    for (std::size_t t = 0; t < shape.types; ++t) {
      s.attributes.push_back(rng.uniform_index(shape.values));
    }
    return s;
  };
  std::vector<Sample> inputs;
  for (std::size_t i = 0; i < shape.inputs; ++i) {
    inputs.push_back(random_sample(rng.uniform_index(shape.classes)));
  }
  std::vector<Sample> pool_samples;
  for (std::size_t i = 0; i < shape.pool; ++i) {
    pool_samples.push_back(random_sample(i % shape.classes));
  }

  const ModelDims dims{6, 4};
  PredictorModel predictor(schema, 6);
  predictor.params().init_glorot(rng);
  ExplanationModels models(schema, shape.pool, dims);
  models.init(rng);
  auto rescale = [&](diff::ParameterStore& store) {
    for (auto& [_, e] : store) {
      for (double& v : e.value.values()) {
        v *= shape.weight_scale;
      }
      if (e.value.rank() == 1) {
        for (double& v : e.value.values()) {
          v = 0.5 * rng.normal();
        }
      }
    }
  };
  rescale(predictor.params());
  for (auto* s : models.stores()) {
    rescale(*s);
  }
  predictor.freeze();

  ToyWorld world{std::move(schema), std::move(inputs),
                 std::make_unique<CandidatePool>(std::move(pool_samples)), shape.k,
                 std::move(predictor), std::move(models), nullptr};
  world.pool_tensors = std::make_unique<PoolTensors>(*world.pool, world.schema);
  return world;
}

ToyWorldShape random_toy_shape(RngStream& rng) {
  ToyWorldShape shape;
  shape.inputs = 1 + rng.uniform_index(4);
  shape.classes = 2 + rng.uniform_index(2);
  shape.types = 2 + rng.uniform_index(2);
  shape.values = 2 + rng.uniform_index(2);
  shape.pool = 2 + rng.uniform_index(5);
  shape.k = 1 + rng.uniform_index(2);
  return shape;
}

std::vector<std::vector<std::size_t>> enumerate_subsets(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t a = 0; a < n; ++a) {
    out.push_back({a});
  }
  if (k >= 2) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        out.push_back({a, b});
      }
    }
  }
  return out;
}

double union_probability(const std::vector<double>& p, const std::vector<std::size_t>& subset,
                         std::size_t k) {
  // Inclusion-exclusion over sub-subsets T of S: sum (-1)^{|S|-|T|} (p(T))^k.
  const std::size_t m = subset.size();
  if (m == 0 || m > k) {
    return 0.0;
  }
  double total = 0.0;
  for (std::size_t mask = 1; mask < (std::size_t{1} << m); ++mask) {
    double mass = 0.0;
    std::size_t bits = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (mask & (std::size_t{1} << j)) {
        mass += p[subset[j]];
        ++bits;
      }
    }
    const double sign = ((m - bits) % 2 == 0) ? 1.0 : -1.0;
    total += sign * std::pow(mass, static_cast<double>(k));
  }
  return total;
}

ToyTables tabulate(const ToyWorld& world) {
  const std::size_t n = world.pool->size();
  guard(n, world.k);
  const auto& schema = world.schema;
  ToyTables t;
  t.classes = schema.num_classes();
  t.types = schema.num_types();
  t.subsets = enumerate_subsets(n, world.k);
  for (const auto& x : world.inputs) {
    t.p_y.push_back(predict_proba(world.predictor, x.features));
    std::vector<std::vector<double>> ps;
    std::vector<std::vector<std::vector<double>>> pd;
    for (std::size_t y = 0; y < t.classes; ++y) {
      ps.push_back(type_distribution(world.models.explainer, schema, x.features, y));
      std::vector<std::vector<double>> per_s;
      for (std::size_t s = 0; s < t.types; ++s) {
        const auto p = categorical_params(world.models.selector, schema, x.features, y,
                                          {s, x.attributes[s]});
        std::vector<double> probs;
        for (const auto& d : t.subsets) {
          probs.push_back(union_probability(p, d, world.k));
        }
        per_s.push_back(std::move(probs));
      }
      pd.push_back(std::move(per_s));
    }
    t.p_s.push_back(std::move(ps));
    t.p_d.push_back(std::move(pd));

    std::vector<std::vector<std::vector<double>>> qx;
    for (std::size_t s = 0; s < t.types; ++s) {
      std::vector<std::vector<double>> per_d;
      for (const auto& d : t.subsets) {
        per_d.push_back(class_posterior(world.models.reasoner, schema, *world.pool_tensors,
                                        x.features, {s, x.attributes[s]},
                                        ExampleSelection::hard(d))
                            .class_probs);
      }
      qx.push_back(std::move(per_d));
    }
    t.q.push_back(std::move(qx));
  }
  return t;
}

InteractionInfo exact_interaction_info(const ToyTables& t) {
  const std::size_t ny = t.classes, ns = t.types, nd = t.subsets.size();
  InteractionInfo out;
  const double weight = 1.0 / static_cast<double>(t.p_y.size());
  for (std::size_t x = 0; x < t.p_y.size(); ++x) {
    auto joint = [&](std::size_t y, std::size_t s, std::size_t d) {
      return t.p_y[x][y] * t.p_s[x][y][s] * t.p_d[x][y][s][d];
    };
    std::vector<double> h_ysd, h_ys(ny * ns, 0.0), h_yd(ny * nd, 0.0), h_sd(ns * nd, 0.0),
        h_y(ny, 0.0), h_s(ns, 0.0), h_d(nd, 0.0);
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t d = 0; d < nd; ++d) {
          const double j = joint(y, s, d);
          h_ysd.push_back(j);
          h_ys[y * ns + s] += j;
          h_yd[y * nd + d] += j;
          h_sd[s * nd + d] += j;
          h_y[y] += j;
          h_s[s] += j;
          h_d[d] += j;
        }
      }
    }
    const double H_ysd = xlogx_sum(h_ysd), H_ys = xlogx_sum(h_ys), H_yd = xlogx_sum(h_yd),
                 H_sd = xlogx_sum(h_sd), H_y = xlogx_sum(h_y), H_s = xlogx_sum(h_s),
                 H_d = xlogx_sum(h_d);
    out.value += weight * (H_ys + H_yd + H_sd - H_y - H_s - H_d - H_ysd);
    out.term_A_entropy += weight * (H_yd + H_sd - H_ysd - H_d);
    out.term_B_entropy += weight * (H_y + H_s - H_ys);

    // Log-ratio forms.
    double a = 0.0;
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t d = 0; d < nd; ++d) {
        double given_yd = 0.0;
        for (std::size_t s = 0; s < ns; ++s) {
          given_yd += joint(y, s, d);
        }
        for (std::size_t s = 0; s < ns; ++s) {
          const double j = joint(y, s, d);
          if (j <= 0.0) {
            continue;
          }
          const double p_s_given_yd = j / given_yd;
          const double p_s_given_d = h_sd[s * nd + d] / h_d[d];
          a += j * std::log(p_s_given_yd / p_s_given_d);
        }
      }
    }
    double b = 0.0;
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t s = 0; s < ns; ++s) {
        double marginal = 0.0;
        for (std::size_t yp = 0; yp < ny; ++yp) {
          marginal += t.p_s[x][yp][s] * t.p_y[x][yp];
        }
        const double w = t.p_y[x][y] * t.p_s[x][y][s];
        if (w > 0.0) {
          b += w * std::log(t.p_s[x][y][s] / marginal);
        }
      }
    }
    out.term_A += weight * a;
    out.term_B += weight * b;
  }
  return out;
}

InteractionInfo exact_interaction_info(const ToyWorld& world) {
  return exact_interaction_info(tabulate(world));
}

VariationalBound exact_variational_bound(const ToyTables& t) {
  const std::size_t ny = t.classes, ns = t.types, nd = t.subsets.size();
  VariationalBound out;
  out.term_A = exact_interaction_info(t).term_A;
  const double weight = 1.0 / static_cast<double>(t.p_y.size());
  for (std::size_t x = 0; x < t.p_y.size(); ++x) {
    auto joint = [&](std::size_t y, std::size_t s, std::size_t d) {
      return t.p_y[x][y] * t.p_s[x][y][s] * t.p_d[x][y][s][d];
    };
    for (std::size_t d = 0; d < nd; ++d) {
      std::vector<double> p_s_given_d(ns, 0.0);
      double p_d = 0.0;
      for (std::size_t y = 0; y < ny; ++y) {
        for (std::size_t s = 0; s < ns; ++s) {
          p_s_given_d[s] += joint(y, s, d);
          p_d += joint(y, s, d);
        }
      }
      if (p_d <= 0.0) {
        continue;
      }
      for (double& v : p_s_given_d) {
        v /= p_d;
      }
      for (std::size_t y = 0; y < ny; ++y) {
        double norm = 0.0;
        for (std::size_t s = 0; s < ns; ++s) {
          norm += std::max(t.q[x][s][d][y], kReasonerFloor) * p_s_given_d[s];
        }
        for (std::size_t s = 0; s < ns; ++s) {
          const double j = joint(y, s, d);
          if (j <= 0.0) {
            continue;
          }
          const double q_tilde = std::max(t.q[x][s][d][y], kReasonerFloor) * p_s_given_d[s] / norm;
          out.bound += weight * j * std::log(q_tilde / p_s_given_d[s]);
        }
      }
    }
  }
  return out;
}

VariationalBound exact_variational_bound(const ToyWorld& world) {
  return exact_variational_bound(tabulate(world));
}

double enumerated_bound_term(const ToyTables& t, std::size_t x, std::size_t y) {
  double total = 0.0;
  for (std::size_t s = 0; s < t.types; ++s) {
    for (std::size_t d = 0; d < t.subsets.size(); ++d) {
      const double pd = t.p_d[x][y][s][d];
      if (pd <= 0.0) {
        continue;
      }
      double mix = 0.0;
      for (std::size_t sp = 0; sp < t.types; ++sp) {
        mix += t.p_s[x][y][sp] * std::max(t.q[x][sp][d][y], kReasonerFloor);
      }
      total += t.p_s[x][y][s] * pd *
               (std::log(std::max(t.q[x][s][d][y], kReasonerFloor)) - std::log(mix));
    }
  }
  return total;
}

}  // namespace xplain
