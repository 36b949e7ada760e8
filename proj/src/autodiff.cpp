#include "xplain/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "xplain/errors.hpp"

namespace xplain::diff {

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, nullptr, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(ParameterEntry& entry) {
  nodes_.push_back(Node{entry.value, nullptr, nullptr, &entry, true});
  return Var(this, nodes_.size() - 1);
}

void Tape::train(ParameterStore& store) {
  if (std::find(trainable_.begin(), trainable_.end(), &store) == trainable_.end()) {
    trainable_.push_back(&store);
  }
}

Var Tape::param(const ParameterStore& store, const std::string& name) {
  for (ParameterStore* s : trainable_) {
    if (s == &store) {
      return param(s->at(name));
    }
  }
  return constant(store.at(name).value);
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) {
      throw ConfigError("operation mixes variables from different tapes");
    }
    needs = needs || nodes_[p.id()].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), nullptr, needs ? std::move(backward) : nullptr,
                        nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.grad) {
    n.grad = std::make_unique<Tensor>(n.value.shape(), 0.0);
  }
  return *n.grad;
}

void Tape::accumulate(Var v, const Tensor& delta) {
  if (!nodes_[v.id()].needs_grad) {
    return;
  }
  Tensor& g = grad_buffer(v);
  if (g.size() != delta.size()) {
    throw ConfigError("gradient size mismatch during accumulation");
  }
  auto dst = g.values();
  auto src = delta.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] += src[i];
  }
}

void Tape::backward(Var loss) {
  if (loss.tape() != this || value(loss).size() != 1) {
    throw ConfigError("backward requires a single-element loss on this tape");
  }
  grad_buffer(loss).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.grad) {
      continue;
    }
    if (n.backward) {
      n.backward(*this, *n.grad);
    }
    if (n.entry != nullptr) {
      auto dst = n.entry->grad.values();
      auto src = n.grad->values();
      for (std::size_t j = 0; j < dst.size(); ++j) {
        dst[j] += src[j];
      }
    }
  }
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) {
    throw ConfigError("operation on an unbound variable");
  }
  return *a.tape();
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  std::ostringstream msg;
  msg << op << ": shape mismatch [" << a.rows() << "x" << a.cols() << "] vs [" << b.rows()
      << "x" << b.cols() << "]";
  throw ConfigError(msg.str());
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    shape_error(op, a, b);
  }
}

// out[m x n] += a[m x k] * b[k x n]
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      if (av == 0.0) {
        continue;
      }
      const double* brow = pb + l * n;
      double* orow = po + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        orow[j] += av * brow[j];
      }
    }
  }
}

// out[m x n] += a[m x k] * b[n x k]^T
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) {
        s += pa[i * k + l] * pb[j * k + l];
      }
      po[i * n + j] += s;
    }
  }
}

// out[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* po = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      if (av == 0.0) {
        continue;
      }
      const double* brow = pb + i * n;
      double* orow = po + l * n;
      for (std::size_t j = 0; j < n; ++j) {
        orow[j] += av * brow[j];
      }
    }
  }
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = fwd(av[i]);
  }
  Var parents[] = {a};
  return t.record(std::move(out), parents, [a, deriv](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(a);
    Tensor d = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
      d[i] = g[i] * deriv(x[i]);
    }
    tp.accumulate(a, d);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    shape_error("matmul", av, bv);
  }
  Tensor out = Tensor::matrix(av.rows(), bv.cols());
  gemm_nn(av, bv, out);
  Var parents[] = {a, b};
  return t.record(std::move(out), parents, [a, b](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(a);
    const Tensor& y = tp.value(b);
    if (tp.needs_grad(a)) {
      Tensor da = Tensor::matrix(x.rows(), x.cols());
      gemm_nt(g, y, da);
      tp.accumulate(a, da);
    }
    if (tp.needs_grad(b)) {
      Tensor db = Tensor::matrix(y.rows(), y.cols());
      gemm_tn(x, g, db);
      tp.accumulate(b, db);
    }
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    shape_error("matmul_nt", av, bv);
  }
  Tensor out = Tensor::matrix(av.rows(), bv.rows());
  gemm_nt(av, bv, out);
  Var parents[] = {a, b};
  return t.record(std::move(out), parents, [a, b](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(a);
    const Tensor& y = tp.value(b);
    if (tp.needs_grad(a)) {
      Tensor da = Tensor::matrix(x.rows(), x.cols());
      gemm_nn(g, y, da);
      tp.accumulate(a, da);
    }
    if (tp.needs_grad(b)) {
      Tensor db = Tensor::matrix(y.rows(), y.cols());
      gemm_tn(g, x, db);
      tp.accumulate(b, db);
    }
  });
}

Var add_row(Var a, Var bias) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.size() != av.cols()) {
    shape_error("add_row", av, bv);
  }
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) {
      out(r, c) = av(r, c) + bv[c];
    }
  }
  Var parents[] = {a, bias};
  return t.record(std::move(out), parents, [a, bias](Tape& tp, const Tensor& g) {
    tp.accumulate(a, g);
    if (tp.needs_grad(bias)) {
      Tensor db(tp.value(bias).shape(), 0.0);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
          db[c] += g(r, c);
        }
      }
      tp.accumulate(bias, db);
    }
  });
}

Var dense(Var input, Var weight, Var bias) { return add_row(matmul(input, weight), bias); }

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same("add", a.value(), b.value());
  Tensor out = Tensor::matrix(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] + b.value()[i];
  }
  Var parents[] = {a, b};
  return t.record(std::move(out), parents, [a, b](Tape& tp, const Tensor& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same("sub", a.value(), b.value());
  Tensor out = Tensor::matrix(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] - b.value()[i];
  }
  Var parents[] = {a, b};
  return t.record(std::move(out), parents, [a, b](Tape& tp, const Tensor& g) {
    tp.accumulate(a, g);
    if (tp.needs_grad(b)) {
      Tensor d = g;
      for (double& v : d.values()) {
        v = -v;
      }
      tp.accumulate(b, d);
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same("mul", a.value(), b.value());
  Tensor out = Tensor::matrix(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] * b.value()[i];
  }
  Var parents[] = {a, b};
  return t.record(std::move(out), parents, [a, b](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(a);
    const Tensor& y = tp.value(b);
    if (tp.needs_grad(a)) {
      Tensor d = Tensor::matrix(x.rows(), x.cols());
      for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = g[i] * y[i];
      }
      tp.accumulate(a, d);
    }
    if (tp.needs_grad(b)) {
      Tensor d = Tensor::matrix(y.rows(), y.cols());
      for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = g[i] * x[i];
      }
      tp.accumulate(b, d);
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double) { return factor; });
}

Var add_scalar(Var a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Var rsub_scalar(double c, Var a) {
  return unary(a, [c](double x) { return c - x; }, [](double) { return -1.0; });
}

Var relu(Var a) {
  if (a.tape()->needs_grad(a)) {
    for (double x : a.value().values()) {
      a.tape()->note_kink(std::abs(x));
    }
  }
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); },
               [](double x) { return std::exp(x); });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var clamp_min(Var a, double floor) {
  return unary(a, [floor](double x) { return x > floor ? x : floor; },
               [floor](double x) { return x > floor ? 1.0 : 0.0; });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto in = av.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      z += o[c];
    }
    for (double& v : o) {
      v /= z;
    }
  }
  Var parents[] = {a};
  Tensor saved = out;
  return t.record(std::move(out), parents, [a, saved](Tape& tp, const Tensor& g) {
    Tensor d = Tensor::matrix(saved.rows(), saved.cols());
    for (std::size_t r = 0; r < saved.rows(); ++r) {
      auto y = saved.row(r);
      auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < y.size(); ++c) {
        dot += y[c] * gr[c];
      }
      auto dr = d.row(r);
      for (std::size_t c = 0; c < y.size(); ++c) {
        dr[c] = y[c] * (gr[c] - dot);
      }
    }
    tp.accumulate(a, d);
  });
}

Var entropy_rows(Var p) {
  Tape& t = tape_of(p);
  const Tensor& pv = p.value();
  Tensor out = Tensor::matrix(pv.rows(), 1);
  for (std::size_t r = 0; r < pv.rows(); ++r) {
    double h = 0.0;
    for (double v : pv.row(r)) {
      if (v > 0.0) {
        h -= v * std::log(v);
      }
    }
    out[r] = h;
  }
  Var parents[] = {p};
  return t.record(std::move(out), parents, [p](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(p);
    Tensor d = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double v = x(r, c);
        d(r, c) = v > 0.0 ? -g[r] * (std::log(v) + 1.0) : 0.0;
      }
    }
    tp.accumulate(p, d);
  });
}

Var row_sum(Var a) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  Tensor out = Tensor::matrix(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (double v : av.row(r)) {
      s += v;
    }
    out[r] = s;
  }
  Var parents[] = {a};
  return t.record(std::move(out), parents, [a](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(a);
    Tensor d = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (double& v : d.row(r)) {
        v = g[r];
      }
    }
    tp.accumulate(a, d);
  });
}

Var sum_all(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().values()) {
    s += v;
  }
  Var parents[] = {a};
  return t.record(Tensor::matrix(1, 1, s), parents, [a](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(a);
    tp.accumulate(a, Tensor::matrix(x.rows(), x.cols(), g[0]));
  });
}

Var mean_all(Var a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size()));
}

Var mul_col(Var a, Var c) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& cv = c.value();
  if (cv.cols() != 1 || cv.rows() != av.rows()) {
    shape_error("mul_col", av, cv);
  }
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t k = 0; k < av.cols(); ++k) {
      out(r, k) = av(r, k) * cv[r];
    }
  }
  Var parents[] = {a, c};
  return t.record(std::move(out), parents, [a, c](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(a);
    const Tensor& y = tp.value(c);
    if (tp.needs_grad(a)) {
      Tensor d = Tensor::matrix(x.rows(), x.cols());
      for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t k = 0; k < x.cols(); ++k) {
          d(r, k) = g(r, k) * y[r];
        }
      }
      tp.accumulate(a, d);
    }
    if (tp.needs_grad(c)) {
      Tensor d = Tensor::matrix(y.rows(), 1);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < x.cols(); ++k) {
          s += g(r, k) * x(r, k);
        }
        d[r] = s;
      }
      tp.accumulate(c, d);
    }
  });
}

Var max_n(std::span<const Var> inputs) {
  if (inputs.empty()) {
    throw ConfigError("max_n: no inputs");
  }
  Tape& t = tape_of(inputs[0]);
  const Tensor& first = inputs[0].value();
  Tensor out = first.reshaped({first.rows(), first.cols()});
  auto source = std::make_shared<std::vector<std::size_t>>(first.size(), 0);
  for (std::size_t k = 1; k < inputs.size(); ++k) {
    const Tensor& v = inputs[k].value();
    require_same("max_n", first, v);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] > out[i]) {
        out[i] = v[i];
        (*source)[i] = k;
      }
    }
  }
  std::vector<Var> parents(inputs.begin(), inputs.end());
  const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                   [&](const Var& v) { return t.needs_grad(v); });
  if (tracked && inputs.size() > 1) {
    // Relative gap between the winner and the runner-up of each element.
    for (std::size_t i = 0; i < out.size(); ++i) {
      double runner = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (k != (*source)[i]) {
          runner = std::max(runner, inputs[k].value()[i]);
        }
      }
      const double scale = std::max({std::abs(out[i]), std::abs(runner), 1e-300});
      t.note_kink((out[i] - runner) / scale);
    }
  }
  return t.record(std::move(out), parents, [parents, source](Tape& tp, const Tensor& g) {
    for (std::size_t k = 0; k < parents.size(); ++k) {
      if (!tp.needs_grad(parents[k])) {
        continue;
      }
      Tensor d = Tensor::matrix(g.rows(), g.cols());
      bool any = false;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if ((*source)[i] == k) {
          d[i] = g[i];
          any = true;
        }
      }
      if (any) {
        tp.accumulate(parents[k], d);
      }
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> indices) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t n = av.cols();
  Tensor out = Tensor::matrix(indices.size(), n);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= av.rows()) {
      throw ConfigError("gather_rows: index out of range");
    }
    auto src = av.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Var parents[] = {a};
  return t.record(std::move(out), parents, [a, idx = std::move(idx)](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_buffer(a);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto dst = d.row(idx[r]);
      auto src = g.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) {
        dst[c] += src[c];
      }
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) {
    throw ConfigError("concat_rows: no inputs");
  }
  Tape& t = tape_of(parts[0]);
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.cols() != n) {
      shape_error("concat_rows", parts[0].value(), p.value());
    }
    total += p.rows();
  }
  Tensor out = Tensor::matrix(total, n);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    auto src = p.value().values();
    std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += src.size();
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return t.record(std::move(out), parents, [parents](Tape& tp, const Tensor& g) {
    std::size_t off = 0;
    for (const Var& p : parents) {
      const Tensor& v = tp.value(p);
      if (tp.needs_grad(p)) {
        Tensor d = Tensor::matrix(v.rows(), v.cols());
        std::copy(g.values().begin() + static_cast<std::ptrdiff_t>(off),
                  g.values().begin() + static_cast<std::ptrdiff_t>(off + v.size()),
                  d.values().begin());
        tp.accumulate(p, d);
      }
      off += v.size();
    }
  });
}

Var group_sum_rows(Var a, std::size_t group) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  if (group == 0 || av.rows() % group != 0) {
    throw ConfigError("group_sum_rows: row count not divisible by group size");
  }
  const std::size_t m = av.rows() / group;
  Tensor out = Tensor::matrix(m, av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto dst = out.row(r / group);
    auto src = av.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) {
      dst[c] += src[c];
    }
  }
  Var parents[] = {a};
  return t.record(std::move(out), parents, [a, group](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(a);
    Tensor d = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto src = g.row(r / group);
      std::copy(src.begin(), src.end(), d.row(r).begin());
    }
    tp.accumulate(a, d);
  });
}

Var repeat_rows(Var a, std::size_t times) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  if (times == 0) {
    throw ConfigError("repeat_rows: times must be positive");
  }
  Tensor out = Tensor::matrix(av.rows() * times, av.cols());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto src = av.row(r / times);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  Var parents[] = {a};
  return t.record(std::move(out), parents, [a, times](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(a);
    Tensor d = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto dst = d.row(r / times);
      auto src = g.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) {
        dst[c] += src[c];
      }
    }
    tp.accumulate(a, d);
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape& t = tape_of(a);
  if (rows * cols != a.value().size()) {
    throw ConfigError("reshape: element count mismatch");
  }
  Tensor out = a.value().reshaped({rows, cols});
  Var parents[] = {a};
  return t.record(std::move(out), parents,
                  [a](Tape& tp, const Tensor& g) { tp.accumulate(a, g); });
}

Var masked_softmax_rows(Var scores, Var membership) {
  Tape& t = tape_of(scores);
  const Tensor& sv = scores.value();
  const Tensor& mv = membership.value();
  require_same("masked_softmax_rows", sv, mv);
  const std::size_t rows = sv.rows(), cols = sv.cols();
  Tensor out = Tensor::matrix(rows, cols);
  // Per-row exp(s - max_member) and normaliser, kept for the membership gradient.
  auto expo = std::make_shared<Tensor>(Tensor::matrix(rows, cols));
  auto norm = std::make_shared<std::vector<double>>(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (mv(r, c) > 0.0) {
        mx = std::max(mx, sv(r, c));
      }
    }
    if (!std::isfinite(mx)) {
      throw NumericalError("masked_softmax_rows: row " + std::to_string(r) +
                           " has no positive membership");
    }
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = std::exp(std::min(sv(r, c) - mx, 700.0));
      (*expo)(r, c) = e;
      if (mv(r, c) > 0.0) {
        z += mv(r, c) * e;
      }
    }
    (*norm)[r] = z;
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = mv(r, c) > 0.0 ? mv(r, c) * (*expo)(r, c) / z : 0.0;
    }
  }
  Tensor weights = out;
  Var parents[] = {scores, membership};
  return t.record(std::move(out), parents,
                  [scores, membership, weights, expo, norm](Tape& tp, const Tensor& g) {
                    const std::size_t rows = weights.rows(), cols = weights.cols();
                    std::vector<double> gbar(rows, 0.0);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t c = 0; c < cols; ++c) {
                        gbar[r] += weights(r, c) * g(r, c);
                      }
                    }
                    if (tp.needs_grad(scores)) {
                      Tensor d = Tensor::matrix(rows, cols);
                      for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t c = 0; c < cols; ++c) {
                          d(r, c) = weights(r, c) * (g(r, c) - gbar[r]);
                        }
                      }
                      tp.accumulate(scores, d);
                    }
                    if (tp.needs_grad(membership)) {
                      Tensor d = Tensor::matrix(rows, cols);
                      for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t c = 0; c < cols; ++c) {
                          d(r, c) = (*expo)(r, c) / (*norm)[r] * (g(r, c) - gbar[r]);
                        }
                      }
                      tp.accumulate(membership, d);
                    }
                  });
}

}  // namespace xplain::diff
