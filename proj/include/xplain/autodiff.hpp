#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xplain/params.hpp"
#include "xplain/tensor.hpp"

namespace xplain::diff {

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Wengert list for reverse-mode differentiation. Nodes are appended in
/// evaluation order, so reverse creation order is a valid (and fixed)
/// topological order for the backward sweep.
class Tape {
 public:
  /// Receives the node's accumulated output gradient; must push
  /// contributions into parents via Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);

  /// Leaf bound to a parameter entry; backward() adds into entry.grad.
  Var param(ParameterEntry& entry);

  /// Registers a store whose entries receive gradients on this tape.
  void train(ParameterStore& store);
  /// Binds `name` from `store`: a gradient-receiving leaf if the store was
  /// registered with train(), otherwise a constant.
  Var param(const ParameterStore& store, const std::string& name);

  /// Records a custom operation. `backward` runs only if some parent needs
  /// a gradient.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }

  /// Adds `delta` into the gradient buffer of `v` (no-op for constants).
  void accumulate(Var v, const Tensor& delta);
  /// Mutable gradient buffer of `v`, allocated on first use.
  Tensor& grad_buffer(Var v);

  /// Seeds d(loss)/d(loss) = 1 for a single-element loss and sweeps back.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  /// Smallest distance of any recorded relu input from 0 (absolute) or of a
  /// max_n winner from its runner-up (relative). Finite differences are
  /// unreliable when this is comparable to the step size.
  double kink_margin() const { return kink_margin_; }
  void note_kink(double margin) { kink_margin_ = std::min(kink_margin_, margin); }

 private:
  struct Node {
    Tensor value;
    std::unique_ptr<Tensor> grad;
    BackwardFn backward;
    ParameterEntry* entry = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<ParameterStore*> trainable_;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

// Operations. All inputs must live on the same tape; shape mismatches throw
// ConfigError.

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
/// a[m x n] + bias[n] broadcast over rows.
Var add_row(Var a, Var bias);
Var dense(Var input, Var weight, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
/// c - a
Var rsub_scalar(double c, Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
/// max(a, floor); gradient passes only where a > floor.
Var clamp_min(Var a, double floor);
Var softmax_rows(Var a);
/// -sum p log p per row, with 0 log 0 = 0. Output [m x 1].
Var entropy_rows(Var p);
/// Per-row sums, output [m x 1].
Var row_sum(Var a);
/// Sum of all entries, output [1 x 1].
Var sum_all(Var a);
Var mean_all(Var a);
/// a[m x n] * c[m x 1] broadcast across columns.
Var mul_col(Var a, Var c);
/// Element-wise maximum over a list of equal-shape inputs (ties: first wins).
Var max_n(std::span<const Var> inputs);
Var gather_rows(Var a, std::span<const std::size_t> indices);
Var concat_rows(std::span<const Var> parts);
/// Sums consecutive groups of `group` rows: [m x n] -> [m/group x n].
Var group_sum_rows(Var a, std::size_t group);
/// Repeats each row `times` times consecutively: [m x n] -> [m*times x n].
Var repeat_rows(Var a, std::size_t times);
Var reshape(Var a, std::size_t rows, std::size_t cols);
/// w_ij = m_ij exp(s_ij) / sum_l m_il exp(s_il), row-wise.
/// Rows whose memberships are all zero are rejected.
Var masked_softmax_rows(Var scores, Var membership);

}  // namespace xplain::diff
