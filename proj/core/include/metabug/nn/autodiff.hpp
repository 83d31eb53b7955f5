#pragma once

#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "metabug/nn/tensor.hpp"

namespace metabug::nn {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  bool valid() const { return tape != nullptr; }
};

/// Records operations for reverse accumulation. Every op output is checked
/// for NaN/Inf.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Var constant(Tensor t);
  /// A value whose gradient is wanted.
  Var leaf(Tensor t);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  /// Gradient of the last backward() target; zeros if the node was unreachable.
  const Tensor& grad(Var v);
  Tensor& grad_ref(int id);
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  /// Seeds d(out)/d(out) = 1 for a scalar `out` and propagates to all leaves.
  void backward(Var out);

  Var record(Tensor value, const std::vector<Var>& parents, Backward back, const char* op);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    Backward back;
  };
  std::deque<Node> nodes_;  // stable references across appends
};

// Elementwise, equal shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var sigmoid(Var a);
Var tanh(Var a);
/// max(a, 0).
Var relu(Var a);
/// s * a + t.
Var affine(Var a, double s, double t);

/// X[r×c] + b[c] added to every row.
Var add_row(Var x, Var b);
/// A[r×k] · B[k×c].
Var matmul(Var a, Var b);
/// A[r×k] · B[c×k]ᵀ.
Var matmul_t(Var a, Var b);
/// Rows of A[r×k] dotted with v[k] → [r].
Var matvec(Var a, Var v);
/// Σ_i w[i] · A[i, :] → [c].
Var vecmat(Var w, Var a);
/// Row i of X scaled by v[i].
Var scale_rows(Var x, Var v);
/// Softmax of a vector.
Var softmax(Var v);
/// Row-wise softmax of a square matrix with the diagonal excluded (weight 0).
Var softmax_rows_offdiag(Var m);
Var dot(Var a, Var b);
/// ‖a − b‖².
Var sqdist(Var a, Var b);
/// Sum of all entries → scalar.
Var sum(Var a);
/// Sum of scalars; an empty list gives a constant 0 on `tape`.
Var sum_scalars(Tape& tape, const std::vector<Var>& xs);

/// Rows `index` of table E → [index.size() × c].
Var gather_rows(Var table, const std::vector<int>& index);
/// out[dst] += X[src] for each (dst, src) pair; out has `rows` rows.
Var scatter_edges(Var x, const std::vector<std::pair<int, int>>& edges, std::size_t rows);
Var row(Var x, std::size_t i);
Var stack_rows(const std::vector<Var>& rows);
/// [A | B] for matrices with equal row counts.
Var concat_cols(Var a, Var b);
Var mean_rows(Var x);
/// v[c] repeated as `rows` rows.
Var broadcast_row(Var v, std::size_t rows);

}  // namespace metabug::nn
