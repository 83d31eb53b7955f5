#include "metabug/nn/autodiff.hpp"

#include <cmath>

namespace metabug::nn {

namespace {

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": " + what);
}

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape == b.shape, op,
          "shape mismatch " + shape_string(a.shape) + " vs " + shape_string(b.shape));
}

Tape& tape_of(Var a) {
  if (!a.tape) throw std::invalid_argument("operation on an unbound Var");
  return *a.tape;
}

}  // namespace

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor t) {
  check_finite(t, "constant");
  nodes_.push_back(Node{std::move(t), Tensor(), false, false, nullptr});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::leaf(Tensor t) {
  check_finite(t, "leaf");
  nodes_.push_back(Node{std::move(t), Tensor(), false, true, nullptr});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad_ref(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape, 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(Var v) { return grad_ref(v.id); }

Var Tape::record(Tensor value, const std::vector<Var>& parents, Backward back, const char* op) {
  check_finite(value, op);
  bool needs = false;
  for (Var p : parents) needs = needs || needs_grad(p.id);
  nodes_.push_back(Node{std::move(value), Tensor(), false, needs, needs ? std::move(back) : nullptr});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::backward(Var out) {
  require(value(out.id).size() == 1, "backward", "target must be a scalar");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  grad_ref(out.id).data[0] = 1.0;
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.has_grad && n.back) n.back(*this, i);
  }
}

namespace {

// Accumulates g into the gradient of `parent` when it needs one.
template <typename F>
void into(Tape& t, Var parent, F&& f) {
  if (t.needs_grad(parent.id)) f(t.grad_ref(parent.id));
}

Var elementwise(Var a, const char* op, double (*fwd)(double), double (*dfdx)(double x, double y)) {
  const Tensor& x = a.value();
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  return tape_of(a).record(std::move(y), {a},
                           [a, dfdx](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             const Tensor& x = t.value(a.id);
                             const Tensor& y = t.value(self);
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 ga[i] += g[i] * dfdx(x[i], y[i]);
                             });
                           },
                           op);
}

}  // namespace

Var add(Var a, Var b) {
  same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return tape_of(a).record(std::move(y), {a, b},
                           [a, b](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                             });
                             into(t, b, [&](Tensor& gb) {
                               for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                             });
                           },
                           "add");
}

Var sub(Var a, Var b) {
  same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return tape_of(a).record(std::move(y), {a, b},
                           [a, b](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                             });
                             into(t, b, [&](Tensor& gb) {
                               for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                             });
                           },
                           "sub");
}

Var mul(Var a, Var b) {
  same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return tape_of(a).record(std::move(y), {a, b},
                           [a, b](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             const Tensor& av = t.value(a.id);
                             const Tensor& bv = t.value(b.id);
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                             });
                             into(t, b, [&](Tensor& gb) {
                               for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                             });
                           },
                           "mul");
}

Var sigmoid(Var a) {
  return elementwise(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return elementwise(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return elementwise(
      a, "relu", [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var affine(Var a, double s, double t0) {
  Tensor y = a.value();
  for (double& v : y.data) v = s * v + t0;
  return tape_of(a).record(std::move(y), {a},
                           [a, s](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
                             });
                           },
                           "affine");
}

Var add_row(Var x, Var b) {
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  require(xv.is_matrix() && bv.is_vector() && bv.size() == xv.cols(), "add_row",
          shape_string(xv.shape) + " + " + shape_string(bv.shape));
  Tensor y = xv;
  std::size_t r = xv.rows(), c = xv.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y.at(i, j) += bv[j];
  return tape_of(x).record(std::move(y), {x, b},
                           [x, b, r, c](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             into(t, x, [&](Tensor& gx) {
                               for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                             });
                             into(t, b, [&](Tensor& gb) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < c; ++j) gb[j] += g.at(i, j);
                             });
                           },
                           "add_row");
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.is_matrix() && bv.is_matrix() && av.cols() == bv.rows(), "matmul",
          shape_string(av.shape) + " * " + shape_string(bv.shape));
  std::size_t r = av.rows(), k = av.cols(), c = bv.cols();
  Tensor y({r, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double aip = av.at(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < c; ++j) y.at(i, j) += aip * bv.at(p, j);
    }
  return tape_of(a).record(std::move(y), {a, b},
                           [a, b, r, k, c](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             const Tensor& av = t.value(a.id);
                             const Tensor& bv = t.value(b.id);
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t p = 0; p < k; ++p) {
                                   double s = 0;
                                   for (std::size_t j = 0; j < c; ++j) s += g.at(i, j) * bv.at(p, j);
                                   ga.at(i, p) += s;
                                 }
                             });
                             into(t, b, [&](Tensor& gb) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t p = 0; p < k; ++p) {
                                   double aip = av.at(i, p);
                                   for (std::size_t j = 0; j < c; ++j) gb.at(p, j) += aip * g.at(i, j);
                                 }
                             });
                           },
                           "matmul");
}

Var matmul_t(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.is_matrix() && bv.is_matrix() && av.cols() == bv.cols(), "matmul_t",
          shape_string(av.shape) + " * " + shape_string(bv.shape) + "T");
  std::size_t r = av.rows(), k = av.cols(), c = bv.rows();
  Tensor y({r, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double* ai = &av.data[i * k];
      const double* bj = &bv.data[j * k];
      double s = 0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      y.at(i, j) = s;
    }
  return tape_of(a).record(std::move(y), {a, b},
                           [a, b, r, k, c](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             const Tensor& av = t.value(a.id);
                             const Tensor& bv = t.value(b.id);
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < c; ++j) {
                                   double gij = g.at(i, j);
                                   if (gij == 0.0) continue;
                                   for (std::size_t p = 0; p < k; ++p) ga.at(i, p) += gij * bv.at(j, p);
                                 }
                             });
                             into(t, b, [&](Tensor& gb) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < c; ++j) {
                                   double gij = g.at(i, j);
                                   if (gij == 0.0) continue;
                                   for (std::size_t p = 0; p < k; ++p) gb.at(j, p) += gij * av.at(i, p);
                                 }
                             });
                           },
                           "matmul_t");
}

Var matvec(Var a, Var v) {
  const Tensor& av = a.value();
  const Tensor& vv = v.value();
  require(av.is_matrix() && vv.is_vector() && av.cols() == vv.size(), "matvec",
          shape_string(av.shape) + " * " + shape_string(vv.shape));
  std::size_t r = av.rows(), k = av.cols();
  Tensor y({r});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0;
    for (std::size_t p = 0; p < k; ++p) s += av.at(i, p) * vv[p];
    y[i] = s;
  }
  return tape_of(a).record(std::move(y), {a, v},
                           [a, v, r, k](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             const Tensor& av = t.value(a.id);
                             const Tensor& vv = t.value(v.id);
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t p = 0; p < k; ++p) ga.at(i, p) += g[i] * vv[p];
                             });
                             into(t, v, [&](Tensor& gv) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t p = 0; p < k; ++p) gv[p] += g[i] * av.at(i, p);
                             });
                           },
                           "matvec");
}

Var vecmat(Var w, Var a) {
  const Tensor& wv = w.value();
  const Tensor& av = a.value();
  require(av.is_matrix() && wv.is_vector() && av.rows() == wv.size(), "vecmat",
          shape_string(wv.shape) + " * " + shape_string(av.shape));
  std::size_t r = av.rows(), c = av.cols();
  Tensor y({c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j] += wv[i] * av.at(i, j);
  return tape_of(a).record(std::move(y), {w, a},
                           [w, a, r, c](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             const Tensor& wv = t.value(w.id);
                             const Tensor& av = t.value(a.id);
                             into(t, w, [&](Tensor& gw) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < c; ++j) gw[i] += g[j] * av.at(i, j);
                             });
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < c; ++j) ga.at(i, j) += wv[i] * g[j];
                             });
                           },
                           "vecmat");
}

Var scale_rows(Var x, Var v) {
  const Tensor& xv = x.value();
  const Tensor& vv = v.value();
  require(xv.is_matrix() && vv.is_vector() && xv.rows() == vv.size(), "scale_rows",
          shape_string(xv.shape) + " by " + shape_string(vv.shape));
  std::size_t r = xv.rows(), c = xv.cols();
  Tensor y = xv;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y.at(i, j) *= vv[i];
  return tape_of(x).record(std::move(y), {x, v},
                           [x, v, r, c](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             const Tensor& xv = t.value(x.id);
                             const Tensor& vv = t.value(v.id);
                             into(t, x, [&](Tensor& gx) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < c; ++j) gx.at(i, j) += g.at(i, j) * vv[i];
                             });
                             into(t, v, [&](Tensor& gv) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < c; ++j) gv[i] += g.at(i, j) * xv.at(i, j);
                             });
                           },
                           "scale_rows");
}

namespace {

// Softmax over entries [begin, end) of `x` with stride 1, skipping `skip`.
void softmax_span(const double* x, double* y, std::size_t n, std::size_t skip) {
  double mx = -INFINITY;
  for (std::size_t i = 0; i < n; ++i)
    if (i != skip && x[i] > mx) mx = x[i];
  double z = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i == skip ? 0.0 : std::exp(x[i] - mx);
    z += y[i];
  }
  for (std::size_t i = 0; i < n; ++i) y[i] /= z;
}

void softmax_span_backward(const double* y, const double* g, double* gx, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += g[i] * y[i];
  for (std::size_t i = 0; i < n; ++i) gx[i] += y[i] * (g[i] - s);
}

}  // namespace

Var softmax(Var v) {
  const Tensor& x = v.value();
  require(x.is_vector() && x.size() > 0, "softmax", "needs a nonempty vector");
  Tensor y(x.shape);
  softmax_span(x.data.data(), y.data.data(), x.size(), x.size());
  return tape_of(v).record(std::move(y), {v},
                           [v](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             const Tensor& y = t.value(self);
                             into(t, v, [&](Tensor& gv) {
                               softmax_span_backward(y.data.data(), g.data.data(), gv.data.data(), y.size());
                             });
                           },
                           "softmax");
}

Var softmax_rows_offdiag(Var m) {
  const Tensor& x = m.value();
  require(x.is_matrix() && x.rows() == x.cols() && x.rows() >= 2, "softmax_rows_offdiag",
          "needs a square matrix of size at least 2");
  std::size_t n = x.rows();
  Tensor y(x.shape);
  for (std::size_t i = 0; i < n; ++i) softmax_span(&x.data[i * n], &y.data[i * n], n, i);
  return tape_of(m).record(std::move(y), {m},
                           [m, n](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             const Tensor& y = t.value(self);
                             into(t, m, [&](Tensor& gm) {
                               for (std::size_t i = 0; i < n; ++i)
                                 softmax_span_backward(&y.data[i * n], &g.data[i * n], &gm.data[i * n], n);
                             });
                           },
                           "softmax_rows_offdiag");
}

Var dot(Var a, Var b) {
  same_shape(a.value(), b.value(), "dot");
  double s = 0;
  for (std::size_t i = 0; i < a.value().size(); ++i) s += a.value()[i] * b.value()[i];
  return tape_of(a).record(Tensor::scalar(s), {a, b},
                           [a, b](Tape& t, int self) {
                             double g = t.grad_ref(self)[0];
                             const Tensor& av = t.value(a.id);
                             const Tensor& bv = t.value(b.id);
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
                             });
                             into(t, b, [&](Tensor& gb) {
                               for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
                             });
                           },
                           "dot");
}

Var sqdist(Var a, Var b) {
  same_shape(a.value(), b.value(), "sqdist");
  double s = 0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    double d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  return tape_of(a).record(Tensor::scalar(s), {a, b},
                           [a, b](Tape& t, int self) {
                             double g = t.grad_ref(self)[0];
                             const Tensor& av = t.value(a.id);
                             const Tensor& bv = t.value(b.id);
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2 * g * (av[i] - bv[i]);
                             });
                             into(t, b, [&](Tensor& gb) {
                               for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= 2 * g * (av[i] - bv[i]);
                             });
                           },
                           "sqdist");
}

Var sum(Var a) {
  double s = 0;
  for (double x : a.value().data) s += x;
  return tape_of(a).record(Tensor::scalar(s), {a},
                           [a](Tape& t, int self) {
                             double g = t.grad_ref(self)[0];
                             into(t, a, [&](Tensor& ga) {
                               for (double& x : ga.data) x += g;
                             });
                           },
                           "sum");
}

Var sum_scalars(Tape& tape, const std::vector<Var>& xs) {
  if (xs.empty()) return tape.constant(Tensor::scalar(0.0));
  Var acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

Var gather_rows(Var table, const std::vector<int>& index) {
  const Tensor& tv = table.value();
  require(tv.is_matrix(), "gather_rows", "table must be a matrix");
  std::size_t c = tv.cols();
  Tensor y({index.size(), c});
  for (std::size_t i = 0; i < index.size(); ++i) {
    auto r = static_cast<std::size_t>(index[i]);
    require(r < tv.rows(), "gather_rows", "index out of range");
    for (std::size_t j = 0; j < c; ++j) y.at(i, j) = tv.at(r, j);
  }
  return tape_of(table).record(std::move(y), {table},
                               [table, index, c](Tape& t, int self) {
                                 const Tensor& g = t.grad_ref(self);
                                 into(t, table, [&](Tensor& gt) {
                                   for (std::size_t i = 0; i < index.size(); ++i) {
                                     auto r = static_cast<std::size_t>(index[i]);
                                     for (std::size_t j = 0; j < c; ++j) gt.at(r, j) += g.at(i, j);
                                   }
                                 });
                               },
                               "gather_rows");
}

Var scatter_edges(Var x, const std::vector<std::pair<int, int>>& edges, std::size_t rows) {
  const Tensor& xv = x.value();
  require(xv.is_matrix(), "scatter_edges", "input must be a matrix");
  std::size_t c = xv.cols();
  Tensor y({rows, c});
  for (auto [dst, src] : edges) {
    auto d = static_cast<std::size_t>(dst);
    auto s = static_cast<std::size_t>(src);
    require(d < rows && s < xv.rows(), "scatter_edges", "edge endpoint out of range");
    for (std::size_t j = 0; j < c; ++j) y.at(d, j) += xv.at(s, j);
  }
  return tape_of(x).record(std::move(y), {x},
                           [x, edges, c](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             into(t, x, [&](Tensor& gx) {
                               for (auto [dst, src] : edges)
                                 for (std::size_t j = 0; j < c; ++j)
                                   gx.at(static_cast<std::size_t>(src), j) += g.at(static_cast<std::size_t>(dst), j);
                             });
                           },
                           "scatter_edges");
}

Var row(Var x, std::size_t i) {
  const Tensor& xv = x.value();
  require(xv.is_matrix() && i < xv.rows(), "row", "index out of range");
  std::size_t c = xv.cols();
  Tensor y({c});
  for (std::size_t j = 0; j < c; ++j) y[j] = xv.at(i, j);
  return tape_of(x).record(std::move(y), {x},
                           [x, i, c](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             into(t, x, [&](Tensor& gx) {
                               for (std::size_t j = 0; j < c; ++j) gx.at(i, j) += g[j];
                             });
                           },
                           "row");
}

Var stack_rows(const std::vector<Var>& rows) {
  require(!rows.empty(), "stack_rows", "no rows");
  std::size_t c = rows[0].value().size();
  Tensor y({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& r = rows[i].value();
    require(r.is_vector() && r.size() == c, "stack_rows", "rows must be equal-length vectors");
    for (std::size_t j = 0; j < c; ++j) y.at(i, j) = r[j];
  }
  Tape& tape = tape_of(rows[0]);
  return tape.record(std::move(y), rows,
                     [rows, c](Tape& t, int self) {
                       const Tensor& g = t.grad_ref(self);
                       for (std::size_t i = 0; i < rows.size(); ++i)
                         into(t, rows[i], [&](Tensor& gr) {
                           for (std::size_t j = 0; j < c; ++j) gr[j] += g.at(i, j);
                         });
                     },
                     "stack_rows");
}

Var concat_cols(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.is_matrix() && bv.is_matrix() && av.rows() == bv.rows(), "concat_cols",
          shape_string(av.shape) + " | " + shape_string(bv.shape));
  std::size_t r = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor y({r, ca + cb});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < ca; ++j) y.at(i, j) = av.at(i, j);
    for (std::size_t j = 0; j < cb; ++j) y.at(i, ca + j) = bv.at(i, j);
  }
  return tape_of(a).record(std::move(y), {a, b},
                           [a, b, r, ca, cb](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             into(t, a, [&](Tensor& ga) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < ca; ++j) ga.at(i, j) += g.at(i, j);
                             });
                             into(t, b, [&](Tensor& gb) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < cb; ++j) gb.at(i, j) += g.at(i, ca + j);
                             });
                           },
                           "concat_cols");
}

Var mean_rows(Var x) {
  const Tensor& xv = x.value();
  require(xv.is_matrix() && xv.rows() > 0, "mean_rows", "needs a nonempty matrix");
  std::size_t r = xv.rows(), c = xv.cols();
  Tensor y({c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j] += xv.at(i, j);
  for (double& v : y.data) v /= static_cast<double>(r);
  return tape_of(x).record(std::move(y), {x},
                           [x, r, c](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             into(t, x, [&](Tensor& gx) {
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < c; ++j) gx.at(i, j) += g[j] / static_cast<double>(r);
                             });
                           },
                           "mean_rows");
}

Var broadcast_row(Var v, std::size_t rows) {
  const Tensor& vv = v.value();
  require(vv.is_vector(), "broadcast_row", "needs a vector");
  std::size_t c = vv.size();
  Tensor y({rows, c});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < c; ++j) y.at(i, j) = vv[j];
  return tape_of(v).record(std::move(y), {v},
                           [v, rows, c](Tape& t, int self) {
                             const Tensor& g = t.grad_ref(self);
                             into(t, v, [&](Tensor& gv) {
                               for (std::size_t i = 0; i < rows; ++i)
                                 for (std::size_t j = 0; j < c; ++j) gv[j] += g.at(i, j);
                             });
                           },
                           "broadcast_row");
}

}  // namespace metabug::nn
