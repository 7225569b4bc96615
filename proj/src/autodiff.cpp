#include "ubant/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ubant::ad {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_str(shape_) + " does not match " +
                                std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw std::invalid_argument("Tensor::item on shape " + shape_str(shape_));
  }
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t(std::move(shape), data_);
  return t;
}

const Tensor& Var::value() const { return graph_->value(id_); }

// ---------------------------------------------------------------------------
// Graph

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](std::size_t i) { return nodes_[i].requires_grad; });
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::backward(Var root) {
  if (&root.graph() != this) throw std::invalid_argument("backward: root belongs to another graph");
  if (root.size() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got shape " + shape_str(root.shape()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  Node& r = nodes_[root.id()];
  r.grad = Tensor(r.value.shape(), 1.0);
  r.has_grad = true;

  std::vector<Tensor*> grad_in;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    grad_in.assign(n.inputs.size(), nullptr);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      Node& in = nodes_[n.inputs[k]];
      if (!in.requires_grad) continue;
      if (!in.has_grad) {
        in.grad = Tensor(in.value.shape(), 0.0);
        in.has_grad = true;
      }
      grad_in[k] = &in.grad;
    }
    n.backward(*this, n.grad, grad_in);
  }
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (!n.has_grad) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

// ---------------------------------------------------------------------------
// helpers

namespace {

void same_graph(Var a, Var b, const char* op) {
  if (&a.graph() != &b.graph()) throw std::invalid_argument(std::string(op) + ": operands from different graphs");
}

// Index maps from output positions to operand positions under broadcasting.
struct Broadcast {
  enum class Mode { same, a_single, b_single, general };
  Mode mode = Mode::same;
  Shape out;
  std::vector<std::size_t> ia, ib;

  std::size_t a(std::size_t k) const {
    switch (mode) {
      case Mode::same: case Mode::b_single: return k;
      case Mode::a_single: return 0;
      default: return ia[k];
    }
  }
  std::size_t b(std::size_t k) const {
    switch (mode) {
      case Mode::same: case Mode::a_single: return k;
      case Mode::b_single: return 0;
      default: return ib[k];
    }
  }
};

Broadcast broadcast(const Shape& sa, const Shape& sb, const char* op) {
  Broadcast bc;
  if (sa == sb) {
    bc.mode = Broadcast::Mode::same;
    bc.out = sa;
    return bc;
  }
  if (shape_size(sb) == 1) {
    bc.mode = Broadcast::Mode::b_single;
    bc.out = sa;
    return bc;
  }
  if (shape_size(sa) == 1) {
    bc.mode = Broadcast::Mode::a_single;
    bc.out = sb;
    return bc;
  }
  auto fail = [&] {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(sa) + " vs " + shape_str(sb));
  };
  if (sa.size() != sb.size()) fail();
  const std::size_t r = sa.size();
  bc.mode = Broadcast::Mode::general;
  bc.out.resize(r);
  for (std::size_t d = 0; d < r; ++d) {
    if (sa[d] == sb[d]) bc.out[d] = sa[d];
    else if (sa[d] == 1) bc.out[d] = sb[d];
    else if (sb[d] == 1) bc.out[d] = sa[d];
    else fail();
  }
  const std::size_t n = shape_size(bc.out);
  bc.ia.resize(n);
  bc.ib.resize(n);
  std::vector<std::size_t> idx(r, 0);
  std::vector<std::size_t> stride_a(r), stride_b(r);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t d = r; d-- > 0;) {
    stride_a[d] = sa[d] == 1 ? 0 : acc_a;
    stride_b[d] = sb[d] == 1 ? 0 : acc_b;
    acc_a *= sa[d];
    acc_b *= sb[d];
  }
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t d = 0; d < r; ++d) {
      oa += idx[d] * stride_a[d];
      ob += idx[d] * stride_b[d];
    }
    bc.ia[k] = oa;
    bc.ib[k] = ob;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < bc.out[d]) break;
      idx[d] = 0;
    }
  }
  return bc;
}

// Splits a shape around `axis` into (outer, axis length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                                shape_str(s));
  }
  AxisSplit sp;
  for (std::size_t d = 0; d < axis; ++d) sp.outer *= s[d];
  sp.len = s[axis];
  for (std::size_t d = axis + 1; d < s.size(); ++d) sp.inner *= s[d];
  return sp;
}

template <class Fwd, class Deriv>
Var unary(const char* op, Var x, Fwd fwd, Deriv deriv) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  const std::size_t xid = x.id();
  Graph& g = x.graph();
  const std::size_t oid = g.size();
  return g.record(op, std::move(out), {xid},
                  [xid, oid, deriv](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                    const Tensor& in = gr.value(xid);
                    const Tensor& o = gr.value(oid);
                    Tensor& gx = *gi[0];
                    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * deriv(in[i], o[i]);
                  });
}

template <class Fwd, class DA, class DB>
Var binary(const char* op, Var a, Var b, Fwd fwd, DA da, DB db) {
  same_graph(a, b, op);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  auto bc = std::make_shared<Broadcast>(broadcast(av.shape(), bv.shape(), op));
  Tensor out(bc->out);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = fwd(av[bc->a(k)], bv[bc->b(k)]);
  const std::size_t aid = a.id(), bid = b.id();
  return a.graph().record(op, std::move(out), {aid, bid},
                          [aid, bid, bc, da, db](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                            const Tensor& x = gr.value(aid);
                            const Tensor& y = gr.value(bid);
                            if (gi[0]) {
                              Tensor& g = *gi[0];
                              for (std::size_t k = 0; k < go.size(); ++k) {
                                g[bc->a(k)] += go[k] * da(x[bc->a(k)], y[bc->b(k)]);
                              }
                            }
                            if (gi[1]) {
                              Tensor& g = *gi[1];
                              for (std::size_t k = 0; k < go.size(); ++k) {
                                g[bc->b(k)] += go[k] * db(x[bc->a(k)], y[bc->b(k)]);
                              }
                            }
                          });
}

enum class Extreme { max, min };

Var reduce_extreme(const char* op, Var x, std::size_t axis, Extreme which) {
  const Tensor& xv = x.value();
  const AxisSplit sp = split_axis(xv.shape(), axis, op);
  if (sp.len == 0) throw std::invalid_argument(std::string(op) + ": empty axis");
  Shape os = xv.shape();
  os[axis] = 1;
  Tensor out(os);
  auto arg = std::make_shared<std::vector<std::size_t>>(sp.outer * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      std::size_t best = o * sp.len * sp.inner + i;
      for (std::size_t l = 1; l < sp.len; ++l) {
        const std::size_t k = (o * sp.len + l) * sp.inner + i;
        const bool better = which == Extreme::max ? xv[k] > xv[best] : xv[k] < xv[best];
        if (better) best = k;
      }
      (*arg)[o * sp.inner + i] = best;
      out[o * sp.inner + i] = xv[best];
    }
  }
  return x.graph().record(op, std::move(out), {x.id()},
                          [arg](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                            Tensor& g = *gi[0];
                            for (std::size_t k = 0; k < go.size(); ++k) g[(*arg)[k]] += go[k];
                          });
}

}  // namespace

// ---------------------------------------------------------------------------
// binary

Var add(Var a, Var b) {
  return binary("add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
                [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
                [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
                [](double x, double) { return x; });
}

Var div(Var a, Var b) {
  return binary("div", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
                [](double x, double y) { return -x / (y * y); });
}

Var scale_by_scalar_node(Var x, Var s) {
  if (s.size() != 1) {
    throw std::invalid_argument("scale_by_scalar_node: scale must have one element, got " + shape_str(s.shape()));
  }
  return mul(x, s);
}

// ---------------------------------------------------------------------------
// unary

Var neg(Var x) {
  return unary("neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var scale(Var x, double c) {
  return unary("scale", x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var add_scalar(Var x, double c) {
  return unary("add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var exp(Var x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double o) { return o; });
}

Var log(Var x) {
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var sigmoid(Var x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double o) { return o * (1.0 - o); });
}

Var tanh(Var x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); }, [](double, double o) { return 1.0 - o * o; });
}

Var softplus(Var x) {
  return unary(
      "softplus", x, [](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
}

Var square(Var x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var clamp(Var x, double lo, double hi) {
  return unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v < lo || v > hi) ? 0.0 : 1.0; });
}

// ---------------------------------------------------------------------------
// structure

Var matmul(Var a, Var b) {
  same_graph(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      if (s == 0.0) continue;
      const double* brow = &bv[p * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * brow[j];
    }
  }
  const std::size_t aid = a.id(), bid = b.id();
  return a.graph().record("matmul", std::move(out), {aid, bid},
                          [aid, bid, m, k, n](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                            const Tensor& x = gr.value(aid);
                            const Tensor& y = gr.value(bid);
                            if (gi[0]) {  // dA = dO . B^T
                              Tensor& g = *gi[0];
                              for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t p = 0; p < k; ++p) {
                                  double s = 0.0;
                                  for (std::size_t j = 0; j < n; ++j) s += go[i * n + j] * y[p * n + j];
                                  g[i * k + p] += s;
                                }
                              }
                            }
                            if (gi[1]) {  // dB = A^T . dO
                              Tensor& g = *gi[1];
                              for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t p = 0; p < k; ++p) {
                                  const double s = x[i * k + p];
                                  if (s == 0.0) continue;
                                  for (std::size_t j = 0; j < n; ++j) g[p * n + j] += s * go[i * n + j];
                                }
                              }
                            }
                          });
}

Var concat(std::span<const Var> xs, std::size_t axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = xs[0].shape();
  split_axis(first, axis, "concat");
  Shape os = first;
  os[axis] = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> lens;
  for (const Var& v : xs) {
    same_graph(xs[0], v, "concat");
    const Shape& s = v.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) ok = false;
    }
    if (!ok) {
      throw std::invalid_argument("concat: shape mismatch " + shape_str(first) + " vs " + shape_str(s) +
                                  " on axis " + std::to_string(axis));
    }
    os[axis] += s[axis];
    ids.push_back(v.id());
    lens.push_back(s[axis]);
  }
  const AxisSplit sp = split_axis(os, axis, "concat");
  Tensor out(os);
  std::size_t off = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const Tensor& v = xs[t].value();
    const std::size_t len = lens[t];
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(&v[o * len * sp.inner], len * sp.inner, &out[(o * sp.len + off) * sp.inner]);
    }
    off += len;
  }
  return xs[0].graph().record("concat", std::move(out), ids,
                              [lens, sp](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                                std::size_t off = 0;
                                for (std::size_t t = 0; t < gi.size(); ++t) {
                                  const std::size_t len = lens[t];
                                  if (gi[t]) {
                                    Tensor& g = *gi[t];
                                    for (std::size_t o = 0; o < sp.outer; ++o) {
                                      for (std::size_t q = 0; q < len * sp.inner; ++q) {
                                        g[o * len * sp.inner + q] += go[(o * sp.len + off) * sp.inner + q];
                                      }
                                    }
                                  }
                                  off += len;
                                }
                              });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  const AxisSplit sp = split_axis(xv.shape(), axis, "slice");
  if (begin >= end || end > sp.len) {
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") invalid for shape " + shape_str(xv.shape()) + " axis " + std::to_string(axis));
  }
  Shape os = xv.shape();
  const std::size_t len = end - begin;
  os[axis] = len;
  Tensor out(os);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(&xv[(o * sp.len + begin) * sp.inner], len * sp.inner, &out[o * len * sp.inner]);
  }
  return x.graph().record("slice", std::move(out), {x.id()},
                          [sp, begin, len](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                            Tensor& g = *gi[0];
                            for (std::size_t o = 0; o < sp.outer; ++o) {
                              for (std::size_t q = 0; q < len * sp.inner; ++q) {
                                g[(o * sp.len + begin) * sp.inner + q] += go[o * len * sp.inner + q];
                              }
                            }
                          });
}

Var rows(Var x, std::span<const std::size_t> indices) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw std::invalid_argument("rows: expected rank-2 input, got " + shape_str(xv.shape()));
  const std::size_t n = xv.dim(0), c = xv.dim(1);
  auto idx = std::make_shared<std::vector<std::size_t>>(indices.begin(), indices.end());
  Tensor out({idx->size(), c});
  for (std::size_t r = 0; r < idx->size(); ++r) {
    if ((*idx)[r] >= n) {
      throw std::invalid_argument("rows: index " + std::to_string((*idx)[r]) + " out of range for shape " +
                                  shape_str(xv.shape()));
    }
    std::copy_n(&xv[(*idx)[r] * c], c, &out[r * c]);
  }
  return x.graph().record("rows", std::move(out), {x.id()},
                          [idx, c](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                            Tensor& g = *gi[0];
                            for (std::size_t r = 0; r < idx->size(); ++r) {
                              for (std::size_t j = 0; j < c; ++j) g[(*idx)[r] * c + j] += go[r * c + j];
                            }
                          });
}

// ---------------------------------------------------------------------------
// reductions

Var sum(Var x) {
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.data()) s += v;
  return x.graph().record("sum", Tensor::scalar(s), {x.id()},
                          [](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                            Tensor& g = *gi[0];
                            for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[0];
                          });
}

Var sum(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisSplit sp = split_axis(xv.shape(), axis, "sum");
  Shape os = xv.shape();
  os[axis] = 1;
  Tensor out(os, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t l = 0; l < sp.len; ++l) {
      for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += xv[(o * sp.len + l) * sp.inner + i];
    }
  }
  return x.graph().record("sum_axis", std::move(out), {x.id()},
                          [sp](const Graph&, const Tensor& go, std::span<Tensor* const> gi) {
                            Tensor& g = *gi[0];
                            for (std::size_t o = 0; o < sp.outer; ++o) {
                              for (std::size_t l = 0; l < sp.len; ++l) {
                                for (std::size_t i = 0; i < sp.inner; ++i) {
                                  g[(o * sp.len + l) * sp.inner + i] += go[o * sp.inner + i];
                                }
                              }
                            }
                          });
}

Var mean(Var x) {
  if (x.size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Var mean(Var x, std::size_t axis) {
  const AxisSplit sp = split_axis(x.shape(), axis, "mean");
  if (sp.len == 0) throw std::invalid_argument("mean: empty axis");
  return scale(sum(x, axis), 1.0 / static_cast<double>(sp.len));
}

Var max(Var x, std::size_t axis) { return reduce_extreme("max", x, axis, Extreme::max); }
Var min(Var x, std::size_t axis) { return reduce_extreme("min", x, axis, Extreme::min); }

Var softmax_axis(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisSplit sp = split_axis(xv.shape(), axis, "softmax");
  Tensor out(xv.shape());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      auto at = [&](std::size_t l) { return (o * sp.len + l) * sp.inner + i; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < sp.len; ++l) mx = std::max(mx, xv[at(l)]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) {
        out[at(l)] = std::exp(xv[at(l)] - mx);
        z += out[at(l)];
      }
      for (std::size_t l = 0; l < sp.len; ++l) out[at(l)] /= z;
    }
  }
  Graph& g = x.graph();
  const std::size_t oid = g.size();
  return g.record("softmax", std::move(out), {x.id()},
                  [sp, oid](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                    const Tensor& p = gr.value(oid);
                    Tensor& g = *gi[0];
                    for (std::size_t o = 0; o < sp.outer; ++o) {
                      for (std::size_t i = 0; i < sp.inner; ++i) {
                        auto at = [&](std::size_t l) { return (o * sp.len + l) * sp.inner + i; };
                        double dot = 0.0;
                        for (std::size_t l = 0; l < sp.len; ++l) dot += go[at(l)] * p[at(l)];
                        for (std::size_t l = 0; l < sp.len; ++l) g[at(l)] += p[at(l)] * (go[at(l)] - dot);
                      }
                    }
                  });
}

Var log_softmax_axis(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisSplit sp = split_axis(xv.shape(), axis, "log_softmax");
  Tensor out(xv.shape());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      auto at = [&](std::size_t l) { return (o * sp.len + l) * sp.inner + i; };
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < sp.len; ++l) mx = std::max(mx, xv[at(l)]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) z += std::exp(xv[at(l)] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t l = 0; l < sp.len; ++l) out[at(l)] = xv[at(l)] - lz;
    }
  }
  Graph& g = x.graph();
  const std::size_t oid = g.size();
  return g.record("log_softmax", std::move(out), {x.id()},
                  [sp, oid](const Graph& gr, const Tensor& go, std::span<Tensor* const> gi) {
                    const Tensor& lp = gr.value(oid);
                    Tensor& g = *gi[0];
                    for (std::size_t o = 0; o < sp.outer; ++o) {
                      for (std::size_t i = 0; i < sp.inner; ++i) {
                        auto at = [&](std::size_t l) { return (o * sp.len + l) * sp.inner + i; };
                        double s = 0.0;
                        for (std::size_t l = 0; l < sp.len; ++l) s += go[at(l)];
                        for (std::size_t l = 0; l < sp.len; ++l) g[at(l)] += go[at(l)] - std::exp(lp[at(l)]) * s;
                      }
                    }
                  });
}

// ---------------------------------------------------------------------------
// gradient check

GradCheckResult grad_check(const LossFn& loss_fn, const std::vector<Tensor>& point, double step, double tol) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");

  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : point) vars.push_back(g.variable(t));
    Var loss = loss_fn(g, vars);
    if (!std::isfinite(loss.item())) throw std::domain_error("grad_check: non-finite loss at the base point");
    g.backward(loss);
    for (const Var& v : vars) analytic.push_back(g.grad(v));
  }

  auto eval = [&](const std::vector<Tensor>& at) {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : at) vars.push_back(g.constant(t));
    return loss_fn(g, vars).item();
  };

  GradCheckResult res;
  std::vector<Tensor> probe = point;
  for (std::size_t t = 0; t < point.size(); ++t) {
    for (std::size_t i = 0; i < point[t].size(); ++i) {
      const double x0 = point[t][i];
      probe[t][i] = x0 + step;
      const double fp = eval(probe);
      probe[t][i] = x0 - step;
      const double fm = eval(probe);
      probe[t][i] = x0;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw std::domain_error("grad_check: non-finite loss probing input " + std::to_string(t) + " coordinate " +
                                std::to_string(i));
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[t][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (err > res.max_rel_error || (t == 0 && i == 0)) {
        res.max_rel_error = err;
        res.worst_input = t;
        res.worst_coord = i;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  res.passed = res.max_rel_error < tol;
  return res;
}

}  // namespace ubant::ad
