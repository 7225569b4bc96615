#pragma once

// Minimal define-by-run reverse-mode automatic differentiation over dense
// row-major double tensors.
//
// A Graph is a tape: every op appends a node holding its output value and a
// closure that pushes the output gradient back onto its inputs. Because nodes
// are appended in evaluation order, reverse tape order is a valid topological
// order for the backward sweep.
//
// A Graph is confined to one thread. Tensors are plain values and may be
// moved freely once the graph that produced them is done.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ubant::ad {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }
  // Row-major 2-D access.
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_.back() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_.back() + c]; }

  // Value of a single-element tensor.
  double item() const;

  void fill(double v);
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid as long as its Graph is.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }
  std::size_t id() const { return id_; }
  Graph& graph() const { return *graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Receives the output gradient and the (possibly null) gradient accumulators
// of the node's inputs, in input order.
using BackwardFn =
    std::function<void(const Graph&, const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);

  // Appends an op node. `backward` may be empty when no input requires grad.
  Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  // Reverse sweep from a single-element root. Resets all previous gradients.
  void backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient of the last backward root wrt node `v`; zeros if it never received one.
  Tensor grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  const char* op_name(std::size_t id) const { return nodes_[id].op; }

 private:
  struct Node {
    const char* op = "leaf";
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---- elementwise binary ops (numpy-style broadcasting on equal ranks, or
// ---- against any single-element operand) ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

// x scaled by a single-element node s.
Var scale_by_scalar_node(Var x, Var s);

// ---- unary ----
Var neg(Var x);
Var scale(Var x, double c);
Var add_scalar(Var x, double c);
Var exp(Var x);
Var log(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var softplus(Var x);
Var square(Var x);
// Gradient is zero where the input lies outside [lo, hi].
Var clamp(Var x, double lo, double hi);

// ---- linear algebra / structure ----
Var matmul(Var a, Var b);  // [m,k] x [k,n]
Var concat(std::span<const Var> xs, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
// Selects rows of a rank-2 tensor (gather along axis 0); repeats allowed.
Var rows(Var x, std::span<const std::size_t> indices);

// ---- reductions ----
Var sum(Var x);                    // -> [1]
Var sum(Var x, std::size_t axis);  // keeps the axis with size 1
Var mean(Var x);
Var mean(Var x, std::size_t axis);
Var max(Var x, std::size_t axis);  // gradient to first maximal entry
Var min(Var x, std::size_t axis);

// Stable (max-shifted) softmax / log-softmax along `axis`.
Var softmax_axis(Var x, std::size_t axis);
Var log_softmax_axis(Var x, std::size_t axis);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var x) { return scale(x, c); }
inline Var operator*(Var x, double c) { return scale(x, c); }

// ---- finite-difference gradient checker ----

using LossFn = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool passed = false;
};

// Compares backprop gradients with central differences at `point`:
// max over coordinates of |analytic - numeric| / max(1, |analytic|).
// Throws std::domain_error naming the coordinate if the loss is non-finite
// at any probe.
GradCheckResult grad_check(const LossFn& loss_fn, const std::vector<Tensor>& point,
                           double step = 1e-6, double tol = 1e-4);

}  // namespace ubant::ad
