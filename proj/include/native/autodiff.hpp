#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "native/tensor.hpp"

namespace native::ad {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// What a vector-Jacobian product sees when it runs. `in_grad(k)` is null
// when input k does not require a gradient; otherwise it points at the
// accumulation buffer (zero-initialized on first touch).
class VjpContext {
 public:
  const Tensor& grad_out;
  const Tensor& out;

  const Tensor& in(std::size_t k) const;
  Tensor* in_grad(std::size_t k) const;

 private:
  friend class Tape;
  VjpContext(const Tensor& g, const Tensor& o, Tape& tape, std::span<const std::size_t> inputs)
      : grad_out(g), out(o), tape_(tape), inputs_(inputs) {}

  Tape& tape_;
  std::span<const std::size_t> inputs_;
};

using Vjp = std::function<void(const VjpContext&)>;

// Reverse-mode computation graph. Nodes are appended in evaluation order, so
// insertion order is a valid topological order and backward() is a single
// reverse sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf holding a parameter; its gradient is collected by backward().
  Var leaf(Tensor value, bool requires_grad = true);
  // Leaf that never receives a gradient.
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Appends an op node. Checks that every input belongs to this tape and
  // that the forward value is finite.
  Var record(std::string_view op, std::span<const Var> inputs, Tensor value, Vjp vjp);

  // Sweeps the tape backwards from a scalar root. Gradients from an earlier
  // call are cleared first.
  void backward(Var root);

  // Gradient of the root w.r.t. `v`; an all-zero tensor of v's shape when v
  // was not reached.
  Tensor grad(Var v) const;

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  std::string_view op(std::size_t id) const { return nodes_[id].op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

 private:
  friend class VjpContext;

  struct Node {
    std::string_view op;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    Vjp vjp;
    Tensor grad;
    bool has_grad = false;
  };

  Tensor* grad_buffer(std::size_t id);

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Primitive ops. Every op checks its operand shapes (ShapeError naming the op)
// and defines an exact vector-Jacobian product. "Last axis" ops view a tensor
// as [rows, cols] with cols = size of the last dimension.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var square(Var a);

// a: [n, k], b: [k, m] -> [n, m]
Var matmul(Var a, Var b);
// a: [n, m] -> [m, n]
Var transpose(Var a);
// a: [..., d] + bias: [d], broadcast over rows.
Var add_bias(Var a, Var bias);
// a: [n, d] scaled row-wise by c (numel n).
Var mul_col(Var a, Var c);
// a: [n, d] divided row-wise by c (numel n).
Var div_col(Var a, Var c);

Var concat(std::span<const Var> parts);
std::vector<Var> split(Var a, std::span<const std::size_t> sizes);
Var reshape(Var a, Shape shape);
// Rows of `a` (viewed along the first axis) picked by index; repeats allowed.
Var gather_rows(Var a, std::span<const std::size_t> index);

Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
// log(sigmoid(x)) evaluated without overflow.
Var log_sigmoid(Var a);
Var softmax(Var a);
Var clamp(Var a, double lo, double hi);

// L2 norm of all elements -> scalar. The subgradient at 0 is taken as 0.
Var norm(Var a);
// sqrt(sum_j a_ij^2 + eps) per row -> [rows]. eps = 0 gives the plain norm.
Var row_norm(Var a, double eps = 0.0);
Var sum(Var a);
Var mean(Var a);
// Sum over the last axis -> [rows].
Var sum_rows(Var a);

// Elementwise complex rotation. h: [n, d] holds d/2 complex numbers per row
// (real parts first, imaginary parts second); theta: [n, d/2] phases.
Var rotate(Var h, Var theta);

// ---------------------------------------------------------------------------

using ScalarFn = std::function<Var(Tape&, Var)>;

// Max over coordinates of |analytic - central difference| /
// max(1, |central difference|). eps must lie in [1e-7, 1e-3].
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

}  // namespace native::ad
