#include "native/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "native/error.hpp"

namespace native::ad {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

[[noreturn]] void shape_fail(std::string_view op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

Tape& tape_of(std::string_view op, std::initializer_list<Var> vars) {
  Tape* tape = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) shape_fail(op, "operand is not attached to a tape");
    if (tape == nullptr) tape = v.tape();
    if (v.tape() != tape) shape_fail(op, "operands live on different tapes");
  }
  return *tape;
}

void require_same_shape(std::string_view op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    shape_fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank(std::string_view op, const Var& a, std::size_t rank) {
  if (a.shape().size() != rank) {
    shape_fail(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(a.shape()));
  }
}

// Builds a unary elementwise op from forward f(x) and local derivative
// df(x, y) where y = f(x).
template <class F, class DF>
Var unary(std::string_view op, Var a, F f, DF df) {
  Tape& tape = tape_of(op, {a});
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = f(x[i]);
  const Var inputs[] = {a};
  return tape.record(op, inputs, std::move(out), [df](const VjpContext& ctx) {
    if (Tensor* ga = ctx.in_grad(0)) {
      const Tensor& x = ctx.in(0);
      for (std::size_t i = 0; i < x.numel(); ++i) (*ga)[i] += ctx.grad_out[i] * df(x[i], ctx.out[i]);
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

Shape with_last(const Shape& s, std::size_t last) {
  Shape out = s;
  out.back() = last;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Var / VjpContext / Tape

const Tensor& Var::value() const { return tape_->value(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

const Tensor& VjpContext::in(std::size_t k) const { return tape_.value(inputs_[k]); }

Tensor* VjpContext::in_grad(std::size_t k) const {
  const std::size_t id = inputs_[k];
  if (!tape_.requires_grad(id)) return nullptr;
  return tape_.grad_buffer(id);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("leaf: non-finite value of shape " + shape_str(value.shape()));
  Node node;
  node.op = "leaf";
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, std::span<const Var> inputs, Tensor value, Vjp vjp) {
  if (!value.all_finite()) {
    std::string shapes;
    for (const Var& v : inputs) shapes += shape_str(v.shape());
    throw NumericError(std::string(op) + ": non-finite output (inputs " + shapes + ")");
  }
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape() != this) shape_fail(op, "input belongs to another tape");
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (node.requires_grad) node.vjp = std::move(vjp);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor* Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return &n.grad;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw std::invalid_argument("backward: root belongs to another tape");
  if (root.value().numel() != 1) {
    throw ShapeError("backward: root must be a scalar, got " + shape_str(root.shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  grad_buffer(root.id())->fill(1.0);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.vjp) continue;
    const VjpContext ctx(n.grad, n.value, *this, n.inputs);
    n.vjp(ctx);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (!n.has_grad) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

// ---------------------------------------------------------------------------
// Arithmetic

Var add(Var a, Var b) {
  Tape& tape = tape_of("add", {a, b});
  require_same_shape("add", a, b);
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += y[i];
  const Var inputs[] = {a, b};
  return tape.record("add", inputs, std::move(out), [](const VjpContext& ctx) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor* g = ctx.in_grad(k)) {
        for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += ctx.grad_out[i];
      }
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of("sub", {a, b});
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= y[i];
  const Var inputs[] = {a, b};
  return tape.record("sub", inputs, std::move(out), [](const VjpContext& ctx) {
    if (Tensor* g = ctx.in_grad(0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += ctx.grad_out[i];
    }
    if (Tensor* g = ctx.in_grad(1)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] -= ctx.grad_out[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of("mul", {a, b});
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= y[i];
  const Var inputs[] = {a, b};
  return tape.record("mul", inputs, std::move(out), [](const VjpContext& ctx) {
    const Tensor& x = ctx.in(0);
    const Tensor& y = ctx.in(1);
    if (Tensor* g = ctx.in_grad(0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += ctx.grad_out[i] * y[i];
    }
    if (Tensor* g = ctx.in_grad(1)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += ctx.grad_out[i] * x[i];
    }
  });
}

Var neg(Var a) {
  return unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var scale(Var a, double c) {
  return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary("add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var matmul(Var a, Var b) {
  Tape& tape = tape_of("matmul", {a, b});
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) {
    shape_fail("matmul", "inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor out(Shape{n, m});
  MutMap(out.data().data(), n, m).noalias() =
      ConstMap(a.value().data().data(), n, k) * ConstMap(b.value().data().data(), k, m);
  const Var inputs[] = {a, b};
  return tape.record("matmul", inputs, std::move(out), [n, k, m](const VjpContext& ctx) {
    const ConstMap g(ctx.grad_out.data().data(), n, m);
    if (Tensor* ga = ctx.in_grad(0)) {
      MutMap(ga->data().data(), n, k).noalias() += g * ConstMap(ctx.in(1).data().data(), k, m).transpose();
    }
    if (Tensor* gb = ctx.in_grad(1)) {
      MutMap(gb->data().data(), k, m).noalias() += ConstMap(ctx.in(0).data().data(), n, k).transpose() * g;
    }
  });
}

Var transpose(Var a) {
  Tape& tape = tape_of("transpose", {a});
  require_rank("transpose", a, 2);
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  Tensor out(Shape{m, n});
  MutMap(out.data().data(), m, n) = ConstMap(a.value().data().data(), n, m).transpose();
  const Var inputs[] = {a};
  return tape.record("transpose", inputs, std::move(out), [n, m](const VjpContext& ctx) {
    if (Tensor* g = ctx.in_grad(0)) {
      MutMap(g->data().data(), n, m) += ConstMap(ctx.grad_out.data().data(), m, n).transpose();
    }
  });
}

Var add_bias(Var a, Var bias) {
  Tape& tape = tape_of("add_bias", {a, bias});
  require_rank("add_bias", bias, 1);
  if (a.shape().empty() || a.shape().back() != bias.shape()[0]) {
    shape_fail("add_bias", "cannot broadcast " + shape_str(bias.shape()) + " over " + shape_str(a.shape()));
  }
  Tensor out = a.value();
  const std::size_t rows = out.rows(), cols = out.cols();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += bv[c];
  }
  const Var inputs[] = {a, bias};
  return tape.record("add_bias", inputs, std::move(out), [rows, cols](const VjpContext& ctx) {
    if (Tensor* ga = ctx.in_grad(0)) {
      for (std::size_t i = 0; i < ga->numel(); ++i) (*ga)[i] += ctx.grad_out[i];
    }
    if (Tensor* gb = ctx.in_grad(1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) (*gb)[c] += ctx.grad_out[r * cols + c];
      }
    }
  });
}

Var mul_col(Var a, Var c) {
  Tape& tape = tape_of("mul_col", {a, c});
  const std::size_t rows = a.value().rows(), cols = a.value().cols();
  if (a.shape().empty() || c.value().numel() != rows) {
    shape_fail("mul_col", "row scale " + shape_str(c.shape()) + " does not match " + shape_str(a.shape()));
  }
  Tensor out = a.value();
  const Tensor& s = c.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out.at(r, j) *= s[r];
  }
  const Var inputs[] = {a, c};
  return tape.record("mul_col", inputs, std::move(out), [rows, cols](const VjpContext& ctx) {
    const Tensor& x = ctx.in(0);
    const Tensor& s = ctx.in(1);
    const Tensor& g = ctx.grad_out;
    if (Tensor* ga = ctx.in_grad(0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) (*ga)[r * cols + j] += g[r * cols + j] * s[r];
      }
    }
    if (Tensor* gc = ctx.in_grad(1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += g[r * cols + j] * x[r * cols + j];
        (*gc)[r] += acc;
      }
    }
  });
}

Var div_col(Var a, Var c) {
  Tape& tape = tape_of("div_col", {a, c});
  const std::size_t rows = a.value().rows(), cols = a.value().cols();
  if (a.shape().empty() || c.value().numel() != rows) {
    shape_fail("div_col", "row divisor " + shape_str(c.shape()) + " does not match " + shape_str(a.shape()));
  }
  Tensor out = a.value();
  const Tensor& s = c.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out.at(r, j) /= s[r];
  }
  const Var inputs[] = {a, c};
  return tape.record("div_col", inputs, std::move(out), [rows, cols](const VjpContext& ctx) {
    const Tensor& x = ctx.in(0);
    const Tensor& s = ctx.in(1);
    const Tensor& g = ctx.grad_out;
    if (Tensor* ga = ctx.in_grad(0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) (*ga)[r * cols + j] += g[r * cols + j] / s[r];
      }
    }
    if (Tensor* gc = ctx.in_grad(1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += g[r * cols + j] * x[r * cols + j];
        (*gc)[r] -= acc / (s[r] * s[r]);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Structural

Var concat(std::span<const Var> parts) {
  if (parts.empty()) shape_fail("concat", "no operands");
  Tape* tape = parts[0].tape();
  const Shape& first = parts[0].shape();
  if (first.empty()) shape_fail("concat", "scalar operand");
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.tape() != tape) shape_fail("concat", "operands live on different tapes");
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin())) {
      shape_fail("concat", "leading dims differ " + shape_str(first) + " vs " + shape_str(s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  Tensor out(with_last(first, total));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.row(r).begin(), widths[p], out.row(r).begin() + offset);
    }
    offset += widths[p];
  }
  return tape->record("concat", parts, std::move(out), [widths, rows, total](const VjpContext& ctx) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      if (Tensor* g = ctx.in_grad(p)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < widths[p]; ++j) {
            (*g)[r * widths[p] + j] += ctx.grad_out[r * total + offset + j];
          }
        }
      }
      offset += widths[p];
    }
  });
}

std::vector<Var> split(Var a, std::span<const std::size_t> sizes) {
  Tape& tape = tape_of("split", {a});
  if (a.shape().empty()) shape_fail("split", "scalar operand");
  const std::size_t total = a.shape().back();
  if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != total) {
    shape_fail("split", "sizes do not sum to last dim of " + shape_str(a.shape()));
  }
  const std::size_t rows = a.value().rows();
  std::vector<Var> pieces;
  std::size_t offset = 0;
  for (std::size_t w : sizes) {
    Tensor out(with_last(a.shape(), w));
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(a.value().row(r).begin() + offset, w, out.row(r).begin());
    }
    const Var inputs[] = {a};
    pieces.push_back(tape.record("split", inputs, std::move(out), [rows, total, offset, w](const VjpContext& ctx) {
      if (Tensor* g = ctx.in_grad(0)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < w; ++j) (*g)[r * total + offset + j] += ctx.grad_out[r * w + j];
        }
      }
    }));
    offset += w;
  }
  return pieces;
}

Var reshape(Var a, Shape shape) {
  Tape& tape = tape_of("reshape", {a});
  Tensor out = a.value().reshaped(std::move(shape));
  const Var inputs[] = {a};
  return tape.record("reshape", inputs, std::move(out), [](const VjpContext& ctx) {
    if (Tensor* g = ctx.in_grad(0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += ctx.grad_out[i];
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  Tape& tape = tape_of("gather_rows", {a});
  if (a.shape().empty()) shape_fail("gather_rows", "scalar operand");
  const std::size_t n = a.shape()[0];
  const std::size_t width = n == 0 ? 0 : a.value().numel() / n;
  Shape out_shape = a.shape();
  out_shape[0] = index.size();
  Tensor out(out_shape);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) {
      shape_fail("gather_rows", "index " + std::to_string(index[i]) + " out of range for " + shape_str(a.shape()));
    }
    std::copy_n(a.value().data().begin() + index[i] * width, width, out.data().begin() + i * width);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const Var inputs[] = {a};
  return tape.record("gather_rows", inputs, std::move(out), [idx = std::move(idx), width](const VjpContext& ctx) {
    if (Tensor* g = ctx.in_grad(0)) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < width; ++j) (*g)[idx[i] * width + j] += ctx.grad_out[i * width + j];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var log_sigmoid(Var a) {
  return unary("log_sigmoid", a, stable_log_sigmoid, [](double x, double) { return stable_sigmoid(-x); });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var softmax(Var a) {
  Tape& tape = tape_of("softmax", {a});
  if (a.shape().empty()) shape_fail("softmax", "scalar operand");
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto in = x.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < cols; ++j) o[j] /= total;
  }
  const Var inputs[] = {a};
  return tape.record("softmax", inputs, std::move(out), [rows, cols](const VjpContext& ctx) {
    if (Tensor* g = ctx.in_grad(0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const auto y = ctx.out.row(r);
        const auto go = ctx.grad_out.row(r);
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += go[j] * y[j];
        auto gi = g->row(r);
        for (std::size_t j = 0; j < cols; ++j) gi[j] += y[j] * (go[j] - dot);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var norm(Var a) {
  Tape& tape = tape_of("norm", {a});
  double ss = 0.0;
  for (double v : a.value().data()) ss += v * v;
  const Var inputs[] = {a};
  return tape.record("norm", inputs, Tensor::scalar(std::sqrt(ss)), [](const VjpContext& ctx) {
    Tensor* g = ctx.in_grad(0);
    const double n = ctx.out.item();
    if (g == nullptr || n == 0.0) return;
    const double s = ctx.grad_out.item() / n;
    const Tensor& x = ctx.in(0);
    for (std::size_t i = 0; i < x.numel(); ++i) (*g)[i] += s * x[i];
  });
}

Var row_norm(Var a, double eps) {
  Tape& tape = tape_of("row_norm", {a});
  if (a.shape().empty()) shape_fail("row_norm", "scalar operand");
  if (eps < 0.0) shape_fail("row_norm", "negative eps");
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = eps;
    for (double v : x.row(r)) ss += v * v;
    out[r] = std::sqrt(ss);
  }
  const Var inputs[] = {a};
  return tape.record("row_norm", inputs, std::move(out), [rows, cols](const VjpContext& ctx) {
    Tensor* g = ctx.in_grad(0);
    if (g == nullptr) return;
    const Tensor& x = ctx.in(0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double n = ctx.out[r];
      if (n == 0.0) continue;
      const double s = ctx.grad_out[r] / n;
      for (std::size_t j = 0; j < cols; ++j) (*g)[r * cols + j] += s * x[r * cols + j];
    }
  });
}

Var sum(Var a) {
  Tape& tape = tape_of("sum", {a});
  const auto d = a.value().data();
  const Var inputs[] = {a};
  return tape.record("sum", inputs, Tensor::scalar(std::accumulate(d.begin(), d.end(), 0.0)),
                     [](const VjpContext& ctx) {
                       if (Tensor* g = ctx.in_grad(0)) {
                         const double s = ctx.grad_out.item();
                         for (double& v : g->data()) v += s;
                       }
                     });
}

Var mean(Var a) {
  const std::size_t n = a.value().numel();
  if (n == 0) shape_fail("mean", "empty operand");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum_rows(Var a) {
  Tape& tape = tape_of("sum_rows", {a});
  if (a.shape().empty()) shape_fail("sum_rows", "scalar operand");
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = x.row(r);
    out[r] = std::accumulate(row.begin(), row.end(), 0.0);
  }
  const Var inputs[] = {a};
  return tape.record("sum_rows", inputs, std::move(out), [rows, cols](const VjpContext& ctx) {
    if (Tensor* g = ctx.in_grad(0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) (*g)[r * cols + j] += ctx.grad_out[r];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Complex rotation

Var rotate(Var h, Var theta) {
  Tape& tape = tape_of("rotate", {h, theta});
  if (h.shape().empty() || theta.shape().empty()) shape_fail("rotate", "scalar operand");
  const std::size_t d = h.shape().back();
  if (d % 2 != 0) shape_fail("rotate", "odd embedding width " + shape_str(h.shape()));
  const std::size_t half = d / 2;
  const std::size_t rows = h.value().rows();
  if (theta.shape().back() != half || theta.value().rows() != rows) {
    shape_fail("rotate", "phases " + shape_str(theta.shape()) + " do not match " + shape_str(h.shape()));
  }
  const Tensor& x = h.value();
  const Tensor& th = theta.value();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto in = x.row(r);
    const auto ph = th.row(r);
    auto o = out.row(r);
    for (std::size_t k = 0; k < half; ++k) {
      const double c = std::cos(ph[k]), s = std::sin(ph[k]);
      o[k] = in[k] * c - in[k + half] * s;
      o[k + half] = in[k] * s + in[k + half] * c;
    }
  }
  const Var inputs[] = {h, theta};
  return tape.record("rotate", inputs, std::move(out), [rows, half](const VjpContext& ctx) {
    Tensor* gh = ctx.in_grad(0);
    Tensor* gt = ctx.in_grad(1);
    const Tensor& th = ctx.in(1);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto go = ctx.grad_out.row(r);
      const auto o = ctx.out.row(r);
      const auto ph = th.row(r);
      for (std::size_t k = 0; k < half; ++k) {
        const double c = std::cos(ph[k]), s = std::sin(ph[k]);
        if (gh) {
          auto g = gh->row(r);
          g[k] += go[k] * c + go[k + half] * s;
          g[k + half] += -go[k] * s + go[k + half] * c;
        }
        if (gt) gt->row(r)[k] += -go[k] * o[k + half] + go[k + half] * o[k];
      }
    }
  });
}

// ---------------------------------------------------------------------------

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");

  auto eval = [&](const Tensor& at) {
    Tape tape;
    Var y = f(tape, tape.leaf(at, false));
    if (y.value().numel() != 1) throw ShapeError("grad_check: function is not scalar-valued");
    return y.value().item();
  };

  Tensor analytic;
  {
    Tape tape;
    Var xv = tape.leaf(x);
    Var y = f(tape, xv);
    tape.backward(y);
    analytic = tape.grad(xv);
  }

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    probe[i] = x[i] + eps;
    const double up = eval(probe);
    probe[i] = x[i] - eps;
    const double down = eval(probe);
    probe[i] = x[i];
    const double fd = (up - down) / (2.0 * eps);
    if (!std::isfinite(fd)) throw NumericError("grad_check: non-finite function value near x");
    worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

}  // namespace native::ad
