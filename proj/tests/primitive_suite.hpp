#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "native/autodiff.hpp"

namespace native::testing {

inline Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Worst finite-difference error per primitive over `trials` random inputs.
// Each op output is contracted with fixed random weights so every output
// coordinate carries a distinct cotangent; binary ops are checked in each
// operand.
inline std::map<std::string, double> primitive_fd_errors(std::uint64_t seed, int trials, double eps = 1e-5) {
  using namespace native::ad;
  std::mt19937_64 rng(seed);
  std::map<std::string, double> worst;
  auto note = [&](const std::string& name, double err) { worst[name] = std::max(worst[name], err); };
  auto weighted_sum = [](Tape& tape, Var y, const Tensor& w) { return sum(mul(y, tape.constant(w))); };

  for (int trial = 0; trial < trials; ++trial) {
    const Tensor w = random_tensor(rng, {3, 4});
    const Tensor other = random_tensor(rng, {3, 4});
    const Tensor x = random_tensor(rng, {3, 4});

    const std::vector<std::pair<std::string, std::function<Var(Var)>>> unaries = {
        {"exp", [](Var v) { return exp(v); }},
        {"tanh", [](Var v) { return tanh(v); }},
        {"relu", [](Var v) { return relu(v); }},
        {"sigmoid", [](Var v) { return sigmoid(v); }},
        {"log_sigmoid", [](Var v) { return log_sigmoid(v); }},
        {"softmax", [](Var v) { return softmax(v); }},
        {"neg", [](Var v) { return neg(v); }},
        {"scale", [](Var v) { return scale(v, -1.7); }},
        {"add_scalar", [](Var v) { return add_scalar(v, 0.3); }},
        {"square", [](Var v) { return square(v); }},
        {"clamp", [](Var v) { return clamp(v, -1.0, 1.0); }},
        {"reshape", [](Var v) { return reshape(v, Shape{4, 3}); }},
    };
    for (const auto& [name, op] : unaries) {
      note(name, grad_check([&](Tape& t, Var v) { return weighted_sum(t, reshape(op(v), Shape{3, 4}), w); }, x, eps));
    }
    {
      Tensor pos = x;
      for (double& v : pos.data()) v = std::abs(v) + 0.5;
      note("log", grad_check([&](Tape& t, Var v) { return weighted_sum(t, log(v), w); }, pos, eps));
    }

    const std::vector<std::pair<std::string, std::function<Var(Var, Var)>>> binaries = {
        {"add", [](Var a, Var b) { return add(a, b); }},
        {"sub", [](Var a, Var b) { return sub(a, b); }},
        {"mul", [](Var a, Var b) { return mul(a, b); }},
    };
    for (const auto& [name, op] : binaries) {
      note(name, grad_check([&](Tape& t, Var v) { return weighted_sum(t, op(v, t.constant(other)), w); }, x, eps));
      note(name, grad_check([&](Tape& t, Var v) { return weighted_sum(t, op(t.constant(other), v), w); }, x, eps));
    }

    note("norm", grad_check([](Tape&, Var v) { return norm(v); }, x, eps));
    note("sum", grad_check([&](Tape& t, Var v) { return sum(mul(v, t.constant(w))); }, x, eps));
    note("mean", grad_check([](Tape&, Var v) { return mean(v); }, x, eps));
    {
      const Tensor wr = random_tensor(rng, {3});
      note("row_norm", grad_check([&](Tape& t, Var v) { return weighted_sum(t, row_norm(v), wr); }, x, eps));
      note("row_norm", grad_check([&](Tape& t, Var v) { return weighted_sum(t, row_norm(v, 1e-3), wr); }, x, eps));
      note("sum_rows", grad_check([&](Tape& t, Var v) { return weighted_sum(t, sum_rows(v), wr); }, x, eps));
    }
    {
      const Tensor b = random_tensor(rng, {4, 2});
      const Tensor wm = random_tensor(rng, {3, 2});
      note("matmul", grad_check([&](Tape& t, Var v) { return weighted_sum(t, matmul(v, t.constant(b)), wm); }, x, eps));
      note("matmul", grad_check([&](Tape& t, Var v) { return weighted_sum(t, matmul(t.constant(x), v), wm); }, b, eps));
      const Tensor wt = random_tensor(rng, {4, 3});
      note("transpose", grad_check([&](Tape& t, Var v) { return weighted_sum(t, transpose(v), wt); }, x, eps));
    }
    {
      const Tensor bias = random_tensor(rng, {4});
      const Tensor col = random_tensor(rng, {3}, 0.5, 2.0);
      note("add_bias", grad_check([&](Tape& t, Var v) { return weighted_sum(t, add_bias(t.constant(x), v), w); }, bias, eps));
      note("add_bias", grad_check([&](Tape& t, Var v) { return weighted_sum(t, add_bias(v, t.constant(bias)), w); }, x, eps));
      note("mul_col", grad_check([&](Tape& t, Var v) { return weighted_sum(t, mul_col(t.constant(x), v), w); }, col, eps));
      note("mul_col", grad_check([&](Tape& t, Var v) { return weighted_sum(t, mul_col(v, t.constant(col)), w); }, x, eps));
      note("div_col", grad_check([&](Tape& t, Var v) { return weighted_sum(t, div_col(t.constant(x), v), w); }, col, eps));
      note("div_col", grad_check([&](Tape& t, Var v) { return weighted_sum(t, div_col(v, t.constant(col)), w); }, x, eps));
    }
    {
      const Tensor y = random_tensor(rng, {3, 2});
      const Tensor wc = random_tensor(rng, {3, 6});
      note("concat", grad_check([&](Tape& t, Var v) {
             const Var parts[] = {t.constant(y), v};
             return weighted_sum(t, concat(parts), wc);
           }, x, eps));
      const std::size_t sizes[] = {1, 3};
      const Tensor w1 = random_tensor(rng, {3, 1});
      note("split", grad_check([&](Tape& t, Var v) {
             auto pieces = split(v, sizes);
             return add(weighted_sum(t, pieces[0], w1), sum(square(pieces[1])));
           }, x, eps));
      const std::size_t idx[] = {2, 0, 2, 1, 2};
      const Tensor wg = random_tensor(rng, {5, 4});
      note("gather_rows", grad_check([&](Tape& t, Var v) { return weighted_sum(t, gather_rows(v, idx), wg); }, x, eps));
    }
    {
      const Tensor theta = random_tensor(rng, {3, 2});
      note("rotate", grad_check([&](Tape& t, Var v) { return weighted_sum(t, rotate(v, t.constant(theta)), w); }, x, eps));
      note("rotate", grad_check([&](Tape& t, Var v) { return weighted_sum(t, rotate(t.constant(x), v), w); }, theta, eps));
    }
  }
  return worst;
}

}  // namespace native::testing
