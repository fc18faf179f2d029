#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "native/tensor.hpp"

namespace native {

// Bias-corrected Adam moments for one parameter group.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState for_params(std::span<Tensor* const> params);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One Adam update in place. Throws NumericError naming the group index when
// a gradient is non-finite (parameters are left untouched) and ShapeError
// when a gradient or moment does not match its parameter.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr);

}  // namespace native
