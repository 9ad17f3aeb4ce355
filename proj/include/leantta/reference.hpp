#pragma once

#include "leantta/tensor.hpp"

// Plain serial loop implementations of the compute kernels. These are kept
// deliberately naive and separate from the parallel kernels so the two paths
// share no code; tests and the kernel benchmark compare them elementwise.
namespace leantta::ref {

Tensor conv2d_serial(const Tensor& input, const Tensor& weights, const std::vector<float>& bias,
                     int stride, int padding);

Tensor linear_serial(const Tensor& input, const Tensor& weights, const std::vector<float>& bias);

Tensor global_avg_pool_serial(const Tensor& input);

}  // namespace leantta::ref
