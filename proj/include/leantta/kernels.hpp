#pragma once

#include <cstdint>

#include "leantta/tensor.hpp"

namespace leantta {

// Deterministic operation counters. Counts are derived from shapes, so two
// runs over the same model and input always agree regardless of threading.
struct OpCounts {
    std::uint64_t float_mults = 0;
    std::uint64_t int_mults = 0;
    std::uint64_t dequant_events = 0;
    std::uint64_t requant_events = 0;

    OpCounts& operator+=(const OpCounts& o) {
        float_mults += o.float_mults;
        int_mults += o.int_mults;
        dequant_events += o.dequant_events;
        requant_events += o.requant_events;
        return *this;
    }
    bool operator==(const OpCounts&) const = default;
};

// Cross-correlation over NCHW input with OIHW weights. Accumulation is done
// in double per output element; each element is owned by one loop iteration,
// so results are bitwise identical for any thread count.
Tensor conv2d(const Tensor& input, const Tensor& weights, const std::vector<float>& bias,
              int stride, int padding, OpCounts* counts = nullptr);

// Row-wise affine map: (N, F_in) x (F_out, F_in)^T + bias.
Tensor linear(const Tensor& input, const Tensor& weights, const std::vector<float>& bias,
              OpCounts* counts = nullptr);

Tensor relu(const Tensor& input, OpCounts* counts = nullptr);

// (N, C, H, W) -> (N, C) mean over the spatial extent.
Tensor global_avg_pool(const Tensor& input, OpCounts* counts = nullptr);

Tensor residual_add(const Tensor& a, const Tensor& b, OpCounts* counts = nullptr);

// Output spatial extent for one conv axis; throws Error(Config) when the
// stride does not divide evenly.
std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, int stride, int padding);

}  // namespace leantta
