#include "leantta/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace leantta {

std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, int stride, int padding) {
    if (stride < 1) throw_config("conv stride must be >= 1");
    if (padding < 0) throw_config("conv padding must be >= 0");
    std::int64_t span = in + 2 * padding - kernel;
    if (span < 0) throw_config("conv kernel larger than padded input");
    if (span % stride != 0) {
        throw_config("conv output extent is not integral: (" + std::to_string(in) + " + 2*" +
                     std::to_string(padding) + " - " + std::to_string(kernel) + ") % " +
                     std::to_string(stride) + " != 0");
    }
    return span / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weights, const std::vector<float>& bias,
              int stride, int padding, OpCounts* counts) {
    if (input.rank() != 4) throw_shape("conv2d input must be rank 4, got " + input.shape_str());
    if (weights.rank() != 4) throw_shape("conv2d weights must be rank 4, got " + weights.shape_str());
    const std::int64_t n_batch = input.dim(0), c_in = input.dim(1);
    const std::int64_t h_in = input.dim(2), w_in = input.dim(3);
    const std::int64_t c_out = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
    if (weights.dim(1) != c_in) {
        throw_shape("conv2d channel mismatch: input C=" + std::to_string(c_in) +
                    ", weights expect C=" + std::to_string(weights.dim(1)));
    }
    if (static_cast<std::int64_t>(bias.size()) != c_out) {
        throw_shape("conv2d bias length " + std::to_string(bias.size()) +
                    " != output channels " + std::to_string(c_out));
    }
    const std::int64_t h_out = conv_out_extent(h_in, kh, stride, padding);
    const std::int64_t w_out = conv_out_extent(w_in, kw, stride, padding);

    Tensor out = Tensor::zeros({n_batch, c_out, h_out, w_out});
    const float* in_p = input.data();
    const float* wt_p = weights.data();
    float* out_p = out.data();

    const std::int64_t out_plane = h_out * w_out;
    const std::int64_t total = n_batch * c_out * out_plane;

#pragma omp parallel for schedule(static)
    for (std::int64_t idx = 0; idx < total; ++idx) {
        const std::int64_t n = idx / (c_out * out_plane);
        const std::int64_t co = (idx / out_plane) % c_out;
        const std::int64_t oy = (idx % out_plane) / w_out;
        const std::int64_t ox = idx % w_out;

        double acc = 0.0;
        for (std::int64_t ci = 0; ci < c_in; ++ci) {
            const float* in_ch = in_p + (n * c_in + ci) * h_in * w_in;
            const float* wt_ch = wt_p + (co * c_in + ci) * kh * kw;
            for (std::int64_t ky = 0; ky < kh; ++ky) {
                const std::int64_t y = oy * stride + ky - padding;
                if (y < 0 || y >= h_in) continue;
                for (std::int64_t kx = 0; kx < kw; ++kx) {
                    const std::int64_t x = ox * stride + kx - padding;
                    if (x < 0 || x >= w_in) continue;
                    acc += static_cast<double>(in_ch[y * w_in + x]) *
                           static_cast<double>(wt_ch[ky * kw + kx]);
                }
            }
        }
        out_p[idx] = static_cast<float>(acc + static_cast<double>(bias[static_cast<std::size_t>(co)]));
    }

    if (counts) {
        counts->float_mults += static_cast<std::uint64_t>(total) *
                               static_cast<std::uint64_t>(c_in * kh * kw);
    }
    return out;
}

Tensor linear(const Tensor& input, const Tensor& weights, const std::vector<float>& bias,
              OpCounts* counts) {
    if (input.rank() != 2) throw_shape("linear input must be rank 2, got " + input.shape_str());
    if (weights.rank() != 2) throw_shape("linear weights must be rank 2, got " + weights.shape_str());
    const std::int64_t n_batch = input.dim(0), f_in = input.dim(1);
    const std::int64_t f_out = weights.dim(0);
    if (weights.dim(1) != f_in) {
        throw_shape("linear feature mismatch: input F=" + std::to_string(f_in) +
                    ", weights expect F=" + std::to_string(weights.dim(1)));
    }
    if (static_cast<std::int64_t>(bias.size()) != f_out) {
        throw_shape("linear bias length " + std::to_string(bias.size()) +
                    " != output features " + std::to_string(f_out));
    }

    Tensor out = Tensor::zeros({n_batch, f_out});
    const float* in_p = input.data();
    const float* wt_p = weights.data();
    float* out_p = out.data();
    const std::int64_t total = n_batch * f_out;

#pragma omp parallel for schedule(static)
    for (std::int64_t idx = 0; idx < total; ++idx) {
        const std::int64_t n = idx / f_out;
        const std::int64_t fo = idx % f_out;
        double acc = static_cast<double>(bias[static_cast<std::size_t>(fo)]);
        const float* row = in_p + n * f_in;
        const float* wrow = wt_p + fo * f_in;
        for (std::int64_t fi = 0; fi < f_in; ++fi) {
            acc += static_cast<double>(row[fi]) * static_cast<double>(wrow[fi]);
        }
        out_p[idx] = static_cast<float>(acc);
    }

    if (counts) {
        counts->float_mults += static_cast<std::uint64_t>(total) * static_cast<std::uint64_t>(f_in);
    }
    return out;
}

Tensor relu(const Tensor& input, OpCounts*) {
    Tensor out = input;
    float* p = out.data();
    const std::int64_t n = out.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        p[i] = p[i] > 0.0f ? p[i] : 0.0f;
    }
    return out;
}

Tensor global_avg_pool(const Tensor& input, OpCounts* counts) {
    if (input.rank() != 4) {
        throw_shape("global_avg_pool input must be rank 4, got " + input.shape_str());
    }
    const std::int64_t n_batch = input.dim(0), c = input.dim(1);
    const std::int64_t plane = input.dim(2) * input.dim(3);
    Tensor out = Tensor::zeros({n_batch, c});
    const float* in_p = input.data();
    float* out_p = out.data();
    const std::int64_t total = n_batch * c;

#pragma omp parallel for schedule(static)
    for (std::int64_t idx = 0; idx < total; ++idx) {
        const float* src = in_p + idx * plane;
        double acc = 0.0;
        for (std::int64_t i = 0; i < plane; ++i) acc += static_cast<double>(src[i]);
        out_p[idx] = static_cast<float>(acc / static_cast<double>(plane));
    }

    if (counts) counts->float_mults += static_cast<std::uint64_t>(total);
    return out;
}

Tensor residual_add(const Tensor& a, const Tensor& b, OpCounts*) {
    if (!a.same_shape(b)) {
        throw_shape("residual_add shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor out = a;
    float* p = out.data();
    const float* q = b.data();
    const std::int64_t n = out.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) p[i] += q[i];
    return out;
}

}  // namespace leantta
