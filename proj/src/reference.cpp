#include "leantta/reference.hpp"

namespace leantta::ref {

Tensor conv2d_serial(const Tensor& input, const Tensor& weights, const std::vector<float>& bias,
                     int stride, int padding) {
    const std::int64_t n_batch = input.dim(0), c_in = input.dim(1);
    const std::int64_t h_in = input.dim(2), w_in = input.dim(3);
    const std::int64_t c_out = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
    const std::int64_t h_out = (h_in + 2 * padding - kh) / stride + 1;
    const std::int64_t w_out = (w_in + 2 * padding - kw) / stride + 1;

    Tensor out = Tensor::zeros({n_batch, c_out, h_out, w_out});
    for (std::int64_t n = 0; n < n_batch; ++n)
        for (std::int64_t co = 0; co < c_out; ++co)
            for (std::int64_t oy = 0; oy < h_out; ++oy)
                for (std::int64_t ox = 0; ox < w_out; ++ox) {
                    double acc = bias[static_cast<std::size_t>(co)];
                    for (std::int64_t ci = 0; ci < c_in; ++ci)
                        for (std::int64_t ky = 0; ky < kh; ++ky)
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                std::int64_t y = oy * stride + ky - padding;
                                std::int64_t x = ox * stride + kx - padding;
                                if (y < 0 || y >= h_in || x < 0 || x >= w_in) continue;
                                acc += static_cast<double>(input.at(n, ci, y, x)) *
                                       static_cast<double>(weights.at(co, ci, ky, kx));
                            }
                    out.at(n, co, oy, ox) = static_cast<float>(acc);
                }
    return out;
}

Tensor linear_serial(const Tensor& input, const Tensor& weights, const std::vector<float>& bias) {
    const std::int64_t n_batch = input.dim(0), f_in = input.dim(1);
    const std::int64_t f_out = weights.dim(0);
    Tensor out = Tensor::zeros({n_batch, f_out});
    for (std::int64_t n = 0; n < n_batch; ++n)
        for (std::int64_t fo = 0; fo < f_out; ++fo) {
            double acc = bias[static_cast<std::size_t>(fo)];
            for (std::int64_t fi = 0; fi < f_in; ++fi) {
                acc += static_cast<double>(input.at(n, fi)) * static_cast<double>(weights.at(fo, fi));
            }
            out.at(n, fo) = static_cast<float>(acc);
        }
    return out;
}

Tensor global_avg_pool_serial(const Tensor& input) {
    const std::int64_t n_batch = input.dim(0), c = input.dim(1);
    const std::int64_t h = input.dim(2), w = input.dim(3);
    Tensor out = Tensor::zeros({n_batch, c});
    for (std::int64_t n = 0; n < n_batch; ++n)
        for (std::int64_t ci = 0; ci < c; ++ci) {
            double acc = 0.0;
            for (std::int64_t y = 0; y < h; ++y)
                for (std::int64_t x = 0; x < w; ++x) acc += input.at(n, ci, y, x);
            out.at(n, ci) = static_cast<float>(acc / static_cast<double>(h * w));
        }
    return out;
}

}  // namespace leantta::ref
