#include "leantta/bench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>
#include <omp.h>

#include "leantta/rng.hpp"

namespace leantta::bench {

using json = nlohmann::json;

// --- synthetic data ----------------------------------------------------------

shift::LabeledDataset make_gaussian_clusters(int n, int dim, const std::vector<double>& levels,
                                             double sigma, std::uint64_t seed) {
    if (n < 1 || dim < 1) throw_config("cluster dataset needs n >= 1 and dim >= 1");
    if (levels.size() < 2) throw_config("cluster dataset needs at least two class levels");
    const int classes = static_cast<int>(levels.size());
    const double unit = 1.0 / std::sqrt(static_cast<double>(dim));

    Rng rng(mix_seed(seed, 0xDA7A5E7ULL));
    shift::LabeledDataset ds;
    ds.class_count = classes;
    ds.inputs.reserve(static_cast<std::size_t>(n));
    ds.labels.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int y = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(classes)));
        std::vector<float> x(static_cast<std::size_t>(dim));
        for (int j = 0; j < dim; ++j) {
            x[static_cast<std::size_t>(j)] =
                static_cast<float>(levels[static_cast<std::size_t>(y)] * unit +
                                   sigma * rng.next_normal());
        }
        ds.inputs.emplace_back(std::vector<std::int64_t>{dim}, std::move(x));
        ds.labels.push_back(static_cast<std::uint16_t>(y));
    }
    return ds;
}

shift::LabeledDataset make_pattern_images(int n, int classes, int hw, double contrast, double sigma,
                                          std::uint64_t seed) {
    if (n < 1 || hw < 4) throw_config("pattern dataset needs n >= 1 and hw >= 4");
    if (classes < 2 || classes > 3) throw_config("pattern dataset supports 2 or 3 classes");

    Rng rng(mix_seed(seed, 0x1AA6E5ULL));
    shift::LabeledDataset ds;
    ds.class_count = classes;
    for (int i = 0; i < n; ++i) {
        const int y = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(classes)));
        std::vector<float> img(static_cast<std::size_t>(hw * hw));
        for (int r = 0; r < hw; ++r) {
            for (int c = 0; c < hw; ++c) {
                double v = 0.5;
                if (y == 0) v += contrast * std::cos(M_PI * r);          // horizontal stripes
                else if (y == 1) v += contrast * std::cos(M_PI * c);     // vertical stripes
                else v += contrast * std::cos(M_PI * r) * std::cos(M_PI * c);  // checkerboard
                v += sigma * rng.next_normal();
                img[static_cast<std::size_t>(r * hw + c)] =
                    static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
        ds.inputs.emplace_back(std::vector<std::int64_t>{1, hw, hw}, std::move(img));
        ds.labels.push_back(static_cast<std::uint16_t>(y));
    }
    return ds;
}

// --- trainer internals ---------------------------------------------------------

namespace {

constexpr double kBnEps = 1e-5;

struct Dense {
    std::vector<double> w;  // out x in
    std::vector<double> b;
    int out = 0, in = 0;

    void init(int out_, int in_, Rng& rng) {
        out = out_;
        in = in_;
        w.resize(static_cast<std::size_t>(out) * in);
        b.assign(static_cast<std::size_t>(out), 0.0);
        const double std_dev = std::sqrt(2.0 / in);
        for (auto& v : w) v = std_dev * rng.next_normal();
    }
};

struct Bn {
    std::vector<double> gamma, beta, run_mu, run_var;
    int ch = 0;

    void init(int ch_) {
        ch = ch_;
        gamma.assign(static_cast<std::size_t>(ch), 1.0);
        beta.assign(static_cast<std::size_t>(ch), 0.0);
        run_mu.assign(static_cast<std::size_t>(ch), 0.0);
        run_var.assign(static_cast<std::size_t>(ch), 1.0);
    }
};

// Batch-norm forward over an (n, ch, plane) buffer with batch statistics.
struct BnCache {
    std::vector<double> xhat;
    std::vector<double> mu, var, inv_std;
    std::vector<double> x_minus_mu;
};

void bn_forward(const std::vector<double>& x, int n, int ch, int plane, Bn& bn, double momentum,
                std::vector<double>& y, BnCache& cache, bool update_running) {
    const std::int64_t m = static_cast<std::int64_t>(n) * plane;
    y.resize(x.size());
    cache.xhat.resize(x.size());
    cache.x_minus_mu.resize(x.size());
    cache.mu.assign(static_cast<std::size_t>(ch), 0.0);
    cache.var.assign(static_cast<std::size_t>(ch), 0.0);
    cache.inv_std.assign(static_cast<std::size_t>(ch), 0.0);

    for (int c = 0; c < ch; ++c) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < plane; ++p) sum += x[(static_cast<std::size_t>(i) * ch + c) * plane + p];
        const double mu = sum / static_cast<double>(m);
        double sq = 0.0;
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < plane; ++p) {
                const double d = x[(static_cast<std::size_t>(i) * ch + c) * plane + p] - mu;
                sq += d * d;
            }
        const double var = sq / static_cast<double>(m);
        const double inv = 1.0 / std::sqrt(var + kBnEps);
        cache.mu[static_cast<std::size_t>(c)] = mu;
        cache.var[static_cast<std::size_t>(c)] = var;
        cache.inv_std[static_cast<std::size_t>(c)] = inv;
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < plane; ++p) {
                const std::size_t k = (static_cast<std::size_t>(i) * ch + c) * plane + p;
                cache.x_minus_mu[k] = x[k] - mu;
                cache.xhat[k] = cache.x_minus_mu[k] * inv;
                y[k] = bn.gamma[static_cast<std::size_t>(c)] * cache.xhat[k] +
                       bn.beta[static_cast<std::size_t>(c)];
            }
        if (update_running) {
            bn.run_mu[static_cast<std::size_t>(c)] =
                momentum * bn.run_mu[static_cast<std::size_t>(c)] + (1.0 - momentum) * mu;
            bn.run_var[static_cast<std::size_t>(c)] =
                momentum * bn.run_var[static_cast<std::size_t>(c)] + (1.0 - momentum) * var;
        }
    }
}

void bn_backward(const std::vector<double>& dy, int n, int ch, int plane, const Bn& bn,
                 const BnCache& cache, std::vector<double>& dx, std::vector<double>& dgamma,
                 std::vector<double>& dbeta) {
    const double m = static_cast<double>(n) * plane;
    dx.assign(dy.size(), 0.0);
    dgamma.assign(static_cast<std::size_t>(ch), 0.0);
    dbeta.assign(static_cast<std::size_t>(ch), 0.0);

    for (int c = 0; c < ch; ++c) {
        const double inv = cache.inv_std[static_cast<std::size_t>(c)];
        double dg = 0.0, db = 0.0, dvar = 0.0, dmu_a = 0.0, sum_xmu = 0.0;
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < plane; ++p) {
                const std::size_t k = (static_cast<std::size_t>(i) * ch + c) * plane + p;
                dg += dy[k] * cache.xhat[k];
                db += dy[k];
                const double dxhat = dy[k] * bn.gamma[static_cast<std::size_t>(c)];
                dvar += dxhat * cache.x_minus_mu[k];
                dmu_a += dxhat;
                sum_xmu += cache.x_minus_mu[k];
            }
        dgamma[static_cast<std::size_t>(c)] = dg;
        dbeta[static_cast<std::size_t>(c)] = db;
        dvar *= -0.5 * inv * inv * inv;
        const double dmu = -dmu_a * inv + dvar * (-2.0 * sum_xmu / m);
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < plane; ++p) {
                const std::size_t k = (static_cast<std::size_t>(i) * ch + c) * plane + p;
                const double dxhat = dy[k] * bn.gamma[static_cast<std::size_t>(c)];
                dx[k] = dxhat * inv + dvar * 2.0 * cache.x_minus_mu[k] / m + dmu / m;
            }
    }
}

// y = x @ W^T + b over (n, in) -> (n, out)
void dense_forward(const std::vector<double>& x, int n, const Dense& d, std::vector<double>& y) {
    y.assign(static_cast<std::size_t>(n) * d.out, 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t idx = 0; idx < static_cast<std::int64_t>(n) * d.out; ++idx) {
        const int i = static_cast<int>(idx / d.out);
        const int o = static_cast<int>(idx % d.out);
        double acc = d.b[static_cast<std::size_t>(o)];
        for (int j = 0; j < d.in; ++j) {
            acc += x[static_cast<std::size_t>(i) * d.in + j] * d.w[static_cast<std::size_t>(o) * d.in + j];
        }
        y[idx] = acc;
    }
}

void dense_backward(const std::vector<double>& x, const std::vector<double>& dy, int n, const Dense& d,
                    std::vector<double>& dx, std::vector<double>& dw, std::vector<double>& db) {
    dx.assign(static_cast<std::size_t>(n) * d.in, 0.0);
    dw.assign(d.w.size(), 0.0);
    db.assign(d.b.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t oj = 0; oj < static_cast<std::int64_t>(d.out) * d.in; ++oj) {
        const int o = static_cast<int>(oj / d.in);
        const int j = static_cast<int>(oj % d.in);
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += dy[static_cast<std::size_t>(i) * d.out + o] * x[static_cast<std::size_t>(i) * d.in + j];
        }
        dw[oj] = acc;
    }
    for (int o = 0; o < d.out; ++o) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += dy[static_cast<std::size_t>(i) * d.out + o];
        db[static_cast<std::size_t>(o)] = acc;
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t ij = 0; ij < static_cast<std::int64_t>(n) * d.in; ++ij) {
        const int i = static_cast<int>(ij / d.in);
        const int j = static_cast<int>(ij % d.in);
        double acc = 0.0;
        for (int o = 0; o < d.out; ++o) {
            acc += dy[static_cast<std::size_t>(i) * d.out + o] * d.w[static_cast<std::size_t>(o) * d.in + j];
        }
        dx[ij] = acc;
    }
}

// 3x3 stride-1 pad-1 convolution helpers over (n, ch, hw, hw) buffers.
struct ConvShape {
    int n, cin, cout, hw;
};

void conv_forward(const std::vector<double>& x, const Dense& k, const ConvShape& s,
                  std::vector<double>& y) {
    y.assign(static_cast<std::size_t>(s.n) * s.cout * s.hw * s.hw, 0.0);
    const int plane = s.hw * s.hw;
#pragma omp parallel for schedule(static)
    for (std::int64_t idx = 0; idx < static_cast<std::int64_t>(s.n) * s.cout * plane; ++idx) {
        const int i = static_cast<int>(idx / (s.cout * plane));
        const int co = static_cast<int>((idx / plane) % s.cout);
        const int oy = static_cast<int>((idx % plane) / s.hw);
        const int ox = static_cast<int>(idx % s.hw);
        double acc = k.b[static_cast<std::size_t>(co)];
        for (int ci = 0; ci < s.cin; ++ci)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const int y_in = oy + ky - 1, x_in = ox + kx - 1;
                    if (y_in < 0 || y_in >= s.hw || x_in < 0 || x_in >= s.hw) continue;
                    acc += x[((static_cast<std::size_t>(i) * s.cin + ci) * s.hw + y_in) * s.hw + x_in] *
                           k.w[((static_cast<std::size_t>(co) * s.cin + ci) * 3 + ky) * 3 + kx];
                }
        y[idx] = acc;
    }
}

void conv_backward(const std::vector<double>& x, const std::vector<double>& dy, const Dense& k,
                   const ConvShape& s, std::vector<double>& dx, std::vector<double>& dw,
                   std::vector<double>& db) {
    const int plane = s.hw * s.hw;
    dx.assign(x.size(), 0.0);
    dw.assign(k.w.size(), 0.0);
    db.assign(k.b.size(), 0.0);

#pragma omp parallel for schedule(static)
    for (std::int64_t widx = 0; widx < static_cast<std::int64_t>(s.cout) * s.cin * 9; ++widx) {
        const int co = static_cast<int>(widx / (s.cin * 9));
        const int ci = static_cast<int>((widx / 9) % s.cin);
        const int ky = static_cast<int>((widx % 9) / 3);
        const int kx = static_cast<int>(widx % 3);
        double acc = 0.0;
        for (int i = 0; i < s.n; ++i)
            for (int oy = 0; oy < s.hw; ++oy)
                for (int ox = 0; ox < s.hw; ++ox) {
                    const int y_in = oy + ky - 1, x_in = ox + kx - 1;
                    if (y_in < 0 || y_in >= s.hw || x_in < 0 || x_in >= s.hw) continue;
                    acc += x[((static_cast<std::size_t>(i) * s.cin + ci) * s.hw + y_in) * s.hw + x_in] *
                           dy[((static_cast<std::size_t>(i) * s.cout + co) * s.hw + oy) * s.hw + ox];
                }
        dw[widx] = acc;
    }
    for (int co = 0; co < s.cout; ++co) {
        double acc = 0.0;
        for (int i = 0; i < s.n; ++i)
            for (int p = 0; p < plane; ++p) {
                acc += dy[(static_cast<std::size_t>(i) * s.cout + co) * plane + p];
            }
        db[static_cast<std::size_t>(co)] = acc;
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t xidx = 0; xidx < static_cast<std::int64_t>(s.n) * s.cin * plane; ++xidx) {
        const int i = static_cast<int>(xidx / (s.cin * plane));
        const int ci = static_cast<int>((xidx / plane) % s.cin);
        const int iy = static_cast<int>((xidx % plane) / s.hw);
        const int ix = static_cast<int>(xidx % s.hw);
        double acc = 0.0;
        for (int co = 0; co < s.cout; ++co)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const int oy = iy - ky + 1, ox = ix - kx + 1;
                    if (oy < 0 || oy >= s.hw || ox < 0 || ox >= s.hw) continue;
                    acc += k.w[((static_cast<std::size_t>(co) * s.cin + ci) * 3 + ky) * 3 + kx] *
                           dy[((static_cast<std::size_t>(i) * s.cout + co) * s.hw + oy) * s.hw + ox];
                }
        dx[xidx] = acc;
    }
}

void relu_inplace(std::vector<double>& v) {
    for (auto& x : v) x = x > 0.0 ? x : 0.0;
}

void relu_backward_inplace(std::vector<double>& d, const std::vector<double>& activated) {
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (activated[i] <= 0.0) d[i] = 0.0;
    }
}

// softmax cross-entropy: returns mean loss, writes dlogits = (p - onehot)/n
double softmax_xent(const std::vector<double>& logits, const std::vector<std::uint16_t>& labels,
                    int n, int classes, std::vector<double>& dlogits) {
    dlogits.assign(logits.size(), 0.0);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = logits.data() + static_cast<std::size_t>(i) * classes;
        double mx = row[0];
        for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
        const double logz = std::log(z) + mx;
        loss += logz - row[labels[static_cast<std::size_t>(i)]];
        for (int c = 0; c < classes; ++c) {
            const double p = std::exp(row[c] - logz);
            dlogits[static_cast<std::size_t>(i) * classes + c] =
                (p - (c == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0)) / n;
        }
    }
    return loss / n;
}

void sgd_step(std::vector<double>& p, const std::vector<double>& g, double lr) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
}

std::vector<float> to_f32(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

adapt::NormParams bn_to_params(const Bn& bn) {
    adapt::NormParams p;
    p.mu_s = to_f32(bn.run_mu);
    std::vector<double> var = bn.run_var;
    for (auto& v : var) v = std::max(v, 0.0);
    p.sigma2_s = to_f32(var);
    p.gamma = to_f32(bn.gamma);
    p.beta = to_f32(bn.beta);
    p.eps = kBnEps;
    return p;
}

graph::LayerSpec dense_to_linear(const Dense& d, int id) {
    graph::LayerSpec l;
    l.kind = graph::LayerKind::Linear;
    l.id = id;
    l.weights = Tensor({d.out, d.in}, to_f32(d.w));
    l.bias = to_f32(d.b);
    return l;
}

graph::LayerSpec dense_to_conv(const Dense& k, int cout, int cin, int id) {
    graph::LayerSpec l;
    l.kind = graph::LayerKind::Conv2d;
    l.id = id;
    l.weights = Tensor({cout, cin, 3, 3}, to_f32(k.w));
    l.bias = to_f32(k.b);
    l.stride = 1;
    l.padding = 1;
    return l;
}

graph::LayerSpec plain_layer(graph::LayerKind kind, int id) {
    graph::LayerSpec l;
    l.kind = kind;
    l.id = id;
    return l;
}

graph::LayerSpec bn_layer(const Bn& bn, int id) {
    graph::LayerSpec l;
    l.kind = graph::LayerKind::BatchNorm;
    l.id = id;
    l.norm = bn_to_params(bn);
    return l;
}

graph::ModelGraph train_mlp(const shift::LabeledDataset& data, const TrainConfig& cfg) {
    const int dim = static_cast<int>(data.inputs.front().size());
    const int classes = static_cast<int>(data.class_count);
    const int h = cfg.hidden;

    Rng init_rng(mix_seed(cfg.seed, 0x11717ULL));
    Dense l1, l2, l3;
    l1.init(h, dim, init_rng);
    l2.init(h, h, init_rng);
    l3.init(classes, h, init_rng);
    Bn bn1, bn2;
    bn1.init(h);
    bn2.init(h);

    const int n_total = static_cast<int>(data.size());
    std::vector<int> order(static_cast<std::size_t>(n_total));
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> xb, z1, y1, a1, z2, y2, a2, logits, dlogits;
    std::vector<double> dz, dx_tmp, dw, db, dgamma, dbeta;
    BnCache c1, c2;
    std::vector<std::uint16_t> yb;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, 0xE60C + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order.begin(), order.end());
        for (int start = 0; start < n_total; start += cfg.batch_size) {
            const int nb = std::min(cfg.batch_size, n_total - start);
            xb.assign(static_cast<std::size_t>(nb) * dim, 0.0);
            yb.resize(static_cast<std::size_t>(nb));
            for (int i = 0; i < nb; ++i) {
                const int src = order[static_cast<std::size_t>(start + i)];
                const float* p = data.inputs[static_cast<std::size_t>(src)].data();
                for (int j = 0; j < dim; ++j) xb[static_cast<std::size_t>(i) * dim + j] = p[j];
                yb[static_cast<std::size_t>(i)] = data.labels[static_cast<std::size_t>(src)];
            }

            dense_forward(xb, nb, l1, z1);
            bn_forward(z1, nb, h, 1, bn1, cfg.momentum, y1, c1, true);
            a1 = y1;
            relu_inplace(a1);
            dense_forward(a1, nb, l2, z2);
            bn_forward(z2, nb, h, 1, bn2, cfg.momentum, y2, c2, true);
            a2 = y2;
            relu_inplace(a2);
            dense_forward(a2, nb, l3, logits);

            const double loss = softmax_xent(logits, yb, nb, classes, dlogits);
            if (!std::isfinite(loss)) {
                throw_numeric("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
            }

            // head
            std::vector<double> da2, dw3, db3;
            dense_backward(a2, dlogits, nb, l3, da2, dw3, db3);
            relu_backward_inplace(da2, a2);
            bn_backward(da2, nb, h, 1, bn2, c2, dz, dgamma, dbeta);
            sgd_step(bn2.gamma, dgamma, cfg.lr);
            sgd_step(bn2.beta, dbeta, cfg.lr);
            std::vector<double> da1, dw2, db2;
            dense_backward(a1, dz, nb, l2, da1, dw2, db2);
            relu_backward_inplace(da1, a1);
            bn_backward(da1, nb, h, 1, bn1, c1, dz, dgamma, dbeta);
            sgd_step(bn1.gamma, dgamma, cfg.lr);
            sgd_step(bn1.beta, dbeta, cfg.lr);
            dense_backward(xb, dz, nb, l1, dx_tmp, dw, db);
            sgd_step(l1.w, dw, cfg.lr);
            sgd_step(l1.b, db, cfg.lr);
            sgd_step(l2.w, dw2, cfg.lr);
            sgd_step(l2.b, db2, cfg.lr);
            sgd_step(l3.w, dw3, cfg.lr);
            sgd_step(l3.b, db3, cfg.lr);
        }
    }

    graph::ModelGraph model;
    model.meta.name = "mlp-bn";
    model.meta.input_shape = {dim};
    model.meta.class_count = classes;
    model.layers.push_back(dense_to_linear(l1, 0));
    model.layers.push_back(bn_layer(bn1, 1));
    model.layers.push_back(plain_layer(graph::LayerKind::Relu, 2));
    model.layers.push_back(dense_to_linear(l2, 3));
    model.layers.push_back(bn_layer(bn2, 4));
    model.layers.push_back(plain_layer(graph::LayerKind::Relu, 5));
    model.layers.push_back(dense_to_linear(l3, 6));
    model.validate();
    return model;
}

graph::ModelGraph train_cnn(const shift::LabeledDataset& data, const TrainConfig& cfg) {
    const auto& sshape = data.inputs.front().shape();
    if (sshape.size() != 3 || sshape[1] != sshape[2]) {
        throw_config("TinyCnn needs square (C, H, H) image samples");
    }
    const int cin = static_cast<int>(sshape[0]);
    const int hw = static_cast<int>(sshape[1]);
    const int classes = static_cast<int>(data.class_count);
    const int c1n = cfg.conv1_ch, c2n = cfg.conv2_ch;
    const int plane = hw * hw;

    Rng init_rng(mix_seed(cfg.seed, 0xCC11ULL));
    Dense k1, k2, fc;
    auto init_conv = [&](Dense& k, int cout, int fan_in_ch) {
        k.w.resize(static_cast<std::size_t>(cout) * fan_in_ch * 9);
        k.b.assign(static_cast<std::size_t>(cout), 0.0);
        const double std_dev = std::sqrt(2.0 / (fan_in_ch * 9));
        for (auto& v : k.w) v = std_dev * init_rng.next_normal();
    };
    init_conv(k1, c1n, cin);
    init_conv(k2, c2n, c1n);
    fc.init(classes, c2n, init_rng);
    Bn bn1, bn2;
    bn1.init(c1n);
    bn2.init(c2n);

    const int n_total = static_cast<int>(data.size());
    std::vector<int> order(static_cast<std::size_t>(n_total));
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> xb, z1, y1, a1, z2, y2, a2, pooled, logits, dlogits;
    std::vector<double> dpool, da2, dz2, da1, dz1, dx_tmp, dw, db, dgamma, dbeta;
    BnCache c1, c2;
    std::vector<std::uint16_t> yb;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, 0xE60C + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order.begin(), order.end());
        for (int start = 0; start < n_total; start += cfg.batch_size) {
            const int nb = std::min(cfg.batch_size, n_total - start);
            xb.assign(static_cast<std::size_t>(nb) * cin * plane, 0.0);
            yb.resize(static_cast<std::size_t>(nb));
            for (int i = 0; i < nb; ++i) {
                const int src = order[static_cast<std::size_t>(start + i)];
                const float* p = data.inputs[static_cast<std::size_t>(src)].data();
                for (int j = 0; j < cin * plane; ++j) {
                    xb[static_cast<std::size_t>(i) * cin * plane + j] = p[j];
                }
                yb[static_cast<std::size_t>(i)] = data.labels[static_cast<std::size_t>(src)];
            }

            const ConvShape s1{nb, cin, c1n, hw};
            const ConvShape s2{nb, c1n, c2n, hw};
            conv_forward(xb, k1, s1, z1);
            bn_forward(z1, nb, c1n, plane, bn1, cfg.momentum, y1, c1, true);
            a1 = y1;
            relu_inplace(a1);
            conv_forward(a1, k2, s2, z2);
            bn_forward(z2, nb, c2n, plane, bn2, cfg.momentum, y2, c2, true);
            a2 = y2;
            relu_inplace(a2);
            pooled.assign(static_cast<std::size_t>(nb) * c2n, 0.0);
            for (int i = 0; i < nb; ++i)
                for (int c = 0; c < c2n; ++c) {
                    double acc = 0.0;
                    for (int p = 0; p < plane; ++p) {
                        acc += a2[(static_cast<std::size_t>(i) * c2n + c) * plane + p];
                    }
                    pooled[static_cast<std::size_t>(i) * c2n + c] = acc / plane;
                }
            dense_forward(pooled, nb, fc, logits);

            const double loss = softmax_xent(logits, yb, nb, classes, dlogits);
            if (!std::isfinite(loss)) {
                throw_numeric("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
            }

            std::vector<double> dwfc, dbfc;
            dense_backward(pooled, dlogits, nb, fc, dpool, dwfc, dbfc);
            da2.assign(a2.size(), 0.0);
            for (int i = 0; i < nb; ++i)
                for (int c = 0; c < c2n; ++c) {
                    const double g = dpool[static_cast<std::size_t>(i) * c2n + c] / plane;
                    for (int p = 0; p < plane; ++p) {
                        da2[(static_cast<std::size_t>(i) * c2n + c) * plane + p] = g;
                    }
                }
            relu_backward_inplace(da2, a2);
            bn_backward(da2, nb, c2n, plane, bn2, c2, dz2, dgamma, dbeta);
            sgd_step(bn2.gamma, dgamma, cfg.lr);
            sgd_step(bn2.beta, dbeta, cfg.lr);
            std::vector<double> dw2, db2;
            conv_backward(a1, dz2, k2, s2, da1, dw2, db2);
            relu_backward_inplace(da1, a1);
            bn_backward(da1, nb, c1n, plane, bn1, c1, dz1, dgamma, dbeta);
            sgd_step(bn1.gamma, dgamma, cfg.lr);
            sgd_step(bn1.beta, dbeta, cfg.lr);
            std::vector<double> dw1, db1;
            conv_backward(xb, dz1, k1, s1, dx_tmp, dw1, db1);
            sgd_step(k1.w, dw1, cfg.lr);
            sgd_step(k1.b, db1, cfg.lr);
            sgd_step(k2.w, dw2, cfg.lr);
            sgd_step(k2.b, db2, cfg.lr);
            sgd_step(fc.w, dwfc, cfg.lr);
            sgd_step(fc.b, dbfc, cfg.lr);
        }
    }

    graph::ModelGraph model;
    model.meta.name = "tiny-cnn";
    model.meta.input_shape = {cin, hw, hw};
    model.meta.class_count = classes;
    model.layers.push_back(dense_to_conv(k1, c1n, cin, 0));
    model.layers.push_back(bn_layer(bn1, 1));
    model.layers.push_back(plain_layer(graph::LayerKind::Relu, 2));
    model.layers.push_back(dense_to_conv(k2, c2n, c1n, 3));
    model.layers.push_back(bn_layer(bn2, 4));
    model.layers.push_back(plain_layer(graph::LayerKind::Relu, 5));
    model.layers.push_back(plain_layer(graph::LayerKind::GlobalAvgPool, 6));
    model.layers.push_back(dense_to_linear(fc, 7));
    model.validate();
    return model;
}

}  // namespace

Arch arch_from_name(const std::string& name) {
    if (name == "mlp-bn") return Arch::MlpBn;
    if (name == "tiny-cnn") return Arch::TinyCnn;
    throw_config("unknown architecture: " + name);
}

const char* arch_name(Arch a) { return a == Arch::MlpBn ? "mlp-bn" : "tiny-cnn"; }

graph::ModelGraph train_reference_model(Arch arch, const shift::LabeledDataset& data,
                                        const TrainConfig& cfg) {
    data.validate();
    if (data.inputs.empty()) throw_config("training data is empty");
    if (cfg.batch_size < 2) throw_config("training batch size must be >= 2 (batch statistics)");
    if (!(cfg.lr > 0.0)) throw_config("learning rate must be > 0");
    if (!(cfg.momentum >= 0.0 && cfg.momentum <= 1.0)) throw_config("momentum must lie in [0, 1]");
    if (cfg.epochs < 0) throw_config("epochs must be >= 0");

    return arch == Arch::MlpBn ? train_mlp(data, cfg) : train_cnn(data, cfg);
}

double dataset_accuracy(const graph::ModelGraph& model, const shift::LabeledDataset& data) {
    data.validate();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::vector<std::int64_t> shape;
        shape.push_back(1);
        for (std::int64_t d : data.inputs[i].shape()) shape.push_back(d);
        Tensor in(shape, data.inputs[i].values());
        const Tensor logits = graph::forward(model, in).logits;
        int best = 0;
        for (std::int64_t c = 1; c < logits.dim(1); ++c) {
            if (logits.at(0, c) > logits.at(0, best)) best = static_cast<int>(c);
        }
        if (best == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

// --- evaluation ---------------------------------------------------------------

EvalMode eval_mode_from_name(const std::string& name) {
    if (name == "source") return EvalMode::Source;
    if (name == "adapt") return EvalMode::Adapt;
    if (name == "naive") return EvalMode::NaiveReplace;
    if (name == "running-avg") return EvalMode::RunningAvg;
    throw_config("unknown eval mode: " + name);
}

const char* eval_mode_name(EvalMode m) {
    switch (m) {
        case EvalMode::Source: return "source";
        case EvalMode::Adapt: return "adapt";
        case EvalMode::NaiveReplace: return "naive";
        case EvalMode::RunningAvg: return "running-avg";
    }
    return "?";
}

double accuracy(const std::vector<SampleRecord>& records) {
    if (records.empty()) throw_config("cannot compute accuracy of zero records");
    std::size_t correct = 0;
    for (const auto& r : records) {
        if (r.pred_label == r.true_label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

double weighted_f1(const std::vector<SampleRecord>& records) {
    if (records.empty()) throw_config("cannot compute weighted F1 of zero records");
    std::map<int, std::array<std::int64_t, 3>> per_class;  // tp, fp, fn
    std::map<int, std::int64_t> support;
    for (const auto& r : records) {
        support[r.true_label]++;
        if (r.pred_label == r.true_label) {
            per_class[r.true_label][0]++;
        } else {
            per_class[r.pred_label][1]++;
            per_class[r.true_label][2]++;
        }
    }
    double f1_sum = 0.0;
    for (const auto& [cls, sup] : support) {
        const auto& c = per_class[cls];
        const double tp = static_cast<double>(c[0]);
        const double fp = static_cast<double>(c[1]);
        const double fn = static_cast<double>(c[2]);
        double f1 = 0.0;
        if (tp > 0.0) {
            const double prec = tp / (tp + fp);
            const double rec = tp / (tp + fn);
            f1 = 2.0 * prec * rec / (prec + rec);
        }
        f1_sum += f1 * static_cast<double>(sup) / static_cast<double>(records.size());
    }
    return f1_sum;
}

namespace {

Tensor unsqueeze(const Tensor& t) {
    std::vector<std::int64_t> shape;
    shape.push_back(1);
    for (std::int64_t d : t.shape()) shape.push_back(d);
    return Tensor(shape, t.values());
}

int argmax_row(const Tensor& logits) {
    int best = 0;
    for (std::int64_t c = 1; c < logits.dim(1); ++c) {
        if (logits.at(0, c) > logits.at(0, best)) best = static_cast<int>(c);
    }
    return best;
}

// Stateful normalization baseline: per-layer running statistics seeded from
// the source parameters and updated with every sample's instance statistics.
class RunningAvgHook : public graph::NormStatsHook {
public:
    explicit RunningAvgHook(double momentum) : momentum_(momentum) {}

    void norm_stats(int layer_id, const adapt::ChannelStats& instance,
                    const adapt::NormParams& params, std::vector<double>& mu_out,
                    std::vector<double>& sigma2_out) override {
        auto it = state_.find(layer_id);
        if (it == state_.end()) {
            adapt::ChannelStats init;
            init.mu.assign(params.mu_s.begin(), params.mu_s.end());
            init.sigma2.assign(params.sigma2_s.begin(), params.sigma2_s.end());
            it = state_.emplace(layer_id, std::move(init)).first;
        }
        adapt::ChannelStats& st = it->second;
        for (std::size_t c = 0; c < st.mu.size(); ++c) {
            st.mu[c] = momentum_ * st.mu[c] + (1.0 - momentum_) * instance.mu[c];
            st.sigma2[c] = momentum_ * st.sigma2[c] + (1.0 - momentum_) * instance.sigma2[c];
        }
        mu_out = st.mu;
        sigma2_out = st.sigma2;
    }

private:
    double momentum_;
    std::map<int, adapt::ChannelStats> state_;
};

void fill_meta(RunReport& report, const std::string& model_name, std::int64_t class_count,
               const EvalOptions& opts) {
    report.model_name = model_name;
    report.mode = eval_mode_name(opts.mode);
    report.fusion = opts.fusion_label;
    report.seed = opts.seed;
    report.class_count = class_count;
    report.distance_mode =
        opts.cfg.distance_mode == adapt::DistanceMode::RawSum ? "raw-sum" : "channel-mean";
    if (opts.mode == EvalMode::Adapt) {
        report.tau = opts.cfg.tau;
        report.lambda = opts.cfg.lambda;
    } else if (opts.mode == EvalMode::NaiveReplace) {
        report.tau = 0.0;
        report.lambda = 0.0;
    } else if (opts.mode == EvalMode::RunningAvg) {
        report.momentum = opts.momentum;
    }
}

void summarize_d(const std::optional<graph::ForwardTrace>& trace, SampleRecord& rec) {
    if (!trace || trace->records.empty()) return;
    double sum = 0.0, mx = 0.0;
    for (const auto& r : trace->records) {
        sum += r.d;
        mx = std::max(mx, r.d);
    }
    rec.d_count = static_cast<int>(trace->records.size());
    rec.d_mean = sum / static_cast<double>(trace->records.size());
    rec.d_max = mx;
}

template <typename ForwardFn>
RunReport evaluate_items(ForwardFn&& run_one, const std::vector<shift::StreamItem>& stream,
                         const std::string& model_name, std::int64_t class_count,
                         const EvalOptions& opts) {
    if (stream.empty()) throw_config("cannot evaluate an empty stream");
    RunReport report;
    fill_meta(report, model_name, class_count, opts);

    const auto t0 = std::chrono::steady_clock::now();
    int index = 0;
    for (const shift::StreamItem& item : stream) {
        SampleRecord rec;
        rec.index = index++;
        rec.true_label = item.label;
        rec.kind = item.shift.kind;
        rec.severity = item.shift.kind == shift::ShiftKind::Identity ? 0 : item.shift.severity;
        try {
            run_one(item, rec, report.ops);
        } catch (const Error& e) {
            rec.pred_label = -1;
            rec.error = e.what();
        }
        report.samples.push_back(std::move(rec));
    }
    report.accuracy = accuracy(report.samples);
    report.weighted_f1 = weighted_f1(report.samples);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

adapt::AdaptConfig effective_cfg(const EvalOptions& opts) {
    adapt::AdaptConfig cfg = opts.cfg;
    if (opts.mode == EvalMode::NaiveReplace) {
        cfg.tau = 0.0;
        cfg.lambda = 0.0;
    }
    return cfg;
}

}  // namespace

RunReport evaluate_stream(const graph::ModelGraph& model,
                          const std::vector<shift::StreamItem>& stream, const EvalOptions& opts) {
    model.validate();
    RunningAvgHook hook(opts.momentum);
    const adapt::AdaptConfig cfg = effective_cfg(opts);

    auto run_one = [&](const shift::StreamItem& item, SampleRecord& rec, OpCounts& ops) {
        graph::ForwardOptions fo;
        fo.cfg = cfg;
        fo.counts = &ops;
        fo.adapt_ids = opts.adapt_ids;
        switch (opts.mode) {
            case EvalMode::Source:
                fo.mode = graph::RunMode::Source;
                break;
            case EvalMode::Adapt:
            case EvalMode::NaiveReplace:
                fo.mode = graph::RunMode::Adapt;
                fo.trace = true;
                break;
            case EvalMode::RunningAvg:
                fo.mode = graph::RunMode::Source;
                fo.stats_hook = &hook;
                break;
        }
        const auto res = graph::forward(model, unsqueeze(item.input), fo);
        rec.pred_label = argmax_row(res.logits);
        summarize_d(res.trace, rec);
    };
    return evaluate_items(run_one, stream, model.meta.name, model.meta.class_count, opts);
}

RunReport evaluate_stream(const quant::QuantizedModel& model,
                          const std::vector<shift::StreamItem>& stream, const EvalOptions& opts) {
    if (opts.mode == EvalMode::RunningAvg) {
        throw_config("the running-average baseline applies to float models only");
    }
    const adapt::AdaptConfig cfg = effective_cfg(opts);

    auto run_one = [&](const shift::StreamItem& item, SampleRecord& rec, OpCounts& ops) {
        quant::QForwardOptions fo;
        fo.cfg = cfg;
        fo.counts = &ops;
        fo.mode = opts.mode == EvalMode::Source ? graph::RunMode::Source : graph::RunMode::Adapt;
        fo.trace = fo.mode == graph::RunMode::Adapt;
        const auto res = quant::forward(model, unsqueeze(item.input), fo);
        rec.pred_label = argmax_row(res.logits);
        summarize_d(res.trace, rec);
    };
    return evaluate_items(run_one, stream, model.meta.name, model.meta.class_count, opts);
}

RunReport evaluate_stream(const graph::ModelGraph& model,
                          shift::BoundedQueue<shift::StreamItem>& queue, const EvalOptions& opts) {
    std::vector<shift::StreamItem> items;
    while (auto item = queue.pop()) items.push_back(std::move(*item));
    return evaluate_stream(model, items, opts);
}

// --- experiments -----------------------------------------------------------------

SweepResult sweep_hyperparams(const graph::ModelGraph& model,
                              const std::vector<shift::StreamItem>& stream,
                              std::vector<double> tau_grid, std::vector<double> lambda_grid,
                              const adapt::AdaptConfig& base_cfg, int threads) {
    for (double t : tau_grid) {
        if (t < 0.0 || t > 1.0) throw_config("sweep tau values must lie in [0, 1]");
    }
    for (double l : lambda_grid) {
        if (l < 0.0 || l > 1.0) throw_config("sweep lambda values must lie in [0, 1]");
    }
    std::sort(tau_grid.begin(), tau_grid.end());
    tau_grid.erase(std::unique(tau_grid.begin(), tau_grid.end()), tau_grid.end());
    std::sort(lambda_grid.begin(), lambda_grid.end());
    lambda_grid.erase(std::unique(lambda_grid.begin(), lambda_grid.end()), lambda_grid.end());
    if (tau_grid.empty() || lambda_grid.empty()) throw_config("sweep grids must be non-empty");

    SweepResult result;
    result.taus = tau_grid;
    result.lambdas = lambda_grid;
    result.accuracy.assign(tau_grid.size(), std::vector<double>(lambda_grid.size(), 0.0));

    const std::int64_t cells = static_cast<std::int64_t>(tau_grid.size() * lambda_grid.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, threads))
    for (std::int64_t cell = 0; cell < cells; ++cell) {
        const std::size_t ti = static_cast<std::size_t>(cell) / lambda_grid.size();
        const std::size_t li = static_cast<std::size_t>(cell) % lambda_grid.size();
        EvalOptions opts;
        opts.mode = EvalMode::Adapt;
        opts.cfg = base_cfg;
        opts.cfg.tau = tau_grid[ti];
        opts.cfg.lambda = lambda_grid[li];
        const RunReport rep = evaluate_stream(model, stream, opts);
        result.accuracy[ti][li] = rep.accuracy;
    }
    return result;
}

std::vector<AblationPoint> layer_ablation(const graph::ModelGraph& model,
                                          const std::vector<shift::StreamItem>& stream,
                                          AblationDirection direction,
                                          const adapt::AdaptConfig& cfg) {
    // adaptation needs AdaptiveNorm layers; promote any remaining BatchNorm
    graph::ModelGraph work = model;
    bool has_batchnorm = false;
    for (const auto& l : work.layers) has_batchnorm |= l.kind == graph::LayerKind::BatchNorm;
    if (has_batchnorm) work = graph::replace_norm_layers(work);

    const std::vector<int> norm_ids = work.norm_layer_ids();
    const int total = static_cast<int>(norm_ids.size());
    if (total == 0) throw_config("ablation needs at least one normalization layer");

    std::vector<AblationPoint> curve;
    for (int k = 0; k <= total; ++k) {
        AblationPoint point;
        point.k = k;
        if (direction == AblationDirection::AddDeepProgressively) {
            // extend adaptation deeper: the k shallowest layers adapt
            point.adapted_ids.assign(norm_ids.begin(), norm_ids.begin() + k);
        } else {
            // drop shallow layers first: the k deepest layers stay adaptive
            point.adapted_ids.assign(norm_ids.end() - k, norm_ids.end());
        }
        EvalOptions opts;
        opts.mode = EvalMode::Adapt;
        opts.cfg = cfg;
        opts.adapt_ids = &point.adapted_ids;
        point.accuracy = evaluate_stream(work, stream, opts).accuracy;
        curve.push_back(std::move(point));
    }
    return curve;
}

OpCounts profile_ops(const graph::ModelGraph& model, const Tensor& input, graph::RunMode mode,
                     const adapt::AdaptConfig& cfg) {
    OpCounts counts;
    graph::ForwardOptions fo;
    fo.mode = mode;
    fo.cfg = cfg;
    fo.counts = &counts;
    graph::forward(model, input, fo);
    return counts;
}

OpCounts profile_ops(const quant::QuantizedModel& model, const Tensor& input, graph::RunMode mode,
                     const adapt::AdaptConfig& cfg) {
    OpCounts counts;
    quant::QForwardOptions fo;
    fo.mode = mode;
    fo.cfg = cfg;
    fo.counts = &counts;
    quant::forward(model, input, fo);
    return counts;
}

// --- report files -------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// error text lands in the last CSV column; keep it one-cell safe
std::string csv_safe(std::string s) {
    for (char& c : s) {
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    return s;
}

json meta_to_json(const RunReport& r) {
    return json{{"type", "meta"},
                {"schema_version", r.schema_version},
                {"model", r.model_name},
                {"mode", r.mode},
                {"fusion", r.fusion},
                {"distance_mode", r.distance_mode},
                {"tau", r.tau},
                {"lambda", r.lambda},
                {"momentum", r.momentum},
                {"seed", r.seed},
                {"class_count", r.class_count}};
}

}  // namespace

void emit_report(const RunReport& report, ReportFormat format, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw_io("cannot open for writing: " + path);

    if (format == ReportFormat::Csv) {
        out << "# schema_version=" << report.schema_version << "\n";
        out << "# model=" << report.model_name << "\n";
        out << "# mode=" << report.mode << "\n";
        out << "# fusion=" << report.fusion << "\n";
        out << "# distance_mode=" << report.distance_mode << "\n";
        out << "# tau=" << fmt_double(report.tau) << "\n";
        out << "# lambda=" << fmt_double(report.lambda) << "\n";
        out << "# momentum=" << fmt_double(report.momentum) << "\n";
        out << "# seed=" << report.seed << "\n";
        out << "# class_count=" << report.class_count << "\n";
        out << "# float_mults=" << report.ops.float_mults << "\n";
        out << "# int_mults=" << report.ops.int_mults << "\n";
        out << "# dequant_events=" << report.ops.dequant_events << "\n";
        out << "# requant_events=" << report.ops.requant_events << "\n";
        out << "index,true_label,pred_label,kind,severity,d_mean,d_max,d_count,error\n";
        for (const auto& s : report.samples) {
            out << s.index << ',' << s.true_label << ',' << s.pred_label << ','
                << shift::shift_kind_name(s.kind) << ',' << s.severity << ',' << fmt_double(s.d_mean)
                << ',' << fmt_double(s.d_max) << ',' << s.d_count << ',' << csv_safe(s.error) << "\n";
        }
    } else {
        out << meta_to_json(report).dump() << "\n";
        for (const auto& s : report.samples) {
            json j{{"type", "sample"},      {"index", s.index},
                   {"true_label", s.true_label}, {"pred_label", s.pred_label},
                   {"kind", shift::shift_kind_name(s.kind)}, {"severity", s.severity},
                   {"d_mean", s.d_mean},    {"d_max", s.d_max},
                   {"d_count", s.d_count}};
            if (!s.error.empty()) j["error"] = s.error;
            out << j.dump() << "\n";
        }
        json agg{{"type", "aggregate"},
                 {"accuracy", report.accuracy},
                 {"weighted_f1", report.weighted_f1},
                 {"float_mults", report.ops.float_mults},
                 {"int_mults", report.ops.int_mults},
                 {"dequant_events", report.ops.dequant_events},
                 {"requant_events", report.ops.requant_events}};
        out << agg.dump() << "\n";
    }
    out.close();
    if (!out) throw_io("write failed: " + path);
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace

RunReport read_report(const std::string& path, ReportFormat format) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open for reading: " + path);
    RunReport report;
    std::string line;
    std::size_t lineno = 0;

    if (format == ReportFormat::Csv) {
        bool header_seen = false;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            if (line[0] == '#') {
                const auto eq = line.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = line.substr(2, eq - 2);
                const std::string val = line.substr(eq + 1);
                if (key == "schema_version") report.schema_version = static_cast<std::uint32_t>(std::stoul(val));
                else if (key == "model") report.model_name = val;
                else if (key == "mode") report.mode = val;
                else if (key == "fusion") report.fusion = val;
                else if (key == "distance_mode") report.distance_mode = val;
                else if (key == "tau") report.tau = std::stod(val);
                else if (key == "lambda") report.lambda = std::stod(val);
                else if (key == "momentum") report.momentum = std::stod(val);
                else if (key == "seed") report.seed = std::stoull(val);
                else if (key == "class_count") report.class_count = std::stoll(val);
                else if (key == "float_mults") report.ops.float_mults = std::stoull(val);
                else if (key == "int_mults") report.ops.int_mults = std::stoull(val);
                else if (key == "dequant_events") report.ops.dequant_events = std::stoull(val);
                else if (key == "requant_events") report.ops.requant_events = std::stoull(val);
                continue;
            }
            if (!header_seen) {
                header_seen = true;  // fixed column header
                continue;
            }
            const auto cells = split_csv_row(line);
            if (cells.size() != 9) {
                throw_parse("bad CSV row at line " + std::to_string(lineno) + " in " + path);
            }
            SampleRecord s;
            s.index = std::stoi(cells[0]);
            s.true_label = std::stoi(cells[1]);
            s.pred_label = std::stoi(cells[2]);
            s.kind = shift::shift_kind_from_name(cells[3]);
            s.severity = std::stoi(cells[4]);
            s.d_mean = std::stod(cells[5]);
            s.d_max = std::stod(cells[6]);
            s.d_count = std::stoi(cells[7]);
            s.error = cells[8];
            report.samples.push_back(std::move(s));
        }
        if (!header_seen) throw_parse("missing CSV header in " + path);
    } else {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::parse_error& e) {
                throw_parse("bad JSON at line " + std::to_string(lineno) + " in " + path + ": " +
                            e.what());
            }
            const std::string type = j.value("type", "");
            if (type == "meta") {
                report.schema_version = j.value("schema_version", 1u);
                report.model_name = j.value("model", "");
                report.mode = j.value("mode", "");
                report.fusion = j.value("fusion", "");
                report.distance_mode = j.value("distance_mode", "");
                report.tau = j.value("tau", 0.0);
                report.lambda = j.value("lambda", 0.0);
                report.momentum = j.value("momentum", 0.0);
                report.seed = j.value("seed", 0ull);
                report.class_count = j.value("class_count", 0ll);
            } else if (type == "sample") {
                SampleRecord s;
                s.index = j.at("index").get<int>();
                s.true_label = j.at("true_label").get<int>();
                s.pred_label = j.at("pred_label").get<int>();
                s.kind = shift::shift_kind_from_name(j.at("kind").get<std::string>());
                s.severity = j.at("severity").get<int>();
                s.d_mean = j.at("d_mean").get<double>();
                s.d_max = j.at("d_max").get<double>();
                s.d_count = j.at("d_count").get<int>();
                s.error = j.value("error", "");
                report.samples.push_back(std::move(s));
            } else if (type == "aggregate") {
                report.ops.float_mults = j.value("float_mults", 0ull);
                report.ops.int_mults = j.value("int_mults", 0ull);
                report.ops.dequant_events = j.value("dequant_events", 0ull);
                report.ops.requant_events = j.value("requant_events", 0ull);
            }
        }
    }

    if (!report.samples.empty()) {
        report.accuracy = accuracy(report.samples);
        report.weighted_f1 = weighted_f1(report.samples);
    }
    return report;
}

}  // namespace leantta::bench
