#include "leantta/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "leantta/io.hpp"

namespace leantta::quant {

void QuantParams::validate() const {
    if (!(scale > 0.0)) throw_config("quantization scale must be > 0");
    if (zero_point < qmin() || zero_point > qmax()) {
        throw_config("zero point " + std::to_string(zero_point) + " outside representable range");
    }
    if (is_signed && zero_point != 0) {
        throw_config("signed (weight) quantization requires zero_point == 0");
    }
}

std::int64_t round_half_even(double x) {
    const double fl = std::floor(x);
    const double frac = x - fl;
    const auto base = static_cast<std::int64_t>(fl);
    if (frac > 0.5) return base + 1;
    if (frac < 0.5) return base;
    return (base % 2 == 0) ? base : base + 1;
}

namespace {

int clamp_q(std::int64_t q, int lo, int hi) {
    if (q < lo) return lo;
    if (q > hi) return hi;
    return static_cast<int>(q);
}

constexpr double kScaleFloor = 1e-8;

}  // namespace

QuantizedTensor quantize_tensor(const Tensor& x, const QuantParams& qp) {
    qp.validate();
    QuantizedTensor out;
    out.shape = x.shape();
    out.qp = qp;
    out.q.resize(static_cast<std::size_t>(x.size()));
    const float* p = x.data();
    const double inv_scale = 1.0 / qp.scale;
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const std::int64_t q = round_half_even(static_cast<double>(p[i]) * inv_scale) + qp.zero_point;
        out.q[static_cast<std::size_t>(i)] =
            static_cast<std::int16_t>(clamp_q(q, qp.qmin(), qp.qmax()));
    }
    return out;
}

Tensor dequantize_tensor(const QuantizedTensor& t) {
    std::vector<float> vals(t.q.size());
    for (std::size_t i = 0; i < t.q.size(); ++i) {
        vals[i] = static_cast<float>((static_cast<int>(t.q[i]) - t.qp.zero_point) * t.qp.scale);
    }
    return Tensor(t.shape, std::move(vals));
}

void Observer::observe(const Tensor& t) {
    const float* p = t.data();
    for (std::int64_t i = 0; i < t.size(); ++i) {
        const double v = static_cast<double>(p[i]);
        if (count == 0 && i == 0) {
            min_seen = max_seen = v;
        } else {
            min_seen = std::min(min_seen, v);
            max_seen = std::max(max_seen, v);
        }
    }
    count += static_cast<std::uint64_t>(t.size());
}

QuantParams Observer::activation_params(bool* degenerate) const {
    if (count == 0) throw_config("observer has seen no data");
    // the representable range must include zero so that zero stays exact
    const double lo = std::min(0.0, min_seen);
    const double hi = std::max(0.0, max_seen);
    double scale = (hi - lo) / 255.0;
    bool degen = false;
    if (scale < kScaleFloor) {
        scale = kScaleFloor;
        degen = true;
    }
    if (degenerate) *degenerate = degen;
    QuantParams qp;
    qp.scale = scale;
    qp.is_signed = false;
    qp.zero_point = clamp_q(round_half_even(-lo / scale), 0, 255);
    return qp;
}

QuantParams weight_params(const Tensor& weights) {
    double max_abs = 0.0;
    const float* p = weights.data();
    for (std::int64_t i = 0; i < weights.size(); ++i) {
        max_abs = std::max(max_abs, std::abs(static_cast<double>(p[i])));
    }
    QuantParams qp;
    qp.scale = std::max(max_abs / 127.0, kScaleFloor);
    qp.zero_point = 0;
    qp.is_signed = true;
    return qp;
}

FusionPlan plan_partial_fusion(const graph::ModelGraph& model, FusionPolicy policy,
                               const std::vector<int>* explicit_unfused) {
    const std::vector<int> norm_ids = model.norm_layer_ids();
    if (norm_ids.empty()) throw_config("model has no normalization layers to plan over");

    FusionPlan plan;
    switch (policy) {
        case FusionPolicy::FuseAll:
            plan.fused_layer_ids = norm_ids;
            break;
        case FusionPolicy::FuseNone:
            plan.unfused_layer_ids = norm_ids;
            break;
        case FusionPolicy::FuseDeepHalf: {
            // the shallowest ceil(n/2) stay unfused and adaptive
            const std::size_t keep = (norm_ids.size() + 1) / 2;
            plan.unfused_layer_ids.assign(norm_ids.begin(), norm_ids.begin() + static_cast<std::ptrdiff_t>(keep));
            plan.fused_layer_ids.assign(norm_ids.begin() + static_cast<std::ptrdiff_t>(keep), norm_ids.end());
            break;
        }
        case FusionPolicy::Explicit: {
            if (!explicit_unfused) throw_config("Explicit fusion policy needs a layer id set");
            for (int id : *explicit_unfused) {
                if (std::find(norm_ids.begin(), norm_ids.end(), id) == norm_ids.end()) {
                    throw_config("layer id " + std::to_string(id) + " is not a normalization layer");
                }
            }
            for (int id : norm_ids) {
                const bool unfused = std::find(explicit_unfused->begin(), explicit_unfused->end(), id) !=
                                     explicit_unfused->end();
                (unfused ? plan.unfused_layer_ids : plan.fused_layer_ids).push_back(id);
            }
            break;
        }
    }
    return plan;
}

namespace {

// gamma / sqrt(var + eps) per channel
std::vector<double> bn_scales(const adapt::NormParams& bn) {
    std::vector<double> s(bn.mu_s.size());
    for (std::size_t c = 0; c < s.size(); ++c) {
        s[c] = static_cast<double>(bn.gamma[c]) /
               std::sqrt(static_cast<double>(bn.sigma2_s[c]) + bn.eps);
    }
    return s;
}

}  // namespace

FusedAffine fuse_affine_exact(const graph::LayerSpec& layer, const adapt::NormParams& bn) {
    if (layer.kind != graph::LayerKind::Conv2d && layer.kind != graph::LayerKind::Linear) {
        throw_config("fusion expects a Conv2d or Linear layer");
    }
    bn.validate();
    const std::int64_t c_out = layer.weights.dim(0);
    if (bn.channels() != c_out) {
        throw_shape("fusion channel mismatch: layer produces " + std::to_string(c_out) +
                    ", norm has " + std::to_string(bn.channels()));
    }
    const std::vector<double> s = bn_scales(bn);
    const std::int64_t per_ch = layer.weights.size() / c_out;
    FusedAffine fused;
    fused.weights.resize(static_cast<std::size_t>(layer.weights.size()));
    fused.bias.resize(static_cast<std::size_t>(c_out));
    const float* w = layer.weights.data();
    for (std::int64_t c = 0; c < c_out; ++c) {
        for (std::int64_t i = 0; i < per_ch; ++i) {
            fused.weights[static_cast<std::size_t>(c * per_ch + i)] =
                static_cast<double>(w[c * per_ch + i]) * s[static_cast<std::size_t>(c)];
        }
        fused.bias[static_cast<std::size_t>(c)] =
            static_cast<double>(bn.beta[static_cast<std::size_t>(c)]) +
            (static_cast<double>(layer.bias[static_cast<std::size_t>(c)]) -
             static_cast<double>(bn.mu_s[static_cast<std::size_t>(c)])) *
                s[static_cast<std::size_t>(c)];
    }
    return fused;
}

namespace {

graph::LayerSpec materialize_fused(const graph::LayerSpec& layer, const FusedAffine& fused) {
    graph::LayerSpec out = layer;
    for (std::int64_t i = 0; i < out.weights.size(); ++i) {
        out.weights.data()[i] = static_cast<float>(fused.weights[static_cast<std::size_t>(i)]);
    }
    for (std::size_t i = 0; i < out.bias.size(); ++i) {
        out.bias[i] = static_cast<float>(fused.bias[i]);
    }
    return out;
}

}  // namespace

graph::LayerSpec fuse_conv_bn(const graph::LayerSpec& conv, const adapt::NormParams& bn) {
    if (conv.kind != graph::LayerKind::Conv2d) throw_config("fuse_conv_bn expects a Conv2d layer");
    return materialize_fused(conv, fuse_affine_exact(conv, bn));
}

graph::LayerSpec fuse_linear_bn(const graph::LayerSpec& lin, const adapt::NormParams& bn) {
    if (lin.kind != graph::LayerKind::Linear) throw_config("fuse_linear_bn expects a Linear layer");
    return materialize_fused(lin, fuse_affine_exact(lin, bn));
}

QuantSchema calibrate(const graph::ModelGraph& model, const std::vector<Tensor>& calib_inputs,
                      int batches, int batch_size) {
    model.validate();
    if (calib_inputs.empty()) throw_config("calibration stream is empty");
    if (batches < 1 || batch_size < 1) throw_config("calibration needs batches >= 1 and batch_size >= 1");

    Observer input_obs;
    std::map<int, Observer> edge_obs;

    const auto& sshape = model.meta.input_shape;
    std::size_t cursor = 0;
    for (int b = 0; b < batches; ++b) {
        // assemble one (batch_size, ...) tensor, cycling through the inputs
        std::vector<std::int64_t> shape;
        shape.push_back(batch_size);
        shape.insert(shape.end(), sshape.begin(), sshape.end());
        Tensor batch = Tensor::zeros(shape);
        const std::int64_t per = Tensor::count(sshape);
        for (int i = 0; i < batch_size; ++i) {
            const Tensor& sample = calib_inputs[cursor % calib_inputs.size()];
            ++cursor;
            if (sample.size() != per) {
                throw_shape("calibration sample " + sample.shape_str() + " does not match model input");
            }
            std::copy(sample.values().begin(), sample.values().end(),
                      batch.values().begin() + static_cast<std::ptrdiff_t>(i * per));
        }

        input_obs.observe(batch);
        // frozen-mode walk with a tap at every layer output
        Tensor act = batch;
        std::vector<Tensor> residual_stack;
        for (const graph::LayerSpec& layer : model.layers) {
            switch (layer.kind) {
                case graph::LayerKind::Conv2d:
                    act = conv2d(act, layer.weights, layer.bias, layer.stride, layer.padding);
                    break;
                case graph::LayerKind::Linear:
                    act = linear(act, layer.weights, layer.bias);
                    break;
                case graph::LayerKind::Relu:
                    act = relu(act);
                    break;
                case graph::LayerKind::GlobalAvgPool:
                    act = global_avg_pool(act);
                    break;
                case graph::LayerKind::ResidualBegin:
                    residual_stack.push_back(act);
                    break;
                case graph::LayerKind::ResidualEnd:
                    act = residual_add(act, residual_stack.back());
                    residual_stack.pop_back();
                    break;
                case graph::LayerKind::BatchNorm:
                case graph::LayerKind::AdaptiveNorm:
                    act = adapt::frozen_normalize(act, layer.norm);
                    break;
            }
            edge_obs[layer.id].observe(act);
        }
    }

    QuantSchema schema;
    schema.batches = batches;
    schema.batch_size = batch_size;
    bool degen = false;
    schema.input = input_obs.activation_params(&degen);
    schema.degenerate_range |= degen;
    for (auto& [id, obs] : edge_obs) {
        schema.edges[id] = obs.activation_params(&degen);
        schema.degenerate_range |= degen;
    }
    for (const graph::LayerSpec& layer : model.layers) {
        if (layer.kind == graph::LayerKind::Conv2d || layer.kind == graph::LayerKind::Linear) {
            schema.weights[layer.id] = weight_params(layer.weights);
        }
    }
    return schema;
}

std::vector<int> QuantizedModel::island_ids() const {
    std::vector<int> ids;
    for (const QLayerSpec& l : layers) {
        if (l.kind == QLayerKind::NormIsland) ids.push_back(l.id);
    }
    return ids;
}

namespace {

QuantParams weight_params_from(const std::vector<double>& w) {
    double max_abs = 0.0;
    for (double v : w) max_abs = std::max(max_abs, std::abs(v));
    QuantParams qp;
    qp.scale = std::max(max_abs / 127.0, kScaleFloor);
    qp.zero_point = 0;
    qp.is_signed = true;
    return qp;
}

std::vector<std::int8_t> quantize_weights_i8(const std::vector<double>& w, const QuantParams& qp) {
    std::vector<std::int8_t> out(w.size());
    const double inv = 1.0 / qp.scale;
    for (std::size_t i = 0; i < w.size(); ++i) {
        out[i] = static_cast<std::int8_t>(clamp_q(round_half_even(w[i] * inv), -128, 127));
    }
    return out;
}

std::vector<std::int32_t> quantize_bias_i32(const std::vector<double>& bias, double s_in, double s_w) {
    std::vector<std::int32_t> out(bias.size());
    const double inv = 1.0 / (s_in * s_w);
    for (std::size_t i = 0; i < bias.size(); ++i) {
        const std::int64_t q = round_half_even(bias[i] * inv);
        const std::int64_t lim = std::numeric_limits<std::int32_t>::max();
        out[i] = static_cast<std::int32_t>(std::clamp<std::int64_t>(q, -lim, lim));
    }
    return out;
}

const QuantParams& edge_at(const QuantSchema& schema, int id) {
    auto it = schema.edges.find(id);
    if (it == schema.edges.end()) {
        throw_config("calibration schema is missing quantization parameters for layer " +
                     std::to_string(id));
    }
    return it->second;
}

const QuantParams& weight_qp_at(const QuantSchema& schema, int id) {
    auto it = schema.weights.find(id);
    if (it == schema.weights.end()) {
        throw_config("calibration schema is missing weight parameters for layer " +
                     std::to_string(id));
    }
    return it->second;
}

bool in_set(const std::vector<int>& v, int id) {
    return std::find(v.begin(), v.end(), id) != v.end();
}

}  // namespace

QuantizedModel quantize_model(const graph::ModelGraph& model, const FusionPlan& plan,
                              const QuantSchema& schema) {
    model.validate();
    {
        // the plan must cover the model's norm layers exactly once
        std::vector<int> covered = plan.unfused_layer_ids;
        covered.insert(covered.end(), plan.fused_layer_ids.begin(), plan.fused_layer_ids.end());
        std::sort(covered.begin(), covered.end());
        std::vector<int> norm_ids = model.norm_layer_ids();
        std::sort(norm_ids.begin(), norm_ids.end());
        if (covered != norm_ids) throw_config("fusion plan does not cover the norm layers exactly");
    }

    QuantizedModel qm;
    qm.meta = model.meta;
    qm.plan = plan;
    qm.input_qp = schema.input;

    QuantParams cur_edge = schema.input;
    const auto& layers = model.layers;
    std::size_t i = 0;
    while (i < layers.size()) {
        const graph::LayerSpec& L = layers[i];
        switch (L.kind) {
            case graph::LayerKind::ResidualBegin:
            case graph::LayerKind::ResidualEnd:
                throw_config("residual blocks are not supported in the int8 path");

            case graph::LayerKind::Conv2d:
            case graph::LayerKind::Linear: {
                const bool is_conv = L.kind == graph::LayerKind::Conv2d;
                QLayerSpec q;
                q.kind = is_conv ? QLayerKind::QConv2d : QLayerKind::QLinear;
                q.id = L.id;
                q.fused_ids = {L.id};
                q.stride = L.stride;
                q.padding = L.padding;
                int out_edge = L.id;
                bool fused_bn = false;

                FusedAffine eff;
                eff.weights.assign(L.weights.values().begin(), L.weights.values().end());
                eff.bias.assign(L.bias.begin(), L.bias.end());
                if (i + 1 < layers.size() && layers[i + 1].is_norm() &&
                    in_set(plan.fused_layer_ids, layers[i + 1].id)) {
                    const graph::LayerSpec& bn = layers[i + 1];
                    eff = fuse_affine_exact(L, bn.norm);
                    q.fused_ids.push_back(bn.id);
                    out_edge = bn.id;
                    fused_bn = true;
                    ++i;
                }
                if (i + 1 < layers.size() && layers[i + 1].kind == graph::LayerKind::Relu) {
                    // adjacent relu folds into the requantization clamp; an
                    // unfused norm between conv and relu lands in the island
                    // branch instead
                    q.relu_folded = true;
                    q.fused_ids.push_back(layers[i + 1].id);
                    out_edge = layers[i + 1].id;
                    ++i;
                }

                q.wqp = fused_bn ? weight_params_from(eff.weights) : weight_qp_at(schema, L.id);
                q.wq = quantize_weights_i8(eff.weights, q.wqp);
                q.wshape = L.weights.shape();
                q.in_qp = cur_edge;
                q.out_qp = edge_at(schema, out_edge);
                q.bias_q = quantize_bias_i32(eff.bias, q.in_qp.scale, q.wqp.scale);
                cur_edge = q.out_qp;
                qm.layers.push_back(std::move(q));
                break;
            }

            case graph::LayerKind::BatchNorm:
            case graph::LayerKind::AdaptiveNorm: {
                if (in_set(plan.fused_layer_ids, L.id)) {
                    throw_config("norm layer " + std::to_string(L.id) +
                                 " is marked fused but has no preceding conv/linear producer");
                }
                QLayerSpec q;
                q.kind = QLayerKind::NormIsland;
                q.id = L.id;
                q.fused_ids = {L.id};
                q.norm = L.norm;
                q.in_qp = cur_edge;
                int out_edge = L.id;
                if (i + 1 < layers.size() && layers[i + 1].kind == graph::LayerKind::Relu) {
                    q.relu_folded = true;
                    q.fused_ids.push_back(layers[i + 1].id);
                    out_edge = layers[i + 1].id;
                    ++i;
                }
                q.out_qp = edge_at(schema, out_edge);
                cur_edge = q.out_qp;
                qm.layers.push_back(std::move(q));
                break;
            }

            case graph::LayerKind::Relu: {
                QLayerSpec q;
                q.kind = QLayerKind::QRelu;
                q.id = L.id;
                q.fused_ids = {L.id};
                q.in_qp = cur_edge;
                q.out_qp = cur_edge;  // clamp at the zero point is exact in the quantized domain
                qm.layers.push_back(std::move(q));
                break;
            }

            case graph::LayerKind::GlobalAvgPool: {
                QLayerSpec q;
                q.kind = QLayerKind::QGlobalAvgPool;
                q.id = L.id;
                q.fused_ids = {L.id};
                q.in_qp = cur_edge;
                q.out_qp = cur_edge;  // integer mean keeps the input parameters
                qm.layers.push_back(std::move(q));
                break;
            }
        }
        ++i;
    }
    return qm;
}

namespace {

struct QAct {
    std::vector<std::int64_t> shape;
    std::vector<std::uint8_t> q;

    std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(q.size()); }
};

std::uint64_t norm_island_budget(std::int64_t channels, std::int64_t positions, bool adaptive) {
    const std::uint64_t c = static_cast<std::uint64_t>(channels);
    const std::uint64_t p = static_cast<std::uint64_t>(positions);
    const std::uint64_t frozen = 2 * c * p + c;
    return adaptive ? frozen + c * p + 12 * c : frozen;
}

}  // namespace

graph::ForwardResult forward(const QuantizedModel& model, const Tensor& input,
                             const QForwardOptions& opts) {
    std::vector<std::int64_t> expected;
    expected.push_back(input.dim(0));
    expected.insert(expected.end(), model.meta.input_shape.begin(), model.meta.input_shape.end());
    if (input.shape() != expected) {
        throw_shape("quantized forward input " + input.shape_str() + " does not match model input");
    }

    graph::ForwardResult result;
    if (opts.trace) result.trace.emplace();

    // quantize the input edge
    QAct act;
    act.shape = input.shape();
    act.q.resize(static_cast<std::size_t>(input.size()));
    {
        const QuantParams& qp = model.input_qp;
        const double inv = 1.0 / qp.scale;
        const float* p = input.data();
        for (std::int64_t idx = 0; idx < input.size(); ++idx) {
            act.q[static_cast<std::size_t>(idx)] = static_cast<std::uint8_t>(
                clamp_q(round_half_even(static_cast<double>(p[idx]) * inv) + qp.zero_point, 0, 255));
        }
        if (opts.counts) {
            opts.counts->float_mults += static_cast<std::uint64_t>(input.size());
            opts.counts->requant_events += static_cast<std::uint64_t>(input.size());
        }
    }

    for (const QLayerSpec& layer : model.layers) {
        switch (layer.kind) {
            case QLayerKind::QConv2d: {
                if (act.shape.size() != 4 || layer.wshape.size() != 4) {
                    throw_shape("int8 conv needs rank-4 activation and weights");
                }
                const std::int64_t n_batch = act.dim(0), c_in = act.dim(1);
                const std::int64_t h_in = act.dim(2), w_in = act.dim(3);
                const std::int64_t c_out = layer.wshape[0], kh = layer.wshape[2], kw = layer.wshape[3];
                if (layer.wshape[1] != c_in) throw_shape("int8 conv channel mismatch");
                const std::int64_t h_out = conv_out_extent(h_in, kh, layer.stride, layer.padding);
                const std::int64_t w_out = conv_out_extent(w_in, kw, layer.stride, layer.padding);

                QAct out;
                out.shape = {n_batch, c_out, h_out, w_out};
                out.q.resize(static_cast<std::size_t>(n_batch * c_out * h_out * w_out));

                const int zp_in = layer.in_qp.zero_point;
                const int zp_out = layer.out_qp.zero_point;
                const double rescale = layer.in_qp.scale * layer.wqp.scale / layer.out_qp.scale;
                const int lo = layer.relu_folded ? zp_out : 0;
                const std::int64_t out_plane = h_out * w_out;
                const std::int64_t total = n_batch * c_out * out_plane;

#pragma omp parallel for schedule(static)
                for (std::int64_t idx = 0; idx < total; ++idx) {
                    const std::int64_t n = idx / (c_out * out_plane);
                    const std::int64_t co = (idx / out_plane) % c_out;
                    const std::int64_t oy = (idx % out_plane) / w_out;
                    const std::int64_t ox = idx % w_out;
                    std::int32_t acc = layer.bias_q[static_cast<std::size_t>(co)];
                    for (std::int64_t ci = 0; ci < c_in; ++ci) {
                        const std::uint8_t* in_ch = act.q.data() + (n * c_in + ci) * h_in * w_in;
                        const std::int8_t* wt_ch = layer.wq.data() + (co * c_in + ci) * kh * kw;
                        for (std::int64_t ky = 0; ky < kh; ++ky) {
                            const std::int64_t y = oy * layer.stride + ky - layer.padding;
                            if (y < 0 || y >= h_in) continue;
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                const std::int64_t x = ox * layer.stride + kx - layer.padding;
                                if (x < 0 || x >= w_in) continue;
                                acc += (static_cast<std::int32_t>(in_ch[y * w_in + x]) - zp_in) *
                                       static_cast<std::int32_t>(wt_ch[ky * kw + kx]);
                            }
                        }
                    }
                    out.q[static_cast<std::size_t>(idx)] = static_cast<std::uint8_t>(
                        clamp_q(round_half_even(static_cast<double>(acc) * rescale) + zp_out, lo, 255));
                }
                if (opts.counts) {
                    opts.counts->int_mults += static_cast<std::uint64_t>(total) *
                                              static_cast<std::uint64_t>(c_in * kh * kw);
                    opts.counts->float_mults += static_cast<std::uint64_t>(total);
                    opts.counts->requant_events += static_cast<std::uint64_t>(total);
                }
                act = std::move(out);
                break;
            }

            case QLayerKind::QLinear: {
                if (act.shape.size() != 2 || layer.wshape.size() != 2) {
                    throw_shape("int8 linear needs rank-2 activation and weights");
                }
                const std::int64_t n_batch = act.dim(0), f_in = act.dim(1);
                const std::int64_t f_out = layer.wshape[0];
                if (layer.wshape[1] != f_in) throw_shape("int8 linear feature mismatch");
                QAct out;
                out.shape = {n_batch, f_out};
                out.q.resize(static_cast<std::size_t>(n_batch * f_out));
                const int zp_in = layer.in_qp.zero_point;
                const int zp_out = layer.out_qp.zero_point;
                const double rescale = layer.in_qp.scale * layer.wqp.scale / layer.out_qp.scale;
                const int lo = layer.relu_folded ? zp_out : 0;
                const std::int64_t total = n_batch * f_out;

#pragma omp parallel for schedule(static)
                for (std::int64_t idx = 0; idx < total; ++idx) {
                    const std::int64_t n = idx / f_out;
                    const std::int64_t fo = idx % f_out;
                    std::int32_t acc = layer.bias_q[static_cast<std::size_t>(fo)];
                    const std::uint8_t* row = act.q.data() + n * f_in;
                    const std::int8_t* wrow = layer.wq.data() + fo * f_in;
                    for (std::int64_t fi = 0; fi < f_in; ++fi) {
                        acc += (static_cast<std::int32_t>(row[fi]) - zp_in) *
                               static_cast<std::int32_t>(wrow[fi]);
                    }
                    out.q[static_cast<std::size_t>(idx)] = static_cast<std::uint8_t>(
                        clamp_q(round_half_even(static_cast<double>(acc) * rescale) + zp_out, lo, 255));
                }
                if (opts.counts) {
                    opts.counts->int_mults += static_cast<std::uint64_t>(total) *
                                              static_cast<std::uint64_t>(f_in);
                    opts.counts->float_mults += static_cast<std::uint64_t>(total);
                    opts.counts->requant_events += static_cast<std::uint64_t>(total);
                }
                act = std::move(out);
                break;
            }

            case QLayerKind::NormIsland: {
                // dequantize, run the float normalization, requantize
                std::vector<float> vals(act.q.size());
                const int zp_in = layer.in_qp.zero_point;
                for (std::size_t k = 0; k < act.q.size(); ++k) {
                    vals[k] = static_cast<float>((static_cast<int>(act.q[k]) - zp_in) *
                                                 layer.in_qp.scale);
                }
                Tensor fact(act.shape, std::move(vals));
                const std::int64_t channels = fact.dim(1);
                const std::int64_t positions = fact.size() / channels;
                const bool adaptive = opts.mode == graph::RunMode::Adapt;

                Tensor normed;
                if (adaptive) {
                    auto [out, rec] = adapt::adaptive_normalize(fact, layer.norm, opts.cfg);
                    normed = std::move(out);
                    rec.layer_id = layer.id;
                    if (result.trace) result.trace->records.push_back(std::move(rec));
                } else {
                    normed = adapt::frozen_normalize(fact, layer.norm);
                }
                if (layer.relu_folded) {
                    // the requant clamp below handles it: values < 0 map below zp_out
                }

                QAct out;
                out.shape = act.shape;
                out.q.resize(act.q.size());
                const QuantParams& qp = layer.out_qp;
                const double inv = 1.0 / qp.scale;
                const int lo = layer.relu_folded ? qp.zero_point : 0;
                const float* np = normed.data();
                for (std::size_t k = 0; k < out.q.size(); ++k) {
                    out.q[k] = static_cast<std::uint8_t>(
                        clamp_q(round_half_even(static_cast<double>(np[k]) * inv) + qp.zero_point,
                                lo, 255));
                }
                if (opts.counts) {
                    const std::uint64_t n = static_cast<std::uint64_t>(act.q.size());
                    opts.counts->dequant_events += n;
                    opts.counts->requant_events += n;
                    opts.counts->float_mults += 2 * n + norm_island_budget(channels, positions, adaptive);
                }
                act = std::move(out);
                break;
            }

            case QLayerKind::QRelu: {
                const std::uint8_t zp = static_cast<std::uint8_t>(layer.in_qp.zero_point);
                for (auto& v : act.q) v = std::max(v, zp);
                break;
            }

            case QLayerKind::QGlobalAvgPool: {
                if (act.shape.size() != 4) throw_shape("int8 pooling needs a rank-4 activation");
                const std::int64_t n_batch = act.dim(0), c = act.dim(1);
                const std::int64_t plane = act.dim(2) * act.dim(3);
                QAct out;
                out.shape = {n_batch, c};
                out.q.resize(static_cast<std::size_t>(n_batch * c));
                for (std::int64_t idx = 0; idx < n_batch * c; ++idx) {
                    std::int64_t sum = 0;
                    const std::uint8_t* src = act.q.data() + idx * plane;
                    for (std::int64_t k = 0; k < plane; ++k) sum += src[k];
                    out.q[static_cast<std::size_t>(idx)] = static_cast<std::uint8_t>(clamp_q(
                        round_half_even(static_cast<double>(sum) / static_cast<double>(plane)), 0, 255));
                }
                if (opts.counts) {
                    opts.counts->int_mults += static_cast<std::uint64_t>(n_batch * c);
                }
                act = std::move(out);
                break;
            }
        }
    }

    // dequantize the final edge into float logits
    const QuantParams& last = model.layers.empty() ? model.input_qp : model.layers.back().out_qp;
    std::vector<float> vals(act.q.size());
    for (std::size_t k = 0; k < act.q.size(); ++k) {
        vals[k] = static_cast<float>((static_cast<int>(act.q[k]) - last.zero_point) * last.scale);
    }
    if (opts.counts) {
        opts.counts->dequant_events += static_cast<std::uint64_t>(act.q.size());
        opts.counts->float_mults += static_cast<std::uint64_t>(act.q.size());
    }
    result.logits = Tensor(act.shape, std::move(vals));
    return result;
}

namespace {

void write_qp(io::Writer& w, const QuantParams& qp) {
    w.f64(qp.scale);
    w.i32(qp.zero_point);
    w.u8(qp.is_signed ? 1 : 0);
}

QuantParams read_qp(io::Reader& r) {
    QuantParams qp;
    qp.scale = r.f64();
    qp.zero_point = r.i32();
    qp.is_signed = r.u8() != 0;
    return qp;
}

void write_norm(io::Writer& w, const adapt::NormParams& n) {
    w.f64(n.eps);
    w.f32_array(n.mu_s);
    w.f32_array(n.sigma2_s);
    w.f32_array(n.gamma);
    w.f32_array(n.beta);
}

adapt::NormParams read_norm(io::Reader& r) {
    adapt::NormParams n;
    n.eps = r.f64();
    n.mu_s = r.f32_array();
    n.sigma2_s = r.f32_array();
    n.gamma = r.f32_array();
    n.beta = r.f32_array();
    return n;
}

void write_id_list(io::Writer& w, const std::vector<int>& ids) {
    w.u64(ids.size());
    for (int id : ids) w.i32(id);
}

std::vector<int> read_id_list(io::Reader& r) {
    const std::uint64_t n = r.u64();
    if (n > (1ULL << 20)) throw_parse("implausible id list length in " + r.path());
    std::vector<int> ids(n);
    for (auto& id : ids) id = r.i32();
    return ids;
}

}  // namespace

void save_quantized_model(const QuantizedModel& model, const std::string& path) {
    io::Writer w(path);
    w.bytes("LTTA", 4);
    w.u32(kQuantModelFormatVersion);
    w.str(model.meta.name);
    w.u32(static_cast<std::uint32_t>(model.meta.input_shape.size()));
    for (std::int64_t d : model.meta.input_shape) w.i64(d);
    w.u32(static_cast<std::uint32_t>(model.meta.class_count));
    write_id_list(w, model.plan.unfused_layer_ids);
    write_id_list(w, model.plan.fused_layer_ids);
    write_qp(w, model.input_qp);
    w.u64(model.layers.size());
    for (const QLayerSpec& l : model.layers) {
        w.u8(static_cast<std::uint8_t>(l.kind));
        w.i32(l.id);
        write_id_list(w, l.fused_ids);
        write_qp(w, l.in_qp);
        write_qp(w, l.out_qp);
        w.u8(l.relu_folded ? 1 : 0);
        switch (l.kind) {
            case QLayerKind::QConv2d:
                w.i32(l.stride);
                w.i32(l.padding);
                [[fallthrough]];
            case QLayerKind::QLinear:
                w.u32(static_cast<std::uint32_t>(l.wshape.size()));
                for (std::int64_t d : l.wshape) w.i64(d);
                w.i8_array(l.wq);
                write_qp(w, l.wqp);
                w.i32_array(l.bias_q);
                break;
            case QLayerKind::NormIsland:
                write_norm(w, l.norm);
                break;
            default:
                break;
        }
    }
    w.close();
}

QuantizedModel load_quantized_model(const std::string& path) {
    io::Reader r(path);
    r.expect_magic("LTTA");
    const std::uint32_t version = r.u32();
    if (version != kQuantModelFormatVersion) {
        throw_version("unsupported quantized model format version " + std::to_string(version) +
                      " (expected " + std::to_string(kQuantModelFormatVersion) + ") in " + path);
    }
    QuantizedModel m;
    m.meta.name = r.str();
    const std::uint32_t rank = r.u32();
    m.meta.input_shape.resize(rank);
    for (auto& d : m.meta.input_shape) d = r.i64();
    m.meta.class_count = r.u32();
    m.plan.unfused_layer_ids = read_id_list(r);
    m.plan.fused_layer_ids = read_id_list(r);
    m.input_qp = read_qp(r);
    const std::uint64_t n = r.u64();
    m.layers.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        QLayerSpec l;
        const std::uint8_t tag = r.u8();
        if (tag < 1 || tag > 5) {
            throw_version("unknown quantized layer kind tag " + std::to_string(tag) +
                          " at byte offset " + std::to_string(r.offset() - 1) + " in " + path);
        }
        l.kind = static_cast<QLayerKind>(tag);
        l.id = r.i32();
        l.fused_ids = read_id_list(r);
        l.in_qp = read_qp(r);
        l.out_qp = read_qp(r);
        l.relu_folded = r.u8() != 0;
        switch (l.kind) {
            case QLayerKind::QConv2d:
                l.stride = r.i32();
                l.padding = r.i32();
                [[fallthrough]];
            case QLayerKind::QLinear: {
                const std::uint32_t wrank = r.u32();
                l.wshape.resize(wrank);
                for (auto& d : l.wshape) d = r.i64();
                l.wq = r.i8_array();
                l.wqp = read_qp(r);
                l.bias_q = r.i32_array();
                break;
            }
            case QLayerKind::NormIsland:
                l.norm = read_norm(r);
                break;
            default:
                break;
        }
        m.layers.push_back(std::move(l));
    }
    return m;
}

}  // namespace leantta::quant
