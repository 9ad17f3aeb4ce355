#include "leantta/graph.hpp"

#include <algorithm>
#include <sstream>

#include "leantta/io.hpp"

namespace leantta::graph {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2d: return "Conv2d";
        case LayerKind::Linear: return "Linear";
        case LayerKind::BatchNorm: return "BatchNorm";
        case LayerKind::AdaptiveNorm: return "AdaptiveNorm";
        case LayerKind::Relu: return "Relu";
        case LayerKind::GlobalAvgPool: return "GlobalAvgPool";
        case LayerKind::ResidualBegin: return "ResidualBegin";
        case LayerKind::ResidualEnd: return "ResidualEnd";
    }
    return "?";
}

namespace {

std::vector<std::int64_t> with_batch(const std::vector<std::int64_t>& shape, std::int64_t n) {
    std::vector<std::int64_t> s;
    s.reserve(shape.size() + 1);
    s.push_back(n);
    s.insert(s.end(), shape.begin(), shape.end());
    return s;
}

// Symbolic shape propagation used by validate(); throws on any mismatch.
std::vector<std::int64_t> infer_output_shape(const ModelGraph& model) {
    std::vector<std::int64_t> shape = with_batch(model.meta.input_shape, 1);
    std::vector<std::vector<std::int64_t>> residual_stack;

    for (const LayerSpec& layer : model.layers) {
        switch (layer.kind) {
            case LayerKind::Conv2d: {
                if (shape.size() != 4) throw_shape("Conv2d layer " + std::to_string(layer.id) + " needs rank-4 input");
                if (layer.weights.rank() != 4) throw_shape("Conv2d layer " + std::to_string(layer.id) + " has malformed weights");
                if (layer.weights.dim(1) != shape[1]) {
                    throw_shape("Conv2d layer " + std::to_string(layer.id) + " expects " +
                                std::to_string(layer.weights.dim(1)) + " channels, got " +
                                std::to_string(shape[1]));
                }
                const std::int64_t h = conv_out_extent(shape[2], layer.weights.dim(2), layer.stride, layer.padding);
                const std::int64_t w = conv_out_extent(shape[3], layer.weights.dim(3), layer.stride, layer.padding);
                shape = {shape[0], layer.weights.dim(0), h, w};
                break;
            }
            case LayerKind::Linear: {
                if (shape.size() != 2) throw_shape("Linear layer " + std::to_string(layer.id) + " needs rank-2 input");
                if (layer.weights.dim(1) != shape[1]) {
                    throw_shape("Linear layer " + std::to_string(layer.id) + " expects " +
                                std::to_string(layer.weights.dim(1)) + " features, got " +
                                std::to_string(shape[1]));
                }
                shape = {shape[0], layer.weights.dim(0)};
                break;
            }
            case LayerKind::BatchNorm:
            case LayerKind::AdaptiveNorm: {
                layer.norm.validate();
                if (shape.size() != 2 && shape.size() != 4) {
                    throw_shape("norm layer " + std::to_string(layer.id) + " needs rank-2 or rank-4 input");
                }
                if (layer.norm.channels() != shape[1]) {
                    throw_shape("norm layer " + std::to_string(layer.id) + " has " +
                                std::to_string(layer.norm.channels()) + " channels, activation has " +
                                std::to_string(shape[1]));
                }
                break;
            }
            case LayerKind::Relu:
                break;
            case LayerKind::GlobalAvgPool:
                if (shape.size() != 4) throw_shape("GlobalAvgPool layer " + std::to_string(layer.id) + " needs rank-4 input");
                shape = {shape[0], shape[1]};
                break;
            case LayerKind::ResidualBegin:
                residual_stack.push_back(shape);
                break;
            case LayerKind::ResidualEnd:
                if (residual_stack.empty()) {
                    throw_shape("ResidualEnd layer " + std::to_string(layer.id) + " has no matching ResidualBegin");
                }
                if (residual_stack.back() != shape) {
                    throw_shape("residual branch shape changed across layer " + std::to_string(layer.id));
                }
                residual_stack.pop_back();
                break;
        }
    }
    if (!residual_stack.empty()) throw_shape("unterminated ResidualBegin in model");
    return shape;
}

}  // namespace

void ModelGraph::validate() const {
    if (layers.empty()) throw_config("model has no layers");
    if (meta.input_shape.empty()) throw_config("model metadata is missing the input shape");
    if (meta.class_count < 1) throw_config("model metadata is missing the class count");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].id != static_cast<int>(i)) {
            throw_config("layer ids must equal their depth index");
        }
    }
    const auto out = infer_output_shape(*this);
    if (out.size() != 2 || out[1] != meta.class_count) {
        throw_shape("model output is not (N, class_count)");
    }
}

std::vector<int> ModelGraph::norm_layer_ids() const {
    std::vector<int> ids;
    for (const LayerSpec& l : layers) {
        if (l.is_norm()) ids.push_back(l.id);
    }
    return ids;
}

const LayerSpec& ModelGraph::layer_by_id(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= layers.size()) {
        throw_config("layer id out of range: " + std::to_string(id));
    }
    return layers[static_cast<std::size_t>(id)];
}

namespace {

// Analytic float-multiply budget of one normalization layer; keeping the
// counts shape-derived makes profiles reproducible regardless of threading.
std::uint64_t norm_op_budget(std::int64_t channels, std::int64_t positions, bool adaptive) {
    const std::uint64_t c = static_cast<std::uint64_t>(channels);
    const std::uint64_t p = static_cast<std::uint64_t>(positions);
    // frozen: scale+shift per element plus one inverse-sqrt per channel
    const std::uint64_t frozen = 2 * c * p + c;
    if (!adaptive) return frozen;
    // stats: one square per element plus two 1/n scalings per channel;
    // stabilize/blend: four products per channel each; divergence: two per channel
    return frozen + c * p + 12 * c;
}

}  // namespace

ForwardResult forward(const ModelGraph& model, const Tensor& input, const ForwardOptions& opts) {
    const auto expected = with_batch(model.meta.input_shape, input.dim(0));
    if (input.shape() != expected) {
        throw_shape("forward input " + input.shape_str() + " does not match model input shape");
    }

    ForwardResult result;
    if (opts.trace) result.trace.emplace();

    Tensor act = input;
    std::vector<Tensor> residual_stack;

    for (const LayerSpec& layer : model.layers) {
        switch (layer.kind) {
            case LayerKind::Conv2d:
                act = conv2d(act, layer.weights, layer.bias, layer.stride, layer.padding, opts.counts);
                break;
            case LayerKind::Linear:
                act = linear(act, layer.weights, layer.bias, opts.counts);
                break;
            case LayerKind::Relu:
                act = relu(act, opts.counts);
                break;
            case LayerKind::GlobalAvgPool:
                act = global_avg_pool(act, opts.counts);
                break;
            case LayerKind::ResidualBegin:
                residual_stack.push_back(act);
                break;
            case LayerKind::ResidualEnd:
                if (residual_stack.empty()) {
                    throw_shape("ResidualEnd layer " + std::to_string(layer.id) +
                                " has no matching ResidualBegin");
                }
                act = residual_add(act, residual_stack.back(), opts.counts);
                residual_stack.pop_back();
                break;
            case LayerKind::BatchNorm:
            case LayerKind::AdaptiveNorm: {
                const std::int64_t channels = act.dim(1);
                const std::int64_t positions = act.size() / channels;
                if (opts.stats_hook) {
                    adapt::ChannelStats inst = adapt::instance_stats(act);
                    std::vector<double> mu, sigma2;
                    opts.stats_hook->norm_stats(layer.id, inst, layer.norm, mu, sigma2);
                    act = adapt::normalize_with(act, mu, sigma2, layer.norm, layer.norm.eps);
                    if (opts.counts) {
                        opts.counts->float_mults += norm_op_budget(channels, positions, true);
                    }
                } else if (opts.mode == RunMode::Adapt && layer.kind == LayerKind::AdaptiveNorm &&
                           (!opts.adapt_ids ||
                            std::find(opts.adapt_ids->begin(), opts.adapt_ids->end(), layer.id) !=
                                opts.adapt_ids->end())) {
                    auto [out, rec] = adapt::adaptive_normalize(act, layer.norm, opts.cfg);
                    act = std::move(out);
                    rec.layer_id = layer.id;
                    if (result.trace) result.trace->records.push_back(std::move(rec));
                    if (opts.counts) {
                        opts.counts->float_mults += norm_op_budget(channels, positions, true);
                    }
                } else {
                    act = adapt::frozen_normalize(act, layer.norm);
                    if (opts.counts) {
                        opts.counts->float_mults += norm_op_budget(channels, positions, false);
                    }
                }
                break;
            }
        }
        if (!act.all_finite()) {
            throw_numeric("non-finite activation after layer " + std::to_string(layer.id) + " (" +
                          layer_kind_name(layer.kind) + ")");
        }
    }
    result.logits = std::move(act);
    return result;
}

ModelGraph replace_norm_layers(const ModelGraph& model, const std::vector<int>* ids) {
    if (model.layers.empty()) throw_config("cannot replace norm layers in an empty model");

    std::vector<int> batchnorm_ids;
    for (const LayerSpec& l : model.layers) {
        if (l.kind == LayerKind::BatchNorm) batchnorm_ids.push_back(l.id);
    }
    if (batchnorm_ids.empty()) throw_config("model contains no BatchNorm layers to replace");

    if (ids) {
        for (int id : *ids) {
            if (std::find(batchnorm_ids.begin(), batchnorm_ids.end(), id) == batchnorm_ids.end()) {
                throw_config("layer id " + std::to_string(id) + " is not a BatchNorm layer");
            }
        }
    }

    ModelGraph out = model;
    for (LayerSpec& l : out.layers) {
        if (l.kind != LayerKind::BatchNorm) continue;
        if (ids && std::find(ids->begin(), ids->end(), l.id) == ids->end()) continue;
        l.kind = LayerKind::AdaptiveNorm;
    }
    return out;
}

namespace {

void write_tensor(io::Writer& w, const Tensor& t) {
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::int64_t d : t.shape()) w.i64(d);
    w.f32_array(t.values());
}

Tensor read_tensor(io::Reader& r) {
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 4) {
        throw_parse("bad tensor rank " + std::to_string(rank) + " at byte offset " +
                    std::to_string(r.offset() - 4) + " in " + r.path());
    }
    std::vector<std::int64_t> shape(rank);
    for (auto& d : shape) d = r.i64();
    std::vector<float> data = r.f32_array();
    if (static_cast<std::int64_t>(data.size()) != Tensor::count(shape)) {
        throw_parse("tensor payload length mismatch at byte offset " + std::to_string(r.offset()) +
                    " in " + r.path());
    }
    return Tensor(std::move(shape), std::move(data));
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

void write_manifest(const ModelGraph& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw_io("cannot open for writing: " + path);
    out << "format=LTTA\n";
    out << "version=" << kModelFormatVersion << "\n";
    out << "name=" << model.meta.name << "\n";
    out << "input_shape=";
    for (std::size_t i = 0; i < model.meta.input_shape.size(); ++i) {
        out << (i ? "x" : "") << model.meta.input_shape[i];
    }
    out << "\n";
    out << "class_count=" << model.meta.class_count << "\n";
    out << "layer_count=" << model.layers.size() << "\n";
    for (const LayerSpec& l : model.layers) {
        out << "layer." << l.id << "=" << layer_kind_name(l.kind);
        if (l.kind == LayerKind::Conv2d) {
            out << " out=" << l.weights.dim(0) << " in=" << l.weights.dim(1) << " k="
                << l.weights.dim(2) << "x" << l.weights.dim(3) << " stride=" << l.stride
                << " pad=" << l.padding;
        } else if (l.kind == LayerKind::Linear) {
            out << " out=" << l.weights.dim(0) << " in=" << l.weights.dim(1);
        } else if (l.is_norm()) {
            out << " channels=" << l.norm.channels();
        }
        out << "\n";
    }
    if (!out) throw_io("write failed: " + path);
}

}  // namespace

void save_model(const ModelGraph& model, const std::string& path) {
    model.validate();
    io::Writer w(path);
    w.bytes("LTTA", 4);
    w.u32(kModelFormatVersion);
    w.str(model.meta.name);
    w.u32(static_cast<std::uint32_t>(model.meta.input_shape.size()));
    for (std::int64_t d : model.meta.input_shape) w.i64(d);
    w.u32(static_cast<std::uint32_t>(model.meta.class_count));
    w.u64(model.layers.size());
    for (const LayerSpec& l : model.layers) {
        w.u8(static_cast<std::uint8_t>(l.kind));
        w.i32(l.id);
        switch (l.kind) {
            case LayerKind::Conv2d:
                w.i32(l.stride);
                w.i32(l.padding);
                write_tensor(w, l.weights);
                w.f32_array(l.bias);
                break;
            case LayerKind::Linear:
                write_tensor(w, l.weights);
                w.f32_array(l.bias);
                break;
            case LayerKind::BatchNorm:
            case LayerKind::AdaptiveNorm:
                write_norm(w, l.norm);
                break;
            default:
                break;
        }
    }
    w.close();
    write_manifest(model, path + ".manifest");
}

ModelGraph load_model(const std::string& path) {
    io::Reader r(path);
    r.expect_magic("LTTA");
    const std::uint32_t version = r.u32();
    if (version != kModelFormatVersion) {
        throw_version("unsupported model format version " + std::to_string(version) +
                      " (expected " + std::to_string(kModelFormatVersion) + ") in " + path);
    }
    ModelGraph model;
    model.meta.name = r.str();
    const std::uint32_t rank = r.u32();
    model.meta.input_shape.resize(rank);
    for (auto& d : model.meta.input_shape) d = r.i64();
    model.meta.class_count = r.u32();
    const std::uint64_t layer_count = r.u64();
    model.layers.reserve(layer_count);
    for (std::uint64_t i = 0; i < layer_count; ++i) {
        LayerSpec l;
        const std::uint8_t tag = r.u8();
        if (tag < 1 || tag > 8) {
            throw_version("unknown layer kind tag " + std::to_string(tag) + " at byte offset " +
                          std::to_string(r.offset() - 1) + " in " + path);
        }
        l.kind = static_cast<LayerKind>(tag);
        l.id = r.i32();
        switch (l.kind) {
            case LayerKind::Conv2d:
                l.stride = r.i32();
                l.padding = r.i32();
                l.weights = read_tensor(r);
                l.bias = r.f32_array();
                break;
            case LayerKind::Linear:
                l.weights = read_tensor(r);
                l.bias = r.f32_array();
                break;
            case LayerKind::BatchNorm:
            case LayerKind::AdaptiveNorm:
                l.norm = read_norm(r);
                break;
            default:
                break;
        }
        model.layers.push_back(std::move(l));
    }
    model.validate();
    return model;
}

}  // namespace leantta::graph
