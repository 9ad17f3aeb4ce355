#pragma once

// Shared helpers for building small random models and tensors in tests.

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "leantta/graph.hpp"
#include "leantta/rng.hpp"

namespace testutil {

// Scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("leantta_" + tag);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

using namespace leantta;

inline Tensor random_tensor(std::vector<std::int64_t> shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
    std::vector<float> v(static_cast<std::size_t>(Tensor::count(shape)));
    for (auto& x : v) x = static_cast<float>(lo + (hi - lo) * rng.next_double());
    return Tensor(std::move(shape), std::move(v));
}

inline adapt::NormParams random_norm(std::int64_t channels, Rng& rng) {
    adapt::NormParams p;
    for (std::int64_t c = 0; c < channels; ++c) {
        p.mu_s.push_back(static_cast<float>(rng.next_double() - 0.5));
        p.sigma2_s.push_back(static_cast<float>(0.3 + rng.next_double()));
        p.gamma.push_back(static_cast<float>(0.5 + rng.next_double()));
        p.beta.push_back(static_cast<float>(rng.next_double() - 0.5));
    }
    return p;
}

inline graph::LayerSpec linear_layer(int id, std::int64_t out, std::int64_t in, Rng& rng) {
    graph::LayerSpec l;
    l.kind = graph::LayerKind::Linear;
    l.id = id;
    l.weights = random_tensor({out, in}, rng, -0.7, 0.7);
    l.bias.resize(static_cast<std::size_t>(out));
    for (auto& b : l.bias) b = static_cast<float>(rng.next_double() - 0.5);
    return l;
}

inline graph::LayerSpec conv_layer(int id, std::int64_t cout, std::int64_t cin, Rng& rng) {
    graph::LayerSpec l;
    l.kind = graph::LayerKind::Conv2d;
    l.id = id;
    l.weights = random_tensor({cout, cin, 3, 3}, rng, -0.5, 0.5);
    l.bias.resize(static_cast<std::size_t>(cout));
    for (auto& b : l.bias) b = static_cast<float>(rng.next_double() - 0.5);
    l.stride = 1;
    l.padding = 1;
    return l;
}

inline graph::LayerSpec norm_layer(int id, std::int64_t channels, Rng& rng, bool adaptive = false) {
    graph::LayerSpec l;
    l.kind = adaptive ? graph::LayerKind::AdaptiveNorm : graph::LayerKind::BatchNorm;
    l.id = id;
    l.norm = random_norm(channels, rng);
    return l;
}

inline graph::LayerSpec plain(int id, graph::LayerKind kind) {
    graph::LayerSpec l;
    l.kind = kind;
    l.id = id;
    return l;
}

// Linear -> BN -> ReLU -> Linear -> BN -> ReLU -> Linear over feature vectors.
inline graph::ModelGraph random_mlp(std::int64_t dim, std::int64_t hidden, std::int64_t classes,
                                    std::uint64_t seed) {
    Rng rng(seed);
    graph::ModelGraph m;
    m.meta.name = "test-mlp";
    m.meta.input_shape = {dim};
    m.meta.class_count = classes;
    m.layers.push_back(linear_layer(0, hidden, dim, rng));
    m.layers.push_back(norm_layer(1, hidden, rng));
    m.layers.push_back(plain(2, graph::LayerKind::Relu));
    m.layers.push_back(linear_layer(3, hidden, hidden, rng));
    m.layers.push_back(norm_layer(4, hidden, rng));
    m.layers.push_back(plain(5, graph::LayerKind::Relu));
    m.layers.push_back(linear_layer(6, classes, hidden, rng));
    m.validate();
    return m;
}

// Conv -> BN -> ReLU -> Conv -> BN -> ReLU -> GAP -> Linear over images.
inline graph::ModelGraph random_cnn(std::int64_t cin, std::int64_t hw, std::int64_t classes,
                                    std::uint64_t seed) {
    Rng rng(seed);
    graph::ModelGraph m;
    m.meta.name = "test-cnn";
    m.meta.input_shape = {cin, hw, hw};
    m.meta.class_count = classes;
    m.layers.push_back(conv_layer(0, 4, cin, rng));
    m.layers.push_back(norm_layer(1, 4, rng));
    m.layers.push_back(plain(2, graph::LayerKind::Relu));
    m.layers.push_back(conv_layer(3, 6, 4, rng));
    m.layers.push_back(norm_layer(4, 6, rng));
    m.layers.push_back(plain(5, graph::LayerKind::Relu));
    m.layers.push_back(plain(6, graph::LayerKind::GlobalAvgPool));
    m.layers.push_back(linear_layer(7, classes, 6, rng));
    m.validate();
    return m;
}

}  // namespace testutil
