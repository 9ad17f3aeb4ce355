#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "leantta/adapt.hpp"
#include "leantta/kernels.hpp"
#include "leantta/tensor.hpp"

namespace leantta::graph {

enum class LayerKind : std::uint8_t {
    Conv2d = 1,
    Linear = 2,
    BatchNorm = 3,
    AdaptiveNorm = 4,
    Relu = 5,
    GlobalAvgPool = 6,
    ResidualBegin = 7,
    ResidualEnd = 8,
};

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind;
    int id = -1;  // stable depth index

    // Conv2d / Linear
    Tensor weights;
    std::vector<float> bias;
    int stride = 1;
    int padding = 0;

    // BatchNorm / AdaptiveNorm
    adapt::NormParams norm;

    bool is_norm() const { return kind == LayerKind::BatchNorm || kind == LayerKind::AdaptiveNorm; }
};

struct ModelMeta {
    std::string name;
    std::vector<std::int64_t> input_shape;  // without the batch extent
    std::int64_t class_count = 0;
};

struct ModelGraph {
    ModelMeta meta;
    std::vector<LayerSpec> layers;

    // Structural validation: residual pairing, per-kind parameter completeness
    // and adjacent shape compatibility (a full symbolic forward pass).
    void validate() const;

    std::vector<int> norm_layer_ids() const;
    const LayerSpec& layer_by_id(int id) const;
};

enum class RunMode { Source, Adapt };

// Lets the running-average baseline supply its own normalization statistics;
// invoked at every normalization layer in depth order.
class NormStatsHook {
public:
    virtual ~NormStatsHook() = default;
    virtual void norm_stats(int layer_id, const adapt::ChannelStats& instance,
                            const adapt::NormParams& params, std::vector<double>& mu_out,
                            std::vector<double>& sigma2_out) = 0;
};

struct ForwardOptions {
    RunMode mode = RunMode::Source;
    adapt::AdaptConfig cfg;
    bool trace = false;
    // Adapt mode: when set, only AdaptiveNorm layers with these ids adapt;
    // the rest run frozen. Null means all AdaptiveNorm layers adapt.
    const std::vector<int>* adapt_ids = nullptr;
    NormStatsHook* stats_hook = nullptr;
    OpCounts* counts = nullptr;
};

struct ForwardTrace {
    std::vector<adapt::NormRecord> records;
};

struct ForwardResult {
    Tensor logits;
    std::optional<ForwardTrace> trace;
};

// Executes the layer list in order. Adapt mode runs the per-sample statistics
// pipeline at each AdaptiveNorm layer on the activation produced by the
// already-adapted earlier layers; the model itself is never modified, so the
// next call starts from the identical frozen state.
ForwardResult forward(const ModelGraph& model, const Tensor& input, const ForwardOptions& opts = {});

// Returns a copy with BatchNorm layers rebuilt as AdaptiveNorm carrying the
// identical parameters. `ids` restricts the replacement to that subset.
ModelGraph replace_norm_layers(const ModelGraph& model, const std::vector<int>* ids = nullptr);

// Binary model container (magic "LTTA", version 1) plus a human-readable
// "<path>.manifest" sidecar. Round-trip is bit-exact.
void save_model(const ModelGraph& model, const std::string& path);
ModelGraph load_model(const std::string& path);

inline constexpr std::uint32_t kModelFormatVersion = 1;

}  // namespace leantta::graph
