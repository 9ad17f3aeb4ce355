#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "leantta/adapt.hpp"
#include "leantta/graph.hpp"
#include "leantta/kernels.hpp"
#include "leantta/tensor.hpp"

namespace leantta::quant {

// Per-tensor affine quantization parameters. Activations are unsigned 8-bit
// with an asymmetric zero point; weights are signed 8-bit symmetric (zero
// point fixed at 0).
struct QuantParams {
    double scale = 1.0;
    int zero_point = 0;
    bool is_signed = false;

    int qmin() const { return is_signed ? -128 : 0; }
    int qmax() const { return is_signed ? 127 : 255; }
    void validate() const;
};

std::int64_t round_half_even(double x);

struct QuantizedTensor {
    std::vector<std::int64_t> shape;
    std::vector<std::int16_t> q;  // holds either range; values stay within the 8-bit bounds
    QuantParams qp;
};

QuantizedTensor quantize_tensor(const Tensor& x, const QuantParams& qp);
Tensor dequantize_tensor(const QuantizedTensor& t);

// Running min/max range observer used during calibration.
struct Observer {
    double min_seen = 0.0;
    double max_seen = 0.0;
    std::uint64_t count = 0;

    void observe(const Tensor& t);
    // Asymmetric unsigned-8 parameters; degenerate ranges get a floored scale
    // and set the warning flag.
    QuantParams activation_params(bool* degenerate = nullptr) const;
};

// Symmetric signed-8 parameters from the max-abs of a weight tensor.
QuantParams weight_params(const Tensor& weights);

enum class FusionPolicy { FuseAll, FuseNone, FuseDeepHalf, Explicit };

// The set L of normalization layers kept unfused (and adaptive), plus its
// complement. FuseDeepHalf keeps the shallowest ceil(n/2) unfused.
struct FusionPlan {
    std::vector<int> unfused_layer_ids;
    std::vector<int> fused_layer_ids;
};

FusionPlan plan_partial_fusion(const graph::ModelGraph& model, FusionPolicy policy,
                               const std::vector<int>* explicit_unfused = nullptr);

// Folds frozen normalization into the preceding convolution:
//   W'_c = W_c * g_c / sqrt(var_c + eps),  b'_c = beta_c + (b_c - mu_c) * g_c / sqrt(var_c + eps)
graph::LayerSpec fuse_conv_bn(const graph::LayerSpec& conv, const adapt::NormParams& bn);
// Same algebra on the rows of a linear layer.
graph::LayerSpec fuse_linear_bn(const graph::LayerSpec& lin, const adapt::NormParams& bn);

// The fusion algebra at double precision, before the f32 materialization.
// The int8 builder quantizes straight from these values.
struct FusedAffine {
    std::vector<double> weights;  // same layout as the source weight tensor
    std::vector<double> bias;
};
FusedAffine fuse_affine_exact(const graph::LayerSpec& layer, const adapt::NormParams& bn);

// Calibration output: quantization parameters for the model input edge and
// for every layer's output edge, plus symmetric parameters for every conv /
// linear weight tensor (keyed by layer id).
struct QuantSchema {
    QuantParams input;
    std::map<int, QuantParams> edges;
    std::map<int, QuantParams> weights;
    bool degenerate_range = false;  // some edge had min == max
    int batches = 0;
    int batch_size = 0;
};

// Runs the float model over calibration batches, recording per-edge ranges.
QuantSchema calibrate(const graph::ModelGraph& model, const std::vector<Tensor>& calib_inputs,
                      int batches, int batch_size);

// --- int8 model ------------------------------------------------------------

enum class QLayerKind : std::uint8_t {
    QConv2d = 1,
    QLinear = 2,
    NormIsland = 3,  // dequantize -> float normalization (frozen or adaptive) -> requantize
    QGlobalAvgPool = 4,
    QRelu = 5,
};

struct QLayerSpec {
    QLayerKind kind;
    int id = -1;                 // id of the leading original layer
    std::vector<int> fused_ids;  // all original layer ids this op subsumes

    // QConv2d / QLinear
    std::vector<std::int8_t> wq;
    std::vector<std::int64_t> wshape;
    QuantParams wqp;
    std::vector<std::int32_t> bias_q;  // bias at scale s_in * s_w
    int stride = 1, padding = 0;
    bool relu_folded = false;

    // NormIsland
    adapt::NormParams norm;

    QuantParams in_qp;
    QuantParams out_qp;
};

struct QuantizedModel {
    graph::ModelMeta meta;
    FusionPlan plan;
    QuantParams input_qp;
    std::vector<QLayerSpec> layers;

    std::vector<int> island_ids() const;
};

// Builds the int8 model: norm layers in the plan's fused set are folded into
// their producer and quantized; unfused ones stay as float islands.
QuantizedModel quantize_model(const graph::ModelGraph& model, const FusionPlan& plan,
                              const QuantSchema& schema);

struct QForwardOptions {
    graph::RunMode mode = graph::RunMode::Source;
    adapt::AdaptConfig cfg;
    bool trace = false;
    OpCounts* counts = nullptr;
};

// Runs the integer path; returns float logits (the final edge dequantized).
graph::ForwardResult forward(const QuantizedModel& model, const Tensor& input,
                             const QForwardOptions& opts = {});

// Same container family as float models, version 2, int8 payloads.
void save_quantized_model(const QuantizedModel& model, const std::string& path);
QuantizedModel load_quantized_model(const std::string& path);

inline constexpr std::uint32_t kQuantModelFormatVersion = 2;

}  // namespace leantta::quant
