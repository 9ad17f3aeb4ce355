#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leantta/graph.hpp"
#include "leantta/quant.hpp"
#include "leantta/shift.hpp"

namespace leantta::bench {

// --- synthetic data ---------------------------------------------------------

// Gaussian clusters whose means sit at the given signal levels along the
// normalized all-ones direction (three intensity tiers by default). Labels
// are drawn uniformly.
shift::LabeledDataset make_gaussian_clusters(int n, int dim, const std::vector<double>& levels,
                                             double sigma, std::uint64_t seed);

// Image-like samples (1, hw, hw) in [0, 1]: class 0 horizontal stripes,
// class 1 vertical stripes, class 2 checkerboard, plus pixel noise.
shift::LabeledDataset make_pattern_images(int n, int classes, int hw, double contrast, double sigma,
                                          std::uint64_t seed);

// --- reference trainer -------------------------------------------------------

enum class Arch { MlpBn, TinyCnn };

Arch arch_from_name(const std::string& name);
const char* arch_name(Arch a);

struct TrainConfig {
    int epochs = 20;
    double lr = 0.05;
    int batch_size = 32;
    double momentum = 0.9;  // running-stat update: run = m*run + (1-m)*batch
    std::uint64_t seed = 0;
    // architecture widths
    int hidden = 6;       // MlpBn hidden units per layer
    int conv1_ch = 8;     // TinyCnn channel widths
    int conv2_ch = 16;
};

// Mini-batch SGD with cross-entropy and hand-derived gradients for the two
// fixed architectures. Normalization layers end up with the final running
// statistics as their frozen source parameters.
graph::ModelGraph train_reference_model(Arch arch, const shift::LabeledDataset& data,
                                        const TrainConfig& cfg);

// Source-mode accuracy over a dataset (batched).
double dataset_accuracy(const graph::ModelGraph& model, const shift::LabeledDataset& data);

// --- stream evaluation --------------------------------------------------------

enum class EvalMode { Source, Adapt, NaiveReplace, RunningAvg };

EvalMode eval_mode_from_name(const std::string& name);
const char* eval_mode_name(EvalMode m);

struct EvalOptions {
    EvalMode mode = EvalMode::Source;
    adapt::AdaptConfig cfg;
    double momentum = 0.9;  // RunningAvg baseline
    bool trace = false;
    const std::vector<int>* adapt_ids = nullptr;  // restrict adaptation to these layers
    std::uint64_t seed = 0;                       // metadata only
    std::string fusion_label = "float";           // metadata only
};

struct SampleRecord {
    int index = 0;
    int true_label = 0;
    int pred_label = -1;
    shift::ShiftKind kind = shift::ShiftKind::Identity;
    int severity = 0;
    double d_mean = 0.0;  // divergence summary over the adapted layers
    double d_max = 0.0;
    int d_count = 0;
    std::string error;  // non-empty when the engine failed on this sample
};

struct RunReport {
    std::uint32_t schema_version = 1;
    std::string model_name;
    std::string mode;
    std::string fusion = "float";
    std::string distance_mode = "raw-sum";
    double tau = 0.0;
    double lambda = 0.0;
    double momentum = 0.0;
    std::uint64_t seed = 0;
    std::int64_t class_count = 0;

    std::vector<SampleRecord> samples;
    double accuracy = 0.0;
    double weighted_f1 = 0.0;
    OpCounts ops;
    double wall_seconds = 0.0;
};

double accuracy(const std::vector<SampleRecord>& records);
double weighted_f1(const std::vector<SampleRecord>& records);

// Batch-1 pass over the stream. Adapt / NaiveReplace reset after every
// sample by construction; RunningAvg deliberately carries statistics across
// samples. Engine errors are recorded per sample, not fatal.
RunReport evaluate_stream(const graph::ModelGraph& model,
                          const std::vector<shift::StreamItem>& stream, const EvalOptions& opts);

RunReport evaluate_stream(const quant::QuantizedModel& model,
                          const std::vector<shift::StreamItem>& stream, const EvalOptions& opts);

// Queue-fed variant: consumes items from a producer thread in FIFO order.
RunReport evaluate_stream(const graph::ModelGraph& model,
                          shift::BoundedQueue<shift::StreamItem>& queue, const EvalOptions& opts);

// --- experiments ---------------------------------------------------------------

struct SweepResult {
    std::vector<double> taus;
    std::vector<double> lambdas;
    std::vector<std::vector<double>> accuracy;  // [tau][lambda]
};

// One Adapt evaluation per (tau, lambda) cell; duplicate grid values are
// deduplicated. Cells run in parallel across `threads` workers.
SweepResult sweep_hyperparams(const graph::ModelGraph& model,
                              const std::vector<shift::StreamItem>& stream,
                              std::vector<double> tau_grid, std::vector<double> lambda_grid,
                              const adapt::AdaptConfig& base_cfg, int threads = 1);

enum class AblationDirection { DropShallowFirst, AddDeepProgressively };

struct AblationPoint {
    int k = 0;  // number of adaptive layers
    std::vector<int> adapted_ids;
    double accuracy = 0.0;
};

// k = 0..L adaptive layers: DropShallowFirst keeps the k deepest (shallow
// layers dropped first), AddDeepProgressively keeps the k shallowest
// (adaptation extended deeper and deeper).
std::vector<AblationPoint> layer_ablation(const graph::ModelGraph& model,
                                          const std::vector<shift::StreamItem>& stream,
                                          AblationDirection direction,
                                          const adapt::AdaptConfig& cfg);

OpCounts profile_ops(const graph::ModelGraph& model, const Tensor& input, graph::RunMode mode,
                     const adapt::AdaptConfig& cfg);
OpCounts profile_ops(const quant::QuantizedModel& model, const Tensor& input, graph::RunMode mode,
                     const adapt::AdaptConfig& cfg);

// --- report files ----------------------------------------------------------------

enum class ReportFormat { Csv, JsonLines };

// CSV: "# key=value" metadata lines, a fixed sample header, one row per
// sample. JSON-lines: meta record, one record per sample, aggregate record.
void emit_report(const RunReport& report, ReportFormat format, const std::string& path);

// Re-parses an emitted file; aggregate metrics are recomputed from the
// sample records and must match the stored ones exactly.
RunReport read_report(const std::string& path, ReportFormat format);

}  // namespace leantta::bench
