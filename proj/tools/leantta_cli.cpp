// Command-line frontend wiring the engine into reproducible pipelines:
// data generation, training, corruption, stream building, calibration,
// quantization, evaluation, sweeps, ablation, profiling and report checks.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include "leantta/bench.hpp"
#include "leantta/graph.hpp"
#include "leantta/io.hpp"
#include "leantta/quant.hpp"
#include "leantta/rng.hpp"
#include "leantta/shift.hpp"

namespace lt = leantta;
using json = nlohmann::json;

namespace {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };
LogLevel g_log_level = LogLevel::Info;

void log_info(const std::string& msg) {
    if (g_log_level >= LogLevel::Info) std::cerr << "[info] " << msg << "\n";
}
void log_debug(const std::string& msg) {
    if (g_log_level >= LogLevel::Debug) std::cerr << "[debug] " << msg << "\n";
}

LogLevel parse_log_level(const std::string& s) {
    if (s == "error") return LogLevel::Error;
    if (s == "info") return LogLevel::Info;
    if (s == "debug") return LogLevel::Debug;
    throw lt::Error(lt::ErrorKind::Config, "unknown log level: " + s);
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw lt::Error(lt::ErrorKind::Config, "empty list: " + s);
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stoi(tok));
    }
    return out;
}

// "0:1:0.1" expands to an inclusive range; plain comma lists pass through.
std::vector<double> parse_grid(const std::string& s) {
    if (s.find(':') == std::string::npos) return parse_double_list(s);
    const auto p1 = s.find(':');
    const auto p2 = s.find(':', p1 + 1);
    if (p2 == std::string::npos) throw lt::Error(lt::ErrorKind::Config, "grid must be lo:hi:step");
    const double lo = std::stod(s.substr(0, p1));
    const double hi = std::stod(s.substr(p1 + 1, p2 - p1 - 1));
    const double step = std::stod(s.substr(p2 + 1));
    if (step <= 0.0) throw lt::Error(lt::ErrorKind::Config, "grid step must be > 0");
    std::vector<double> out;
    for (int i = 0;; ++i) {
        const double v = lo + i * step;
        if (v > hi + 1e-12) break;
        out.push_back(std::min(v, hi));
    }
    return out;
}

std::vector<lt::shift::ShiftKind> parse_kinds(const std::string& s) {
    std::vector<lt::shift::ShiftKind> kinds;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) kinds.push_back(lt::shift::shift_kind_from_name(tok));
    }
    return kinds;
}

std::uint32_t peek_model_version(const std::string& path) {
    lt::io::Reader r(path);
    r.expect_magic("LTTA");
    return r.u32();
}

// Stream files are a dataset container plus a "<path>.stream.csv" sidecar
// holding the per-item corruption tags.
void save_stream(const std::vector<lt::shift::StreamItem>& stream, std::int64_t class_count,
                 const std::string& path) {
    lt::shift::LabeledDataset ds;
    ds.class_count = class_count;
    for (const auto& item : stream) {
        ds.inputs.push_back(item.input);
        ds.labels.push_back(item.label);
    }
    lt::shift::save_dataset(ds, path);
    std::ofstream side(path + ".stream.csv");
    if (!side) throw lt::Error(lt::ErrorKind::Io, "cannot open for writing: " + path + ".stream.csv");
    side << "index,kind,severity,base_index\n";
    for (std::size_t i = 0; i < stream.size(); ++i) {
        side << i << ',' << lt::shift::shift_kind_name(stream[i].shift.kind) << ','
             << stream[i].shift.severity << ',' << stream[i].base_index << "\n";
    }
}

std::vector<lt::shift::StreamItem> load_stream(const std::string& path) {
    const lt::shift::LabeledDataset ds = lt::shift::load_dataset(path);
    std::vector<lt::shift::StreamItem> stream = lt::shift::identity_stream(ds);

    std::ifstream side(path + ".stream.csv");
    if (side) {
        std::string line;
        std::getline(side, line);  // header
        std::size_t i = 0;
        try {
            while (std::getline(side, line) && i < stream.size()) {
                std::stringstream ss(line);
                std::string idx, kind, sev, base;
                std::getline(ss, idx, ',');
                std::getline(ss, kind, ',');
                std::getline(ss, sev, ',');
                std::getline(ss, base, ',');
                stream[i].shift.kind = lt::shift::shift_kind_from_name(kind);
                stream[i].shift.severity = std::max(1, std::stoi(sev));
                stream[i].base_index = std::stoi(base);
                ++i;
            }
        } catch (const std::logic_error&) {
            throw lt::Error(lt::ErrorKind::Parse,
                            "malformed stream sidecar at line " + std::to_string(i + 2) + " in " +
                                path + ".stream.csv");
        }
        log_debug("loaded corruption tags from " + path + ".stream.csv");
    }
    return stream;
}

json schema_to_json(const lt::quant::QuantSchema& s) {
    json j;
    j["batches"] = s.batches;
    j["batch_size"] = s.batch_size;
    j["degenerate_range"] = s.degenerate_range;
    j["input"] = {{"scale", s.input.scale}, {"zero_point", s.input.zero_point}};
    for (const auto& [id, qp] : s.edges) {
        j["edges"][std::to_string(id)] = {{"scale", qp.scale}, {"zero_point", qp.zero_point}};
    }
    for (const auto& [id, qp] : s.weights) {
        j["weights"][std::to_string(id)] = {{"scale", qp.scale}, {"zero_point", qp.zero_point}};
    }
    return j;
}

lt::quant::QuantSchema schema_from_json(const json& j) {
    lt::quant::QuantSchema s;
    s.batches = j.value("batches", 0);
    s.batch_size = j.value("batch_size", 0);
    s.degenerate_range = j.value("degenerate_range", false);
    s.input.scale = j.at("input").at("scale").get<double>();
    s.input.zero_point = j.at("input").at("zero_point").get<int>();
    if (j.contains("edges")) {
        for (const auto& [key, val] : j.at("edges").items()) {
            lt::quant::QuantParams qp;
            qp.scale = val.at("scale").get<double>();
            qp.zero_point = val.at("zero_point").get<int>();
            s.edges[std::stoi(key)] = qp;
        }
    }
    if (j.contains("weights")) {
        for (const auto& [key, val] : j.at("weights").items()) {
            lt::quant::QuantParams qp;
            qp.scale = val.at("scale").get<double>();
            qp.zero_point = val.at("zero_point").get<int>();
            qp.is_signed = true;
            s.weights[std::stoi(key)] = qp;
        }
    }
    return s;
}

lt::quant::FusionPolicy parse_fusion(const std::string& s, std::vector<int>& explicit_ids) {
    if (s == "all") return lt::quant::FusionPolicy::FuseAll;
    if (s == "none") return lt::quant::FusionPolicy::FuseNone;
    if (s == "deep-half") return lt::quant::FusionPolicy::FuseDeepHalf;
    if (s.rfind("explicit:", 0) == 0) {
        explicit_ids = parse_int_list(s.substr(9));
        return lt::quant::FusionPolicy::Explicit;
    }
    throw lt::Error(lt::ErrorKind::Config, "unknown fusion policy: " + s);
}

lt::bench::ReportFormat parse_format(const std::string& s) {
    if (s == "csv") return lt::bench::ReportFormat::Csv;
    if (s == "json-lines" || s == "jsonl") return lt::bench::ReportFormat::JsonLines;
    throw lt::Error(lt::ErrorKind::Config, "unknown report format: " + s);
}

int exit_code_for(const lt::Error& e) {
    switch (e.kind()) {
        case lt::ErrorKind::Io:
        case lt::ErrorKind::Parse:
        case lt::ErrorKind::Version:
            return 3;
        default:
            return 4;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"leantta: stateless test-time adaptation engine with an int8 path"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags (--seed, --threads, --log-level) may follow the subcommand

    std::uint64_t seed = 0;
    int threads = 0;
    std::string log_level = "info";
    app.add_option("--seed", seed, "global RNG seed")->capture_default_str();
    app.add_option("--threads", threads, "worker thread bound (0 = library default)")
        ->capture_default_str();
    app.add_option("--log-level", log_level, "error|info|debug")->capture_default_str();

    // ---- make-data ----
    auto* cmd_data = app.add_subcommand("make-data", "generate a synthetic labeled dataset");
    std::string data_kind = "tiers", data_out, data_levels = "-18.0,-2.2,0.0";
    int data_n = 2000, data_dim = 2, data_classes = 3, data_hw = 8;
    double data_sigma = 0.2, data_contrast = 0.3;
    cmd_data->add_option("--kind", data_kind, "tiers|images")->capture_default_str();
    cmd_data->add_option("--n", data_n, "sample count")->capture_default_str();
    cmd_data->add_option("--dim", data_dim, "feature dimension (tiers)")->capture_default_str();
    cmd_data->add_option("--levels", data_levels, "per-class signal levels (tiers)")
        ->capture_default_str();
    cmd_data->add_option("--sigma", data_sigma, "within-class noise")->capture_default_str();
    cmd_data->add_option("--classes", data_classes, "class count (images)")->capture_default_str();
    cmd_data->add_option("--hw", data_hw, "image side length (images)")->capture_default_str();
    cmd_data->add_option("--contrast", data_contrast, "pattern contrast (images)")
        ->capture_default_str();
    cmd_data->add_option("--out", data_out, "output dataset path")->required();

    // ---- train ----
    auto* cmd_train = app.add_subcommand("train", "train a reference model");
    std::string train_arch = "mlp-bn", train_data, train_out, train_holdout;
    lt::bench::TrainConfig tc;
    cmd_train->add_option("--arch", train_arch, "mlp-bn|tiny-cnn")->capture_default_str();
    cmd_train->add_option("--data", train_data, "training dataset")->required();
    cmd_train->add_option("--holdout", train_holdout, "optional holdout dataset for accuracy");
    cmd_train->add_option("--epochs", tc.epochs)->capture_default_str();
    cmd_train->add_option("--lr", tc.lr)->capture_default_str();
    cmd_train->add_option("--batch-size", tc.batch_size)->capture_default_str();
    cmd_train->add_option("--momentum", tc.momentum, "running-stat momentum")->capture_default_str();
    cmd_train->add_option("--hidden", tc.hidden, "MlpBn hidden width")->capture_default_str();
    cmd_train->add_option("--conv1", tc.conv1_ch, "TinyCnn first conv channels")->capture_default_str();
    cmd_train->add_option("--conv2", tc.conv2_ch, "TinyCnn second conv channels")->capture_default_str();
    cmd_train->add_option("--out", train_out, "output model path")->required();

    // ---- corrupt ----
    auto* cmd_corrupt = app.add_subcommand("corrupt", "apply one corruption to a dataset");
    std::string cor_kind = "gaussian-noise", cor_in, cor_out;
    int cor_severity = 3;
    cmd_corrupt->add_option("--kind", cor_kind, "corruption kind")->capture_default_str();
    cmd_corrupt->add_option("--severity", cor_severity, "severity 1..5")->capture_default_str();
    cmd_corrupt->add_option("--in", cor_in, "input dataset")->required();
    cmd_corrupt->add_option("--out", cor_out, "output dataset")->required();

    // ---- stream ----
    auto* cmd_stream = app.add_subcommand("stream", "build an evaluation stream");
    std::string stream_mode = "abrupt", stream_data, stream_out, stream_kinds = "mean-shift,scale-shift";
    int stream_k = 40;
    cmd_stream->add_option("mode", stream_mode, "abrupt|gradual")->capture_default_str();
    cmd_stream->add_option("--data", stream_data, "base dataset")->required();
    cmd_stream->add_option("--kinds", stream_kinds, "comma-separated corruption kinds")
        ->capture_default_str();
    cmd_stream->add_option("--per-cell", stream_k, "samples per (kind, severity) cell")
        ->capture_default_str();
    cmd_stream->add_option("--out", stream_out, "output stream path")->required();

    // ---- calibrate ----
    auto* cmd_cal = app.add_subcommand("calibrate", "record quantization ranges");
    std::string cal_model, cal_data, cal_out;
    int cal_batches = 20, cal_batch_size = 32;
    cmd_cal->add_option("--model", cal_model, "float model")->required();
    cmd_cal->add_option("--data", cal_data, "calibration dataset")->required();
    cmd_cal->add_option("--batches", cal_batches)->capture_default_str();
    cmd_cal->add_option("--batch-size", cal_batch_size)->capture_default_str();
    cmd_cal->add_option("--out", cal_out, "output schema (json)")->required();

    // ---- quantize ----
    auto* cmd_quant = app.add_subcommand("quantize", "build an int8 model");
    std::string q_model, q_schema, q_calib_data, q_fusion = "deep-half", q_out;
    int q_batches = 20, q_batch_size = 32;
    cmd_quant->add_option("--model", q_model, "float model")->required();
    cmd_quant->add_option("--schema", q_schema, "calibration schema json");
    cmd_quant->add_option("--calib-data", q_calib_data, "calibrate on this dataset instead");
    cmd_quant->add_option("--batches", q_batches)->capture_default_str();
    cmd_quant->add_option("--batch-size", q_batch_size)->capture_default_str();
    cmd_quant->add_option("--fusion", q_fusion, "all|none|deep-half|explicit:<ids>")
        ->capture_default_str();
    cmd_quant->add_option("--out", q_out, "output quantized model")->required();

    // ---- eval ----
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a model over a stream");
    std::string ev_model, ev_stream, ev_data, ev_mode = "source", ev_report, ev_format = "csv";
    std::string ev_distance = "raw", ev_adapt_layers;
    double ev_tau = 0.9, ev_lambda = 0.9, ev_momentum = 0.9;
    cmd_eval->add_option("--model", ev_model, "float or quantized model")->required();
    cmd_eval->add_option("--stream", ev_stream, "stream file (from the stream subcommand)");
    cmd_eval->add_option("--data", ev_data, "plain dataset evaluated in order (clean stream)");
    cmd_eval->add_option("--mode", ev_mode, "source|adapt|naive|running-avg")->capture_default_str();
    cmd_eval->add_option("--tau", ev_tau, "source weight, 0..1")->capture_default_str();
    cmd_eval->add_option("--lambda", ev_lambda, "distance scaler, 0..1")->capture_default_str();
    cmd_eval->add_option("--distance-mode", ev_distance, "raw|channel-mean")->capture_default_str();
    cmd_eval->add_option("--momentum", ev_momentum, "running-avg momentum")->capture_default_str();
    cmd_eval->add_option("--adapt-layers", ev_adapt_layers, "restrict adaptation to these layer ids");
    cmd_eval->add_option("--report", ev_report, "write the run report here");
    cmd_eval->add_option("--format", ev_format, "csv|json-lines")->capture_default_str();

    // ---- sweep ----
    auto* cmd_sweep = app.add_subcommand("sweep", "tau/lambda grid search");
    std::string sw_model, sw_stream, sw_out, sw_tau = "0:1:0.1", sw_lambda = "0:1:0.1";
    cmd_sweep->add_option("--model", sw_model)->required();
    cmd_sweep->add_option("--stream", sw_stream)->required();
    cmd_sweep->add_option("--tau-grid", sw_tau, "lo:hi:step or comma list")->capture_default_str();
    cmd_sweep->add_option("--lambda-grid", sw_lambda)->capture_default_str();
    cmd_sweep->add_option("--out", sw_out, "output matrix csv")->required();

    // ---- ablate ----
    auto* cmd_ablate = app.add_subcommand("ablate", "layer ablation curves");
    std::string ab_model, ab_stream, ab_out, ab_direction = "add-deep";
    double ab_tau = 0.9, ab_lambda = 0.9;
    cmd_ablate->add_option("--model", ab_model)->required();
    cmd_ablate->add_option("--stream", ab_stream)->required();
    cmd_ablate->add_option("--direction", ab_direction, "drop-shallow|add-deep")->capture_default_str();
    cmd_ablate->add_option("--tau", ab_tau)->capture_default_str();
    cmd_ablate->add_option("--lambda", ab_lambda)->capture_default_str();
    cmd_ablate->add_option("--out", ab_out, "output curve csv")->required();

    // ---- profile ----
    auto* cmd_prof = app.add_subcommand("profile", "deterministic op counts");
    std::string pr_model, pr_data, pr_mode = "source", pr_out;
    cmd_prof->add_option("--model", pr_model, "float or quantized model")->required();
    cmd_prof->add_option("--data", pr_data, "dataset supplying one input sample")->required();
    cmd_prof->add_option("--mode", pr_mode, "source|adapt")->capture_default_str();
    cmd_prof->add_option("--out", pr_out, "optional json output");

    // ---- report ----
    auto* cmd_report = app.add_subcommand("report", "re-parse a report and print aggregates");
    std::string rp_in, rp_format = "csv";
    cmd_report->add_option("--in", rp_in)->required();
    cmd_report->add_option("--format", rp_format, "csv|json-lines")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage error
    }

    try {
        if (const char* env = std::getenv("LEANTTA_LOG")) {
            g_log_level = parse_log_level(env);
        } else {
            g_log_level = parse_log_level(log_level);
        }
        if (threads > 0) omp_set_num_threads(threads);

        if (*cmd_data) {
            lt::shift::LabeledDataset ds;
            if (data_kind == "tiers") {
                ds = lt::bench::make_gaussian_clusters(data_n, data_dim, parse_double_list(data_levels),
                                                       data_sigma, seed);
            } else if (data_kind == "images") {
                ds = lt::bench::make_pattern_images(data_n, data_classes, data_hw, data_contrast,
                                                    data_sigma, seed);
            } else {
                throw lt::Error(lt::ErrorKind::Config, "unknown data kind: " + data_kind);
            }
            lt::shift::save_dataset(ds, data_out);
            log_info("wrote " + std::to_string(ds.size()) + " samples to " + data_out);
        } else if (*cmd_train) {
            tc.seed = seed;
            const auto data = lt::shift::load_dataset(train_data);
            const auto arch = lt::bench::arch_from_name(train_arch);
            const auto model = lt::bench::train_reference_model(arch, data, tc);
            lt::graph::save_model(model, train_out);
            std::ostringstream line;
            line.precision(4);
            line << "train accuracy " << lt::bench::dataset_accuracy(model, data);
            if (!train_holdout.empty()) {
                const auto holdout = lt::shift::load_dataset(train_holdout);
                line << ", holdout accuracy " << lt::bench::dataset_accuracy(model, holdout);
            }
            std::cout << line.str() << "\n";
            log_info("wrote model to " + train_out);
        } else if (*cmd_corrupt) {
            auto ds = lt::shift::load_dataset(cor_in);
            const lt::shift::ShiftSpec spec{lt::shift::shift_kind_from_name(cor_kind), cor_severity};
            for (std::size_t i = 0; i < ds.inputs.size(); ++i) {
                ds.inputs[i] = lt::shift::apply_corruption(
                    ds.inputs[i], spec, lt::mix_seed(seed, static_cast<std::uint64_t>(i)));
            }
            lt::shift::save_dataset(ds, cor_out);
            log_info("corrupted " + std::to_string(ds.size()) + " samples -> " + cor_out);
        } else if (*cmd_stream) {
            const auto base = lt::shift::load_dataset(stream_data);
            lt::shift::StreamSpec spec;
            spec.mode = stream_mode == "gradual" ? lt::shift::StreamSpec::Mode::Gradual
                                                 : lt::shift::StreamSpec::Mode::Abrupt;
            if (stream_mode != "gradual" && stream_mode != "abrupt") {
                throw lt::Error(lt::ErrorKind::Config, "stream mode must be abrupt or gradual");
            }
            spec.per_cell = stream_k;
            spec.kinds = parse_kinds(stream_kinds);
            spec.seed = seed;
            const auto stream = spec.mode == lt::shift::StreamSpec::Mode::Abrupt
                                    ? lt::shift::build_abrupt_stream(base, spec)
                                    : lt::shift::build_gradual_stream(base, spec);
            save_stream(stream, base.class_count, stream_out);
            log_info("wrote stream of " + std::to_string(stream.size()) + " items to " + stream_out);
        } else if (*cmd_cal) {
            const auto model = lt::graph::load_model(cal_model);
            const auto data = lt::shift::load_dataset(cal_data);
            const auto schema = lt::quant::calibrate(model, data.inputs, cal_batches, cal_batch_size);
            if (schema.degenerate_range) {
                log_info("warning: a constant activation edge was observed; its scale was floored");
            }
            std::ofstream out(cal_out);
            if (!out) throw lt::Error(lt::ErrorKind::Io, "cannot open for writing: " + cal_out);
            out << schema_to_json(schema).dump(2) << "\n";
            log_info("wrote calibration schema to " + cal_out);
        } else if (*cmd_quant) {
            const auto model = lt::graph::load_model(q_model);
            lt::quant::QuantSchema schema;
            if (!q_schema.empty()) {
                std::ifstream in(q_schema);
                if (!in) throw lt::Error(lt::ErrorKind::Io, "cannot open for reading: " + q_schema);
                json j;
                in >> j;
                schema = schema_from_json(j);
            } else if (!q_calib_data.empty()) {
                const auto data = lt::shift::load_dataset(q_calib_data);
                schema = lt::quant::calibrate(model, data.inputs, q_batches, q_batch_size);
            } else {
                throw lt::Error(lt::ErrorKind::Config, "quantize needs --schema or --calib-data");
            }
            std::vector<int> explicit_ids;
            const auto policy = parse_fusion(q_fusion, explicit_ids);
            const auto plan = lt::quant::plan_partial_fusion(
                model, policy, policy == lt::quant::FusionPolicy::Explicit ? &explicit_ids : nullptr);
            const auto qmodel = lt::quant::quantize_model(model, plan, schema);
            lt::quant::save_quantized_model(qmodel, q_out);
            std::ostringstream line;
            line << "unfused (adaptive) layers:";
            for (int id : plan.unfused_layer_ids) line << ' ' << id;
            if (plan.unfused_layer_ids.empty()) line << " none";
            std::cout << line.str() << "\n";
            log_info("wrote quantized model to " + q_out);
        } else if (*cmd_eval) {
            std::vector<lt::shift::StreamItem> stream;
            if (!ev_stream.empty()) {
                stream = load_stream(ev_stream);
            } else if (!ev_data.empty()) {
                stream = lt::shift::identity_stream(lt::shift::load_dataset(ev_data));
            } else {
                throw lt::Error(lt::ErrorKind::Config, "eval needs --stream or --data");
            }
            lt::bench::EvalOptions opts;
            opts.mode = lt::bench::eval_mode_from_name(ev_mode);
            opts.cfg.tau = ev_tau;
            opts.cfg.lambda = ev_lambda;
            opts.cfg.distance_mode = ev_distance == "channel-mean"
                                         ? lt::adapt::DistanceMode::ChannelMean
                                         : lt::adapt::DistanceMode::RawSum;
            if (ev_distance != "raw" && ev_distance != "channel-mean") {
                throw lt::Error(lt::ErrorKind::Config, "distance mode must be raw or channel-mean");
            }
            opts.momentum = ev_momentum;
            opts.seed = seed;
            std::vector<int> adapt_ids;
            if (!ev_adapt_layers.empty()) {
                adapt_ids = parse_int_list(ev_adapt_layers);
                opts.adapt_ids = &adapt_ids;
            }

            lt::bench::RunReport report;
            if (peek_model_version(ev_model) == lt::quant::kQuantModelFormatVersion) {
                const auto qmodel = lt::quant::load_quantized_model(ev_model);
                opts.fusion_label = qmodel.plan.unfused_layer_ids.empty() ? "all"
                                    : qmodel.plan.fused_layer_ids.empty() ? "none"
                                                                          : "partial";
                report = lt::bench::evaluate_stream(qmodel, stream, opts);
            } else {
                auto model = lt::graph::load_model(ev_model);
                if (opts.mode == lt::bench::EvalMode::Adapt ||
                    opts.mode == lt::bench::EvalMode::NaiveReplace) {
                    if (!model.norm_layer_ids().empty()) {
                        model = lt::graph::replace_norm_layers(model);
                        log_debug("normalization layers switched to the adaptive kind");
                    }
                }
                report = lt::bench::evaluate_stream(model, stream, opts);
            }
            std::ostringstream line;
            line.precision(6);
            line << "samples " << report.samples.size() << ", accuracy " << report.accuracy
                 << ", weighted_f1 " << report.weighted_f1;
            std::cout << line.str() << "\n";
            log_info("wall seconds: " + std::to_string(report.wall_seconds));
            if (!ev_report.empty()) {
                lt::bench::emit_report(report, parse_format(ev_format), ev_report);
                log_info("wrote report to " + ev_report);
            }
        } else if (*cmd_sweep) {
            auto model = lt::graph::load_model(sw_model);
            if (!model.norm_layer_ids().empty()) model = lt::graph::replace_norm_layers(model);
            const auto stream = load_stream(sw_stream);
            lt::adapt::AdaptConfig base;
            const auto result = lt::bench::sweep_hyperparams(model, stream, parse_grid(sw_tau),
                                                             parse_grid(sw_lambda), base,
                                                             threads > 0 ? threads : 1);
            std::ofstream out(sw_out);
            if (!out) throw lt::Error(lt::ErrorKind::Io, "cannot open for writing: " + sw_out);
            out << "tau\\lambda";
            for (double l : result.lambdas) out << ',' << l;
            out << "\n";
            char buf[40];
            for (std::size_t ti = 0; ti < result.taus.size(); ++ti) {
                out << result.taus[ti];
                for (std::size_t li = 0; li < result.lambdas.size(); ++li) {
                    std::snprintf(buf, sizeof(buf), "%.17g", result.accuracy[ti][li]);
                    out << ',' << buf;
                }
                out << "\n";
            }
            log_info("wrote sweep matrix to " + sw_out);
        } else if (*cmd_ablate) {
            auto model = lt::graph::load_model(ab_model);
            const auto stream = load_stream(ab_stream);
            const auto direction = ab_direction == "drop-shallow"
                                       ? lt::bench::AblationDirection::DropShallowFirst
                                       : lt::bench::AblationDirection::AddDeepProgressively;
            if (ab_direction != "drop-shallow" && ab_direction != "add-deep") {
                throw lt::Error(lt::ErrorKind::Config, "direction must be drop-shallow or add-deep");
            }
            lt::adapt::AdaptConfig cfg;
            cfg.tau = ab_tau;
            cfg.lambda = ab_lambda;
            const auto curve = lt::bench::layer_ablation(model, stream, direction, cfg);
            std::ofstream out(ab_out);
            if (!out) throw lt::Error(lt::ErrorKind::Io, "cannot open for writing: " + ab_out);
            out << "k,adapted_ids,accuracy\n";
            char buf[40];
            for (const auto& p : curve) {
                out << p.k << ',';
                for (std::size_t i = 0; i < p.adapted_ids.size(); ++i) {
                    out << (i ? ";" : "") << p.adapted_ids[i];
                }
                std::snprintf(buf, sizeof(buf), "%.17g", p.accuracy);
                out << ',' << buf << "\n";
            }
            log_info("wrote ablation curve to " + ab_out);
        } else if (*cmd_prof) {
            const auto data = lt::shift::load_dataset(pr_data);
            if (data.inputs.empty()) throw lt::Error(lt::ErrorKind::Config, "profile dataset is empty");
            std::vector<std::int64_t> shape;
            shape.push_back(1);
            for (auto d : data.inputs[0].shape()) shape.push_back(d);
            const lt::Tensor input(shape, data.inputs[0].values());
            const auto mode =
                pr_mode == "adapt" ? lt::graph::RunMode::Adapt : lt::graph::RunMode::Source;
            lt::adapt::AdaptConfig cfg;
            lt::OpCounts counts;
            if (peek_model_version(pr_model) == lt::quant::kQuantModelFormatVersion) {
                counts = lt::bench::profile_ops(lt::quant::load_quantized_model(pr_model), input,
                                                mode, cfg);
            } else {
                auto model = lt::graph::load_model(pr_model);
                if (mode == lt::graph::RunMode::Adapt && !model.norm_layer_ids().empty()) {
                    model = lt::graph::replace_norm_layers(model);
                }
                counts = lt::bench::profile_ops(model, input, mode, cfg);
            }
            std::cout << "float_mults " << counts.float_mults << "\n"
                      << "int_mults " << counts.int_mults << "\n"
                      << "dequant_events " << counts.dequant_events << "\n"
                      << "requant_events " << counts.requant_events << "\n";
            if (!pr_out.empty()) {
                std::ofstream out(pr_out);
                if (!out) throw lt::Error(lt::ErrorKind::Io, "cannot open for writing: " + pr_out);
                out << json{{"float_mults", counts.float_mults},
                            {"int_mults", counts.int_mults},
                            {"dequant_events", counts.dequant_events},
                            {"requant_events", counts.requant_events}}
                           .dump(2)
                    << "\n";
            }
        } else if (*cmd_report) {
            const auto report = lt::bench::read_report(rp_in, parse_format(rp_format));
            std::ostringstream line;
            line.precision(6);
            line << "samples " << report.samples.size() << ", accuracy " << report.accuracy
                 << ", weighted_f1 " << report.weighted_f1;
            std::cout << line.str() << "\n";
        }
    } catch (const lt::Error& e) {
        std::cerr << "error (" << lt::error_kind_name(e.kind()) << "): " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
