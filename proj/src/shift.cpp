#include "leantta/shift.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "leantta/io.hpp"
#include "leantta/rng.hpp"

namespace leantta::shift {

const char* shift_kind_name(ShiftKind k) {
    switch (k) {
        case ShiftKind::Identity: return "identity";
        case ShiftKind::GaussianNoise: return "gaussian-noise";
        case ShiftKind::ShotNoise: return "shot-noise";
        case ShiftKind::Brightness: return "brightness";
        case ShiftKind::Contrast: return "contrast";
        case ShiftKind::BoxBlur: return "box-blur";
        case ShiftKind::MeanShift: return "mean-shift";
        case ShiftKind::ScaleShift: return "scale-shift";
    }
    return "?";
}

ShiftKind shift_kind_from_name(const std::string& name) {
    for (int k = 0; k <= 7; ++k) {
        if (name == shift_kind_name(static_cast<ShiftKind>(k))) return static_cast<ShiftKind>(k);
    }
    throw_config("unknown corruption kind: " + name);
}

void ShiftSpec::validate() const {
    if (kind != ShiftKind::Identity && (severity < 1 || severity > 5)) {
        throw_config("corruption severity must lie in 1..5, got " + std::to_string(severity));
    }
}

namespace {

bool is_image(const Tensor& t) { return t.rank() == 3; }

void clamp_unit(Tensor& t) {
    float* p = t.data();
    for (std::int64_t i = 0; i < t.size(); ++i) p[i] = std::clamp(p[i], 0.0f, 1.0f);
}

Tensor box_blur(const Tensor& x, int radius) {
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out = Tensor::zeros({c, h, w});
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t xx = 0; xx < w; ++xx) {
                double acc = 0.0;
                int cnt = 0;
                for (std::int64_t dy = -radius; dy <= radius; ++dy)
                    for (std::int64_t dx = -radius; dx <= radius; ++dx) {
                        const std::int64_t yy = y + dy, xw = xx + dx;
                        if (yy < 0 || yy >= h || xw < 0 || xw >= w) continue;
                        acc += static_cast<double>(x.data()[(ch * h + yy) * w + xw]);
                        ++cnt;
                    }
                out.data()[(ch * h + y) * w + xx] = static_cast<float>(acc / cnt);
            }
    return out;
}

}  // namespace

Tensor apply_corruption(const Tensor& x, const ShiftSpec& spec, std::uint64_t rng_seed) {
    spec.validate();
    if (!x.all_finite()) throw_numeric("corruption input contains non-finite values");
    const int si = spec.severity - 1;

    switch (spec.kind) {
        case ShiftKind::Identity:
            return x;

        case ShiftKind::GaussianNoise: {
            Tensor out = x;
            Rng rng(rng_seed);
            const double sigma = severity_table::gaussian_sigma[si];
            float* p = out.data();
            for (std::int64_t i = 0; i < out.size(); ++i) {
                p[i] = static_cast<float>(static_cast<double>(p[i]) + sigma * rng.next_normal());
            }
            if (is_image(x)) clamp_unit(out);
            return out;
        }

        case ShiftKind::ShotNoise: {
            // Poisson-scaled noise approximated by a Gaussian with variance x*c.
            Tensor out = x;
            Rng rng(rng_seed);
            const double c = severity_table::shot_var_coeff[si];
            float* p = out.data();
            for (std::int64_t i = 0; i < out.size(); ++i) {
                const double v = std::max(0.0, static_cast<double>(p[i]));
                p[i] = static_cast<float>(static_cast<double>(p[i]) +
                                          std::sqrt(v * c) * rng.next_normal());
            }
            if (is_image(x)) clamp_unit(out);
            return out;
        }

        case ShiftKind::Brightness: {
            if (!is_image(x)) throw_config("brightness corruption needs image data (C, H, W)");
            Tensor out = x;
            const float d = static_cast<float>(severity_table::brightness_delta[si]);
            float* p = out.data();
            for (std::int64_t i = 0; i < out.size(); ++i) p[i] += d;
            return out;
        }

        case ShiftKind::Contrast: {
            if (!is_image(x)) throw_config("contrast corruption needs image data (C, H, W)");
            const double f = severity_table::contrast_factor[si];
            double sum = 0.0;
            const float* q = x.data();
            for (std::int64_t i = 0; i < x.size(); ++i) sum += static_cast<double>(q[i]);
            const double mean = sum / static_cast<double>(x.size());
            Tensor out = x;
            float* p = out.data();
            for (std::int64_t i = 0; i < out.size(); ++i) {
                p[i] = static_cast<float>(mean + f * (static_cast<double>(p[i]) - mean));
            }
            return out;
        }

        case ShiftKind::BoxBlur:
            if (!is_image(x)) throw_config("box-blur corruption needs image data (C, H, W)");
            return box_blur(x, severity_table::box_blur_radius[si]);

        case ShiftKind::MeanShift: {
            Tensor out = x;
            const float d = static_cast<float>(severity_table::mean_shift_delta_per_sev * spec.severity);
            float* p = out.data();
            for (std::int64_t i = 0; i < out.size(); ++i) p[i] += d;
            return out;
        }

        case ShiftKind::ScaleShift: {
            Tensor out = x;
            const float f =
                static_cast<float>(1.0 + severity_table::scale_shift_factor_per_sev * spec.severity);
            float* p = out.data();
            for (std::int64_t i = 0; i < out.size(); ++i) p[i] *= f;
            return out;
        }
    }
    throw_config("unhandled corruption kind");
}

void LabeledDataset::validate() const {
    if (inputs.size() != labels.size()) throw_config("dataset inputs/labels length mismatch");
    if (class_count < 1) throw_config("dataset class count must be >= 1");
    for (std::uint16_t l : labels) {
        if (l >= class_count) throw_config("dataset label " + std::to_string(l) + " >= class count");
    }
    for (const Tensor& t : inputs) {
        if (!t.same_shape(inputs.front())) throw_shape("dataset samples must share one shape");
    }
}

void save_dataset(const LabeledDataset& ds, const std::string& path) {
    ds.validate();
    if (ds.inputs.empty()) throw_config("refusing to save an empty dataset");
    io::Writer w(path);
    w.bytes("LTTD", 4);
    w.u32(1);  // format version
    w.u64(ds.inputs.size());
    const auto& shape = ds.inputs.front().shape();
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::int64_t d : shape) w.i64(d);
    w.u32(static_cast<std::uint32_t>(ds.class_count));
    for (const Tensor& t : ds.inputs) {
        w.bytes(t.data(), static_cast<std::size_t>(t.size()) * sizeof(float));
    }
    w.u16_array(ds.labels);
    w.close();
}

LabeledDataset load_dataset(const std::string& path) {
    io::Reader r(path);
    r.expect_magic("LTTD");
    const std::uint32_t version = r.u32();
    if (version != 1) {
        throw_version("unsupported dataset format version " + std::to_string(version) + " in " + path);
    }
    LabeledDataset ds;
    const std::uint64_t count = r.u64();
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 4) throw_parse("bad sample rank in " + path);
    std::vector<std::int64_t> shape(rank);
    for (auto& d : shape) d = r.i64();
    ds.class_count = r.u32();
    const std::int64_t per = Tensor::count(shape);
    ds.inputs.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::vector<float> vals(static_cast<std::size_t>(per));
        r.bytes(vals.data(), vals.size() * sizeof(float));
        ds.inputs.emplace_back(shape, std::move(vals));
    }
    ds.labels = r.u16_array();
    ds.validate();
    return ds;
}

void StreamSpec::validate() const {
    if (per_cell < 1) throw_config("stream per-cell count must be >= 1");
    if (kinds.empty()) throw_config("stream needs at least one corruption kind");
}

namespace {

constexpr std::uint64_t kCellSeedTag = 0x5354524d43454c4cULL;   // cell membership
constexpr std::uint64_t kNoiseSeedTag = 0x5354524d4e4f4953ULL;  // per-slot corruption noise

// K distinct base indices for one (kind, severity) cell. Depends only on the
// cell identity, so streams built with different seeds hold the same items.
std::vector<int> cell_indices(std::size_t base_size, ShiftKind kind, int severity, int k) {
    if (static_cast<std::size_t>(k) > base_size) {
        throw_config("insufficient base data: need " + std::to_string(k) + " samples, have " +
                     std::to_string(base_size));
    }
    Rng rng(mix_seed(kCellSeedTag,
                     mix_seed(static_cast<std::uint64_t>(kind),
                              static_cast<std::uint64_t>(severity))));
    std::vector<int> pool(base_size);
    std::iota(pool.begin(), pool.end(), 0);
    // partial Fisher-Yates: first k entries are a uniform sample without replacement
    for (int i = 0; i < k; ++i) {
        const std::uint64_t j = i + rng.next_below(base_size - static_cast<std::uint64_t>(i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

StreamItem make_item(const LabeledDataset& base, int index, ShiftKind kind, int severity, int slot) {
    StreamItem item;
    item.shift = ShiftSpec{kind, kind == ShiftKind::Identity ? 1 : severity};
    const std::uint64_t noise_seed =
        mix_seed(kNoiseSeedTag, mix_seed(static_cast<std::uint64_t>(kind),
                                         mix_seed(static_cast<std::uint64_t>(severity),
                                                  static_cast<std::uint64_t>(slot))));
    item.input = apply_corruption(base.inputs[static_cast<std::size_t>(index)], item.shift, noise_seed);
    item.label = base.labels[static_cast<std::size_t>(index)];
    item.base_index = index;
    return item;
}

}  // namespace

std::vector<StreamItem> build_abrupt_stream(const LabeledDataset& base, const StreamSpec& spec) {
    base.validate();
    spec.validate();
    std::vector<StreamItem> stream;
    stream.reserve(spec.kinds.size() * 5 * static_cast<std::size_t>(spec.per_cell));
    for (ShiftKind kind : spec.kinds) {
        for (int severity = 1; severity <= 5; ++severity) {
            const auto idx = cell_indices(base.size(), kind, severity, spec.per_cell);
            for (int slot = 0; slot < spec.per_cell; ++slot) {
                stream.push_back(make_item(base, idx[static_cast<std::size_t>(slot)], kind, severity, slot));
            }
        }
    }
    Rng rng(mix_seed(spec.seed, 0xab52557054ULL));
    rng.shuffle(stream.begin(), stream.end());
    return stream;
}

std::vector<StreamItem> build_gradual_stream(const LabeledDataset& base, const StreamSpec& spec) {
    base.validate();
    spec.validate();
    static constexpr int kSeverityWalk[9] = {1, 2, 3, 4, 5, 4, 3, 2, 1};
    std::vector<StreamItem> stream;
    stream.reserve(spec.kinds.size() * 9 * static_cast<std::size_t>(spec.per_cell));
    for (std::size_t ki = 0; ki < spec.kinds.size(); ++ki) {
        const ShiftKind kind = spec.kinds[ki];
        for (int cell = 0; cell < 9; ++cell) {
            const int severity = kSeverityWalk[cell];
            const auto idx = cell_indices(base.size(), kind, severity, spec.per_cell);
            std::vector<StreamItem> cell_items;
            cell_items.reserve(static_cast<std::size_t>(spec.per_cell));
            for (int slot = 0; slot < spec.per_cell; ++slot) {
                cell_items.push_back(
                    make_item(base, idx[static_cast<std::size_t>(slot)], kind, severity, slot));
            }
            Rng rng(mix_seed(spec.seed, mix_seed(static_cast<std::uint64_t>(ki),
                                                 static_cast<std::uint64_t>(cell))));
            rng.shuffle(cell_items.begin(), cell_items.end());
            for (auto& it : cell_items) stream.push_back(std::move(it));
        }
    }
    return stream;
}

std::vector<StreamItem> identity_stream(const LabeledDataset& base) {
    base.validate();
    std::vector<StreamItem> stream;
    stream.reserve(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        StreamItem item;
        item.input = base.inputs[i];
        item.label = base.labels[i];
        item.shift = ShiftSpec{ShiftKind::Identity, 1};
        item.base_index = static_cast<int>(i);
        stream.push_back(std::move(item));
    }
    return stream;
}

}  // namespace leantta::shift
