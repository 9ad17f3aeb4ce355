#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "leantta/tensor.hpp"

namespace leantta::shift {

enum class ShiftKind : std::uint8_t {
    Identity = 0,
    GaussianNoise = 1,
    ShotNoise = 2,
    Brightness = 3,
    Contrast = 4,
    BoxBlur = 5,
    MeanShift = 6,
    ScaleShift = 7,
};

const char* shift_kind_name(ShiftKind k);
ShiftKind shift_kind_from_name(const std::string& name);

struct ShiftSpec {
    ShiftKind kind = ShiftKind::Identity;
    int severity = 1;  // 1..5, ignored by Identity

    void validate() const;
};

// Per-severity corruption parameters (index severity-1).
namespace severity_table {
inline constexpr double gaussian_sigma[5] = {0.04, 0.08, 0.12, 0.18, 0.26};
inline constexpr double shot_var_coeff[5] = {1.0 / 60, 1.0 / 25, 1.0 / 12, 1.0 / 5, 1.0 / 3};
inline constexpr double brightness_delta[5] = {0.1, 0.2, 0.3, 0.4, 0.5};
inline constexpr double contrast_factor[5] = {0.75, 0.6, 0.45, 0.3, 0.15};
inline constexpr int box_blur_radius[5] = {1, 2, 3, 4, 5};
inline constexpr double mean_shift_delta_per_sev = 0.2;
inline constexpr double scale_shift_factor_per_sev = 0.15;
}  // namespace severity_table

// Applies one corruption. Deterministic for a fixed seed; image corruptions
// (Brightness, Contrast, BoxBlur) need a rank-3 (C, H, W) sample and the two
// noise kinds clamp image data back to [0, 1].
Tensor apply_corruption(const Tensor& x, const ShiftSpec& spec, std::uint64_t rng_seed);

struct LabeledDataset {
    std::vector<Tensor> inputs;  // uniform per-sample shape, no batch extent
    std::vector<std::uint16_t> labels;
    std::int64_t class_count = 0;

    std::size_t size() const { return inputs.size(); }
    void validate() const;
};

// Binary dataset container, magic "LTTD": sample count, per-sample shape,
// f32 data block, u16 label block, class count. Round-trip is bit-exact.
void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

struct StreamSpec {
    enum class Mode { Abrupt, Gradual };
    Mode mode = Mode::Abrupt;
    int per_cell = 10;  // K samples per (kind, severity) cell
    std::vector<ShiftKind> kinds;
    std::uint64_t seed = 0;

    void validate() const;
};

struct StreamItem {
    Tensor input;  // per-sample shape (no batch extent)
    std::uint16_t label = 0;
    ShiftSpec shift;
    int base_index = -1;  // index into the source dataset
};

// K samples per (kind, severity) cell, corrupted, then globally shuffled.
// Cell contents and corruption noise depend only on (kind, severity, slot),
// so different stream seeds permute the same multiset of items.
std::vector<StreamItem> build_abrupt_stream(const LabeledDataset& base, const StreamSpec& spec);

// Per kind: severity walks 1,2,3,4,5,4,3,2,1 with K samples per cell (sample
// order shuffled within each cell); kinds visited in list order.
std::vector<StreamItem> build_gradual_stream(const LabeledDataset& base, const StreamSpec& spec);

// Every sample once, uncorrupted.
std::vector<StreamItem> identity_stream(const LabeledDataset& base);

// Bounded FIFO channel for a producer thread feeding an evaluator: push blocks
// while full, pop blocks while empty, close() releases waiting consumers.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

    void push(T item) {
        std::unique_lock<std::mutex> lock(mu_);
        not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_) throw_config("push on a closed queue");
        items_.push_back(std::move(item));
        not_empty_.notify_one();
    }

    std::optional<T> pop() {
        std::unique_lock<std::mutex> lock(mu_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard<std::mutex> lock(mu_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::mutex mu_;
    std::condition_variable not_full_, not_empty_;
    std::deque<T> items_;
    bool closed_ = false;
};

}  // namespace leantta::shift
