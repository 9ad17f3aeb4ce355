#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "leantta/error.hpp"

namespace leantta {

// Dense rank-1..4 float tensor, row-major. Image-like data is (N, C, H, W),
// feature data is (N, F). Immutable by convention once built: kernels take
// const references and return fresh tensors.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<std::int64_t> shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        validate();
    }

    static Tensor zeros(std::vector<std::int64_t> shape) {
        std::int64_t n = count(shape);
        return Tensor(std::move(shape), std::vector<float>(static_cast<std::size_t>(n), 0.0f));
    }

    static Tensor full(std::vector<std::int64_t> shape, float value) {
        std::int64_t n = count(shape);
        return Tensor(std::move(shape), std::vector<float>(static_cast<std::size_t>(n), value));
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    const float* data() const { return data_.data(); }
    float* data() { return data_.data(); }
    const std::vector<float>& values() const { return data_; }
    std::vector<float>& values() { return data_; }

    float at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return data_[static_cast<std::size_t>(((n * dim(1) + c) * dim(2) + h) * dim(3) + w)];
    }
    float& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
        return data_[static_cast<std::size_t>(((n * dim(1) + c) * dim(2) + h) * dim(3) + w)];
    }
    float at(std::int64_t n, std::int64_t f) const {
        return data_[static_cast<std::size_t>(n * dim(1) + f)];
    }
    float& at(std::int64_t n, std::int64_t f) {
        return data_[static_cast<std::size_t>(n * dim(1) + f)];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    // True when every element is finite.
    bool all_finite() const;

    std::string shape_str() const;

    static std::int64_t count(const std::vector<std::int64_t>& shape);

private:
    void validate() const;

    std::vector<std::int64_t> shape_;
    std::vector<float> data_;
};

}  // namespace leantta
