#include "leantta/tensor.hpp"

#include <cmath>
#include <sstream>

namespace leantta {

std::int64_t Tensor::count(const std::vector<std::int64_t>& shape) {
    if (shape.empty() || shape.size() > 4) {
        throw_shape("tensor rank must be 1..4, got " + std::to_string(shape.size()));
    }
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d < 1) throw_shape("tensor extents must be >= 1");
        n *= d;
    }
    return n;
}

void Tensor::validate() const {
    std::int64_t n = count(shape_);
    if (n != static_cast<std::int64_t>(data_.size())) {
        throw_shape("tensor data length " + std::to_string(data_.size()) +
                    " does not match shape product " + std::to_string(n));
    }
}

bool Tensor::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ",";
        os << shape_[i];
    }
    os << ")";
    return os.str();
}

}  // namespace leantta
