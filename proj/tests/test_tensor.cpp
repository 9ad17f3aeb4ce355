#include <doctest.h>

#include <cmath>

#include "leantta/kernels.hpp"
#include "leantta/reference.hpp"
#include "leantta/rng.hpp"
#include "leantta/tensor.hpp"

using namespace leantta;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<float> v(static_cast<std::size_t>(Tensor::count(shape)));
    for (auto& x : v) x = static_cast<float>(lo + (hi - lo) * rng.next_double());
    return Tensor(std::move(shape), std::move(v));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double mx = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        mx = std::max(mx, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
    }
    return mx;
}

}  // namespace

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<float>(5)), Error);
    CHECK_THROWS_AS(Tensor({0}, {}), Error);
    CHECK_THROWS_AS(Tensor({1, 1, 1, 1, 1}, std::vector<float>(1)), Error);
    const Tensor t = Tensor::zeros({2, 3, 4, 5});
    CHECK(t.size() == 120);
    CHECK(t.all_finite());
}

TEST_CASE("conv2d identity-shaped kernel scaling") {
    const Tensor x = Tensor::full({1, 1, 3, 3}, 1.0f);
    const Tensor w({1, 1, 1, 1}, {2.0f});
    const Tensor y = conv2d(x, w, {0.0f}, 1, 0);
    CHECK(y.shape() == std::vector<std::int64_t>{1, 1, 3, 3});
    for (std::int64_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == doctest::Approx(2.0));
}

TEST_CASE("conv2d full-window sum") {
    const Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
    const Tensor w = Tensor::full({1, 1, 2, 2}, 1.0f);
    const Tensor y = conv2d(x, w, {0.5f}, 1, 0);
    CHECK(y.shape() == std::vector<std::int64_t>{1, 1, 1, 1});
    CHECK(y.data()[0] == doctest::Approx(10.5));
}

TEST_CASE("conv2d matches the serial loop reference on random shapes") {
    Rng rng(42);
    for (int trial = 0; trial < 8; ++trial) {
        const int stride = 1 + static_cast<int>(rng.next_below(2));
        const int pad = static_cast<int>(rng.next_below(2));
        // side 8 divides evenly for stride 1; stride 2 with a 3x3 kernel needs an odd side
        const std::int64_t side = stride == 2 ? 9 : 8;
        const Tensor x = random_tensor({2, 3, side, side}, rng);
        const Tensor w = random_tensor({4, 3, 3, 3}, rng);
        std::vector<float> bias(4);
        for (auto& b : bias) b = static_cast<float>(rng.next_double() - 0.5);
        const Tensor got = conv2d(x, w, bias, stride, pad);
        const Tensor want = ref::conv2d_serial(x, w, bias, stride, pad);
        CHECK(max_abs_diff(got, want) <= 1e-6);
    }
}

TEST_CASE("conv2d error contracts") {
    const Tensor x = Tensor::zeros({1, 2, 4, 4});
    const Tensor w = Tensor::zeros({1, 3, 3, 3});
    CHECK_THROWS_AS(conv2d(x, w, {0.0f}, 1, 0), Error);
    const Tensor w2 = Tensor::zeros({1, 2, 3, 3});
    // (4 - 3) % 2 != 0 -> non-integral output extent
    CHECK_THROWS_AS(conv2d(x, w2, {0.0f}, 2, 0), Error);
    CHECK_THROWS_AS(conv2d(x, w2, std::vector<float>(2), 1, 0), Error);  // bias length
}

TEST_CASE("linear identity and dot product") {
    const Tensor x({2, 2}, {1, 2, 3, 4});
    const Tensor eye({2, 2}, {1, 0, 0, 1});
    const Tensor y = linear(x, eye, {0.0f, 0.0f});
    CHECK(max_abs_diff(y, x) == 0.0);

    const Tensor a({1, 2}, {1, 2});
    const Tensor w({1, 2}, {3, 4});
    const Tensor out = linear(a, w, {1.0f});
    CHECK(out.data()[0] == doctest::Approx(12.0));
}

TEST_CASE("linear matches the serial loop reference") {
    Rng rng(7);
    const Tensor x = random_tensor({4, 5}, rng);
    const Tensor w = random_tensor({3, 5}, rng);
    std::vector<float> bias(3);
    for (auto& b : bias) b = static_cast<float>(rng.next_double());
    CHECK(max_abs_diff(linear(x, w, bias), ref::linear_serial(x, w, bias)) <= 1e-6);
}

TEST_CASE("conv2d is linear in its input") {
    Rng rng(11);
    const Tensor x = random_tensor({1, 2, 6, 6}, rng);
    const Tensor y = random_tensor({1, 2, 6, 6}, rng);
    const Tensor w = random_tensor({3, 2, 3, 3}, rng);
    const std::vector<float> zero_bias(3, 0.0f);
    const float a = 0.7f, b = -1.3f;

    Tensor combo = Tensor::zeros({1, 2, 6, 6});
    for (std::int64_t i = 0; i < combo.size(); ++i) {
        combo.data()[i] = a * x.data()[i] + b * y.data()[i];
    }
    const Tensor lhs = conv2d(combo, w, zero_bias, 1, 1);
    const Tensor cx = conv2d(x, w, zero_bias, 1, 1);
    const Tensor cy = conv2d(y, w, zero_bias, 1, 1);
    for (std::int64_t i = 0; i < lhs.size(); ++i) {
        const double want = a * static_cast<double>(cx.data()[i]) + b * cy.data()[i];
        const double rel = std::abs(lhs.data()[i] - want) / (std::abs(want) + 1e-6);
        CHECK(rel <= 1e-5);
    }
}

TEST_CASE("relu, pool and residual examples") {
    const Tensor x({1, 3}, {-1, 0, 2});
    const Tensor y = relu(x);
    CHECK(y.data()[0] == 0.0f);
    CHECK(y.data()[1] == 0.0f);
    CHECK(y.data()[2] == 2.0f);

    const Tensor img({1, 1, 2, 2}, {1, 2, 3, 4});
    const Tensor pooled = global_avg_pool(img);
    CHECK(pooled.shape() == std::vector<std::int64_t>{1, 1});
    CHECK(pooled.data()[0] == doctest::Approx(2.5));
    CHECK(max_abs_diff(pooled, ref::global_avg_pool_serial(img)) == 0.0);

    const Tensor zeros = Tensor::zeros({1, 1, 2, 2});
    CHECK(max_abs_diff(residual_add(img, zeros), img) == 0.0);
    CHECK_THROWS_AS(residual_add(img, Tensor::zeros({1, 1, 2, 3})), Error);
    CHECK_THROWS_AS(global_avg_pool(x), Error);
}

TEST_CASE("kernels are pure: repeated calls are bitwise identical") {
    Rng rng(3);
    const Tensor x = random_tensor({2, 3, 8, 8}, rng);
    const Tensor w = random_tensor({4, 3, 3, 3}, rng);
    const std::vector<float> bias(4, 0.25f);
    const Tensor a = conv2d(x, w, bias, 1, 1);
    const Tensor b = conv2d(x, w, bias, 1, 1);
    CHECK(a.values() == b.values());
}

TEST_CASE("op counts are shape-derived") {
    OpCounts c1, c2;
    Rng rng(5);
    const Tensor x = random_tensor({1, 2, 4, 4}, rng);
    const Tensor w = random_tensor({3, 2, 3, 3}, rng);
    const std::vector<float> bias(3, 0.0f);
    conv2d(x, w, bias, 1, 1, &c1);
    conv2d(x, w, bias, 1, 1, &c2);
    CHECK(c1 == c2);
    CHECK(c1.float_mults == 3ull * 16 * 2 * 9);
}
