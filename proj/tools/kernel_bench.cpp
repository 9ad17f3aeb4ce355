// Benchmark comparing the OpenMP kernels against the serial reference
// implementations. Verifies elementwise agreement while timing both paths.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <omp.h>

#include "leantta/adapt.hpp"
#include "leantta/kernels.hpp"
#include "leantta/reference.hpp"
#include "leantta/rng.hpp"

using namespace leantta;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, Rng& rng) {
    std::vector<float> v(static_cast<std::size_t>(Tensor::count(shape)));
    for (auto& x : v) x = static_cast<float>(2.0 * rng.next_double() - 1.0);
    return Tensor(std::move(shape), std::move(v));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double mx = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        mx = std::max(mx, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
    }
    return mx;
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        best = std::min(best, dt);
    }
    return best;
}

void row(const char* name, double serial_s, double parallel_s, double diff) {
    std::printf("%-22s %10.3f ms %10.3f ms %8.2fx   max|d|=%.3g\n", name, serial_s * 1e3,
                parallel_s * 1e3, serial_s / parallel_s, diff);
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 5;
    if (argc > 1) reps = std::max(1, std::atoi(argv[1]));
    std::printf("threads: %d, best of %d reps\n", omp_get_max_threads(), reps);
    std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    Rng rng(2024);

    {
        const Tensor x = random_tensor({8, 16, 64, 64}, rng);
        const Tensor w = random_tensor({32, 16, 3, 3}, rng);
        std::vector<float> bias(32, 0.1f);
        Tensor out_p, out_s;
        const double tp = time_best_of(reps, [&] { out_p = conv2d(x, w, bias, 1, 1); });
        const double ts = time_best_of(reps, [&] { out_s = ref::conv2d_serial(x, w, bias, 1, 1); });
        row("conv2d 8x16x64x64", ts, tp, max_abs_diff(out_p, out_s));
    }
    {
        const Tensor x = random_tensor({256, 512}, rng);
        const Tensor w = random_tensor({512, 512}, rng);
        std::vector<float> bias(512, 0.0f);
        Tensor out_p, out_s;
        const double tp = time_best_of(reps, [&] { out_p = linear(x, w, bias); });
        const double ts = time_best_of(reps, [&] { out_s = ref::linear_serial(x, w, bias); });
        row("linear 256x512x512", ts, tp, max_abs_diff(out_p, out_s));
    }
    {
        const Tensor x = random_tensor({16, 64, 64, 64}, rng);
        Tensor out_p, out_s;
        const double tp = time_best_of(reps, [&] { out_p = global_avg_pool(x); });
        const double ts = time_best_of(reps, [&] { out_s = ref::global_avg_pool_serial(x); });
        row("gap 16x64x64x64", ts, tp, max_abs_diff(out_p, out_s));
    }
    {
        // per-channel statistics against a plain scalar loop
        const Tensor x = random_tensor({4, 128, 64, 64}, rng);
        adapt::ChannelStats stats;
        const double tp = time_best_of(reps, [&] { stats = adapt::instance_stats(x); });
        std::vector<double> mu_ref(128, 0.0), var_ref(128, 0.0);
        const double ts = time_best_of(reps, [&] {
            const std::int64_t plane = 64 * 64;
            for (std::int64_t c = 0; c < 128; ++c) {
                double s = 0.0;
                for (std::int64_t n = 0; n < 4; ++n)
                    for (std::int64_t i = 0; i < plane; ++i) {
                        s += x.data()[(n * 128 + c) * plane + i];
                    }
                mu_ref[static_cast<std::size_t>(c)] = s / (4.0 * plane);
                double sq = 0.0;
                for (std::int64_t n = 0; n < 4; ++n)
                    for (std::int64_t i = 0; i < plane; ++i) {
                        const double d =
                            x.data()[(n * 128 + c) * plane + i] - mu_ref[static_cast<std::size_t>(c)];
                        sq += d * d;
                    }
                var_ref[static_cast<std::size_t>(c)] = sq / (4.0 * plane);
            }
        });
        double diff = 0.0;
        for (std::size_t c = 0; c < 128; ++c) {
            diff = std::max(diff, std::abs(stats.mu[c] - mu_ref[c]));
            diff = std::max(diff, std::abs(stats.sigma2[c] - var_ref[c]));
        }
        row("instance_stats 128ch", ts, tp, diff);
    }
    return 0;
}
