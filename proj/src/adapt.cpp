#include "leantta/adapt.hpp"

#include <cmath>

namespace leantta::adapt {

void NormParams::validate() const {
    const std::size_t c = mu_s.size();
    if (c == 0) throw_shape("NormParams must have at least one channel");
    if (sigma2_s.size() != c || gamma.size() != c || beta.size() != c) {
        throw_shape("NormParams vectors must share one channel count");
    }
    for (float v : sigma2_s) {
        if (v < 0.0f) throw_config("NormParams variance must be >= 0");
    }
    if (!(eps > 0.0)) throw_config("NormParams eps must be > 0");
}

void AdaptConfig::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw_config("tau must lie in [0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw_config("lambda must lie in [0, 1]");
    if (!(eps_norm > 0.0)) throw_config("eps_norm must be > 0");
    if (!(eps_inv > 0.0)) throw_config("eps_inv must be > 0");
}

namespace {

// Channel count and per-channel position count for the two supported layouts.
std::pair<std::int64_t, std::int64_t> channel_layout(const Tensor& t) {
    if (t.rank() == 4) return {t.dim(1), t.dim(0) * t.dim(2) * t.dim(3)};
    if (t.rank() == 2) return {t.dim(1), t.dim(0)};
    throw_shape("channel statistics need a rank-2 or rank-4 tensor, got " + t.shape_str());
}

}  // namespace

ChannelStats instance_stats(const Tensor& activation) {
    auto [channels, positions] = channel_layout(activation);
    ChannelStats stats;
    stats.mu.assign(static_cast<std::size_t>(channels), 0.0);
    stats.sigma2.assign(static_cast<std::size_t>(channels), 0.0);

    const float* p = activation.data();
    if (activation.rank() == 4) {
        const std::int64_t n_batch = activation.dim(0);
        const std::int64_t plane = activation.dim(2) * activation.dim(3);
#pragma omp parallel for schedule(static)
        for (std::int64_t c = 0; c < channels; ++c) {
            double sum = 0.0;
            for (std::int64_t n = 0; n < n_batch; ++n) {
                const float* src = p + (n * channels + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) sum += static_cast<double>(src[i]);
            }
            const double mean = sum / static_cast<double>(positions);
            double sq = 0.0;
            for (std::int64_t n = 0; n < n_batch; ++n) {
                const float* src = p + (n * channels + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    const double dlt = static_cast<double>(src[i]) - mean;
                    sq += dlt * dlt;
                }
            }
            stats.mu[static_cast<std::size_t>(c)] = mean;
            double var = sq / static_cast<double>(positions);
            stats.sigma2[static_cast<std::size_t>(c)] = var < 0.0 ? 0.0 : var;
        }
    } else {
        const std::int64_t n_batch = activation.dim(0);
#pragma omp parallel for schedule(static)
        for (std::int64_t c = 0; c < channels; ++c) {
            double sum = 0.0;
            for (std::int64_t n = 0; n < n_batch; ++n) sum += static_cast<double>(p[n * channels + c]);
            const double mean = sum / static_cast<double>(n_batch);
            double sq = 0.0;
            for (std::int64_t n = 0; n < n_batch; ++n) {
                const double dlt = static_cast<double>(p[n * channels + c]) - mean;
                sq += dlt * dlt;
            }
            stats.mu[static_cast<std::size_t>(c)] = mean;
            double var = sq / static_cast<double>(n_batch);
            stats.sigma2[static_cast<std::size_t>(c)] = var < 0.0 ? 0.0 : var;
        }
    }
    return stats;
}

ChannelStats stabilize(const ChannelStats& source, const ChannelStats& target, double tau) {
    if (source.channels() != target.channels()) {
        throw_shape("stabilize channel mismatch: " + std::to_string(source.channels()) + " vs " +
                    std::to_string(target.channels()));
    }
    const std::size_t c = source.mu.size();
    ChannelStats out;
    out.mu.resize(c);
    out.sigma2.resize(c);
    for (std::size_t i = 0; i < c; ++i) {
        out.mu[i] = tau * source.mu[i] + (1.0 - tau) * target.mu[i];
        out.sigma2[i] = tau * source.sigma2[i] + (1.0 - tau) * target.sigma2[i];
    }
    return out;
}

double divergence(const std::vector<double>& stabilized_mu, const NormParams& source,
                  DistanceMode mode, double eps_inv) {
    const std::size_t c = stabilized_mu.size();
    if (c != source.mu_s.size()) {
        throw_shape("divergence channel mismatch: " + std::to_string(c) + " vs " +
                    std::to_string(source.mu_s.size()));
    }
    double m2 = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        const double diff = stabilized_mu[i] - static_cast<double>(source.mu_s[i]);
        m2 += diff * diff / (static_cast<double>(source.sigma2_s[i]) + eps_inv);
    }
    if (mode == DistanceMode::ChannelMean) m2 /= static_cast<double>(c);
    if (m2 > 700.0) m2 = 700.0;
    double d = 1.0 - std::exp(-m2);
    if (d < 0.0) d = 0.0;
    // 1 - exp(-m2) rounds to exactly 1.0 once exp underflows past the ulp at
    // 1; keep the contract d < 1 strict
    const double below_one = std::nextafter(1.0, 0.0);
    if (d > below_one) d = below_one;
    return d;
}

ChannelStats blend(const NormParams& source, const ChannelStats& stabilized, double d,
                   double lambda) {
    const std::size_t c = stabilized.mu.size();
    if (c != source.mu_s.size()) {
        throw_shape("blend channel mismatch: " + std::to_string(c) + " vs " +
                    std::to_string(source.mu_s.size()));
    }
    const double w = d * lambda;
    ChannelStats out;
    out.mu.resize(c);
    out.sigma2.resize(c);
    for (std::size_t i = 0; i < c; ++i) {
        out.mu[i] = w * static_cast<double>(source.mu_s[i]) + (1.0 - w) * stabilized.mu[i];
        out.sigma2[i] = w * static_cast<double>(source.sigma2_s[i]) + (1.0 - w) * stabilized.sigma2[i];
    }
    return out;
}

Tensor normalize_with(const Tensor& activation, const std::vector<double>& mu,
                      const std::vector<double>& sigma2, const NormParams& params, double eps) {
    auto [channels, positions] = channel_layout(activation);
    (void)positions;
    if (channels != params.channels() ||
        channels != static_cast<std::int64_t>(mu.size()) ||
        channels != static_cast<std::int64_t>(sigma2.size())) {
        throw_shape("normalize channel mismatch for activation " + activation.shape_str());
    }

    Tensor out = activation;
    float* p = out.data();
    if (activation.rank() == 4) {
        const std::int64_t n_batch = activation.dim(0);
        const std::int64_t plane = activation.dim(2) * activation.dim(3);
        const std::int64_t total = n_batch * channels;
#pragma omp parallel for schedule(static)
        for (std::int64_t idx = 0; idx < total; ++idx) {
            const std::int64_t c = idx % channels;
            const double inv = 1.0 / std::sqrt(sigma2[static_cast<std::size_t>(c)] + eps);
            const double g = static_cast<double>(params.gamma[static_cast<std::size_t>(c)]);
            const double b = static_cast<double>(params.beta[static_cast<std::size_t>(c)]);
            const double m = mu[static_cast<std::size_t>(c)];
            float* dst = p + idx * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                dst[i] = static_cast<float>(g * ((static_cast<double>(dst[i]) - m) * inv) + b);
            }
        }
    } else {
        const std::int64_t n_batch = activation.dim(0);
        const std::int64_t total = n_batch * channels;
#pragma omp parallel for schedule(static)
        for (std::int64_t idx = 0; idx < total; ++idx) {
            const std::int64_t c = idx % channels;
            const double inv = 1.0 / std::sqrt(sigma2[static_cast<std::size_t>(c)] + eps);
            const double g = static_cast<double>(params.gamma[static_cast<std::size_t>(c)]);
            const double b = static_cast<double>(params.beta[static_cast<std::size_t>(c)]);
            const double m = mu[static_cast<std::size_t>(c)];
            p[idx] = static_cast<float>(g * ((static_cast<double>(p[idx]) - m) * inv) + b);
        }
    }
    return out;
}

std::pair<Tensor, NormRecord> adaptive_normalize(const Tensor& activation, const NormParams& params,
                                                 const AdaptConfig& cfg) {
    params.validate();
    cfg.validate();

    NormRecord rec;
    rec.pooled_batch = activation.dim(0) > 1;
    rec.instance = instance_stats(activation);

    ChannelStats source;
    source.mu.assign(params.mu_s.begin(), params.mu_s.end());
    source.sigma2.assign(params.sigma2_s.begin(), params.sigma2_s.end());

    rec.stabilized = stabilize(source, rec.instance, cfg.tau);
    rec.d = divergence(rec.stabilized.mu, params, cfg.distance_mode, cfg.eps_inv);
    rec.blended = blend(params, rec.stabilized, rec.d, cfg.lambda);

    Tensor out = normalize_with(activation, rec.blended.mu, rec.blended.sigma2, params, cfg.eps_norm);
    if (!out.all_finite()) throw_numeric("adaptive normalization produced a non-finite value");
    return {std::move(out), std::move(rec)};
}

Tensor frozen_normalize(const Tensor& activation, const NormParams& params) {
    std::vector<double> mu(params.mu_s.begin(), params.mu_s.end());
    std::vector<double> sigma2(params.sigma2_s.begin(), params.sigma2_s.end());
    return normalize_with(activation, mu, sigma2, params, params.eps);
}

}  // namespace leantta::adapt
