#pragma once

#include <cstdint>
#include <vector>

#include "leantta/tensor.hpp"

namespace leantta::adapt {

// Frozen per-channel normalization parameters captured at training time:
// running mean / variance plus the learned affine transform.
struct NormParams {
    std::vector<float> mu_s;      // per-channel source mean
    std::vector<float> sigma2_s;  // per-channel source variance, >= 0
    std::vector<float> gamma;
    std::vector<float> beta;
    double eps = 1e-5;  // double so tau=1 adaptation reproduces the frozen path bitwise

    std::int64_t channels() const { return static_cast<std::int64_t>(mu_s.size()); }
    void validate() const;
};

enum class DistanceMode { RawSum, ChannelMean };

struct AdaptConfig {
    double tau = 0.9;     // source weight in the stabilizing average
    double lambda = 0.9;  // divergence scaler in the blending step
    double eps_norm = 1e-5;  // added to the blended variance before the square root
    double eps_inv = 1e-5;   // added to the source variance before inversion
    DistanceMode distance_mode = DistanceMode::RawSum;

    void validate() const;
};

struct ChannelStats {
    std::vector<double> mu;
    std::vector<double> sigma2;

    std::int64_t channels() const { return static_cast<std::int64_t>(mu.size()); }
};

// One normalization layer's adaptation record.
struct NormRecord {
    int layer_id = -1;
    double d = 0.0;
    ChannelStats instance;    // (mu_t, sigma2_t)
    ChannelStats stabilized;  // (mu_b, sigma2_b)
    ChannelStats blended;     // (mu_new, sigma2_new)
    bool pooled_batch = false;  // batch > 1: moments pooled over N x H x W
};

// Per-channel moments of an (N, C, H, W) or (N, F) activation: mean over the
// N*H*W positions (N positions for feature data) and the population variance.
ChannelStats instance_stats(const Tensor& activation);

// mu_b = tau*mu_s + (1-tau)*mu_t, same for the variances.
ChannelStats stabilize(const ChannelStats& source, const ChannelStats& target, double tau);

// d = 1 - exp(-m2) where m2 is the squared Mahalanobis distance between the
// stabilized and source means under the diagonal source covariance. m2 is
// clamped at 700 before exponentiation, so d always lands in [0, 1).
double divergence(const std::vector<double>& stabilized_mu, const NormParams& source,
                  DistanceMode mode, double eps_inv);

// mu_new = d*lambda*mu_s + (1 - d*lambda)*mu_b, same for the variances.
ChannelStats blend(const NormParams& source, const ChannelStats& stabilized, double d,
                   double lambda);

// Full per-sample pipeline: instance stats -> stabilize -> divergence ->
// blend -> normalize. The parameters are never modified; every call starts
// from the same frozen state.
std::pair<Tensor, NormRecord> adaptive_normalize(const Tensor& activation, const NormParams& params,
                                                 const AdaptConfig& cfg);

// Inference-time normalization with the frozen source statistics.
Tensor frozen_normalize(const Tensor& activation, const NormParams& params);

// Normalization with explicitly supplied statistics (used by the frozen path,
// the adaptive path and the running-average baseline, so that equal statistics
// give bitwise-equal outputs).
Tensor normalize_with(const Tensor& activation, const std::vector<double>& mu,
                      const std::vector<double>& sigma2, const NormParams& params, double eps);

}  // namespace leantta::adapt
