#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lldiff/image.hpp"

namespace lldiff {

// Tail normalization for right-tailed low-light intensities: fourth root,
// Z-score against fitted stats, halve — lands the bulk of the data near
// N(0, 0.5) inside [-1, 1]. Exact inverse on the unclamped region.
struct NormStats {
    double mu = 0.0;      // mean of x^(1/4) pooled over pixels and channels
    double sigma = 1.0;   // population std of the same
    std::string domain_label = "lowlight";  // lowlight | welllit
    long sample_count = 0;  // images that contributed
};

NormStats fit_stats(const std::vector<Image>& sample, const std::string& domain_label);

// v = ((x^(1/4) - mu)/sigma)/2, clamped to [-1,1]. clamp_fraction (optional
// out) reports the share of pixels that hit the clamp.
Image tail_normalize(const Image& img, const NormStats& stats, double* clamp_fraction = nullptr);

// x = max(0, 2 v sigma + mu)^4, clamped to [0,1]
Image tail_denormalize(const Image& img, const NormStats& stats);

// Scalar forms used by the training hot path (no Image wrapper, no clamp
// bookkeeping). fourth_root is sqrt∘sqrt: exact and fast.
inline float fourth_root(float x) { return std::sqrt(std::sqrt(x)); }
inline float tail_normalize_scalar(float x, const NormStats& s) {
    return (float)(((fourth_root(x) - s.mu) / s.sigma) * 0.5);
}
inline float tail_denormalize_scalar(float v, const NormStats& s) {
    float r = (float)(2.0 * v * s.sigma + s.mu);
    if (r < 0.f) r = 0.f;
    r *= r;
    return r * r;
}

// Both domains together, as written/read by the CLI `stats` command.
struct NormStatsPair {
    NormStats lowlight;
    NormStats welllit;
};

void save_stats(const NormStatsPair& stats, const std::string& path);
NormStatsPair load_stats(const std::string& path);

}  // namespace lldiff
