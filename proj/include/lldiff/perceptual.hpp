#pragma once

#include <memory>

namespace lldiff {

// Pluggable perceptual distance on 3-channel patches (channels-last).
// Contract: nonnegative, exactly zero on identical inputs, differentiable.
// d_pred, when non-null, is ACCUMULATED with weight * d(metric)/d(pred).
struct PerceptualMetric {
    virtual ~PerceptualMetric() = default;
    virtual double eval(const float* pred, const float* target, int h, int w,
                        float* d_pred = nullptr, float weight = 1.0f) const = 0;
};

// Default: charbonnier-smoothed L1 between Sobel gradient magnitudes at
// full and half resolution (edge-structure proxy; a learned-feature metric
// can replace it through the same interface).
struct SobelPerceptual final : PerceptualMetric {
    double eval(const float* pred, const float* target, int h, int w, float* d_pred,
                float weight) const override;
};

std::unique_ptr<PerceptualMetric> make_default_perceptual();

// double-precision twin of the default metric, for gradient verification
double sobel_perceptual_ref(const double* pred, const double* target, int h, int w,
                            double* d_pred);

}  // namespace lldiff
