#pragma once

#include <vector>

#include "lldiff/denoiser.hpp"
#include "lldiff/diffusion.hpp"
#include "lldiff/image.hpp"
#include "lldiff/normalize.hpp"
#include "lldiff/rng.hpp"

namespace lldiff {

// patch side used everywhere; scales are gamma(s) = 2^(s+5) in {32..256}
constexpr int kPatch = 32;

int gamma(int s);
int draw_scale(Pcg32& rng);  // uniform over {0,1,2,3}

struct CondNoiseConfig {
    double eta_sigma_max = 0.1;
    void validate() const {
        if (eta_sigma_max < 0) throw ArgError("conditioning noise: eta_sigma_max must be >= 0");
    }
};

struct TrainingExample {
    std::vector<float> cond;    // [32,32,9] per-pixel channel order: c_x, c_y1, c_y2
    std::vector<float> target;  // [32,32,3]
};

// One aligned 32x32 training pair at scale s from a normalized 256x256 (x,y).
// s=0 takes whole downsampled images (conditioning = 3 copies of the low-light
// estimate, no crop, no eta); s>0 crops all channels at one shared offset and
// perturbs c_y1/c_y2 with shared-sigma Gaussian eta.
TrainingExample build_training_example(const Image& x, const Image& y, int s,
                                       const CondNoiseConfig& cn, Pcg32& rng);

struct ConditioningGrid {
    int s = 0;
    int side = 1;               // patches per side; count = side^2
    std::vector<float> stacks;  // [M,32,32,9]
    std::vector<float> refs;    // [M,32,32,3] c_y1 patches (guidance references)
    int count() const { return side * side; }
};

// Inference conditioning at scale s >= 1: c_x = downsampled low-light input,
// c_y1 = previous-scale prediction upsampled, c_y2 = scale-0 prediction
// upsampled; no eta; tiled into disjoint 32x32 patches.
ConditioningGrid build_inference_conditioning(const Image& x, const std::vector<float>& y_prev,
                                              int prev_size, const std::vector<float>& y_first,
                                              int s);

// nearest/block upsample of a channels-last square tensor by an integer factor
std::vector<float> replicate_up(const std::vector<float>& src, int size, int channels,
                                int factor);

struct InferOptions {
    bool ilvr = true;
    int samples = 1;
};

// Full cascade: normalize, enhance at 32, then guided patch diffusion through
// 64/128/256 feeding each scale's stitched result forward; returns sRGB
// reconstructions (one per sample seed).
std::vector<Image> cascade_infer(const Image& x_srgb, UNet<float>& net,
                                 const DiffusionConfig& dcfg, const NormStatsPair& stats,
                                 uint64_t seed, const InferOptions& opts);

}  // namespace lldiff
