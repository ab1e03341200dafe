#pragma once

#include <cstdint>

#include "lldiff/image.hpp"
#include "lldiff/rng.hpp"

namespace lldiff {

struct DegradeParams {
    double brightness = 0.4;   // V-channel scale, in (0,1]
    double noise_level = 0.25; // Poisson-Gaussian level ℓ >= 0
    uint64_t seed = 0;
};

// Scale the HSV value channel by `brightness`; hue/saturation untouched.
Image dim(const Image& img, double brightness);

// One pre-clamp noise draw ε ~ N(0, σ_r² + σ_s·x) with σ_s = ℓ² (shot gain)
// and σ_r = ℓ/4 (read floor); exposed so the noise statistics can be
// measured before clamping truncates the tails.
double poisson_gaussian_noise(double x, double level, Pcg32& rng);

// Heteroscedastic sensor noise: noisy = clamp(x + ε) per pixel, ε as above.
// Zero-mean pre-clamp.
Image add_poisson_gaussian(const Image& img, double level, Pcg32& rng);

// Full low-light simulation: dim then noise. Domain-agnostic; callers pick
// the domain their data lives in.
Image degrade(const Image& img, const DegradeParams& params, Pcg32& rng);

// Paired training augmentation: one of {Gaussian blur σ∈[0.3,1.0],
// unsharp sharpen amount∈[0.2,0.8]} plus brightness/saturation jitter in
// [0.9,1.1], identical draws applied to both images. Works on whatever
// color domain the pair is tagged with (clamped back to range).
void augment(Image& a, Image& b, Pcg32& rng);

// Gaussian blur with a normalized truncated kernel (radius 3σ); exposed for
// tests of the kernel-mass property.
Image gaussian_blur(const Image& img, double sigma);

}  // namespace lldiff
