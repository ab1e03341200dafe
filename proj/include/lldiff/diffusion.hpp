#pragma once

#include <functional>
#include <vector>

#include "lldiff/common.hpp"
#include "lldiff/image.hpp"
#include "lldiff/rng.hpp"

namespace lldiff {

struct DiffusionConfig {
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    double rho = 7.0;
    double sigma_data = 0.5;
    int num_steps = 18;
    double p_mean = -1.2;
    double p_std = 1.2;
    int ilvr_steps = 6;

    void validate() const {
        if (!(sigma_min > 0) || !(sigma_min < sigma_max))
            throw ArgError("diffusion config: need 0 < sigma_min < sigma_max");
        if (num_steps < 2) throw ArgError("diffusion config: num_steps >= 2");
        if (ilvr_steps < 0 || ilvr_steps > num_steps)
            throw ArgError("diffusion config: ilvr_steps in [0, num_steps]");
        if (!(rho > 0) || !(sigma_data > 0))
            throw ArgError("diffusion config: rho and sigma_data must be positive");
    }
};

// descending schedule sigma_0..sigma_N with sigma_N = 0
std::vector<double> sigma_steps(const DiffusionConfig& cfg);

// log-normal training noise level: exp(p_mean + p_std * z)
double sample_training_sigma(const DiffusionConfig& cfg, Pcg32& rng);

// EDM loss weight lambda(sigma) = (sigma^2 + sigma_data^2) / (sigma * sigma_data)^2
double loss_weight(double sigma, double sigma_data);

// 2x block-average low-pass (down-by-2 box then up-by-2 replicate), exact
// projector on even-sized inputs; channels-last interleaved layout.
void lowpass_phi(const float* x, int spatial, int channels, float* out);

// x <- x - phi(x) + phi(ref + sigma_t * n); raw patch form used by the sampler
void ilvr_blend(float* x, const float* ref, int spatial, double sigma_t, Pcg32& rng);
// image form with shape checking (normalized-domain states)
Image ilvr_blend(const Image& state, const Image& reference, double sigma_t, Pcg32& rng);

// evaluates the denoiser D(x; sigma) for a batch sharing one sigma
using DenoiseFn =
    std::function<void(const float* x, double sigma, int batch, float* out)>;

struct IlvrGuide {
    const float* ref = nullptr;  // [batch, spatial, spatial, 3] references
    int steps = 0;               // guide the first `steps` schedule steps
};

// test hook: called after every completed step (post-guidance); lowband is
// phi(ref + sigma_next * n) for guided steps, null otherwise
struct SampleObserver {
    std::function<void(int step, double sigma_next, const float* x, const float* lowband)>
        after_step;
};

// Deterministic 2nd-order (Heun) sampler. rngs: one stream per example, used
// for the initial noise then one field per guided step; x_out is
// [batch, spatial, spatial, 3].
void heun_sample(const DenoiseFn& denoise, int batch, int spatial, const DiffusionConfig& cfg,
                 Pcg32* rngs, const IlvrGuide* guide, float* x_out,
                 const SampleObserver* observer = nullptr);

}  // namespace lldiff
