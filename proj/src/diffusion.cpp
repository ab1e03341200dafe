#include "lldiff/diffusion.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace lldiff {

std::vector<double> sigma_steps(const DiffusionConfig& cfg) {
    cfg.validate();
    int n = cfg.num_steps;
    std::vector<double> s(n + 1);
    double smax_r = std::pow(cfg.sigma_max, 1.0 / cfg.rho);
    double smin_r = std::pow(cfg.sigma_min, 1.0 / cfg.rho);
    for (int i = 0; i < n; ++i) {
        double t = (double)i / (n - 1);
        s[i] = std::pow(smax_r + t * (smin_r - smax_r), cfg.rho);
    }
    s[0] = cfg.sigma_max;      // pin endpoints against pow round-off
    s[n - 1] = cfg.sigma_min;
    s[n] = 0.0;
    return s;
}

double sample_training_sigma(const DiffusionConfig& cfg, Pcg32& rng) {
    return std::exp(cfg.p_mean + cfg.p_std * rng.normal());
}

double loss_weight(double sigma, double sigma_data) {
    if (!(sigma > 0)) throw ArgError("loss weight: sigma must be positive");
    double prod = sigma * sigma_data;
    return (sigma * sigma + sigma_data * sigma_data) / (prod * prod);
}

void lowpass_phi(const float* x, int spatial, int channels, float* out) {
    if (spatial < 2 || spatial % 2 != 0)
        throw ArgError("lowpass: spatial size must be even and >= 2");
    int half = spatial / 2;
    for (int by = 0; by < half; ++by)
        for (int bx = 0; bx < half; ++bx)
            for (int c = 0; c < channels; ++c) {
                size_t r0 = ((size_t)(2 * by) * spatial + 2 * bx) * channels + c;
                size_t r1 = ((size_t)(2 * by + 1) * spatial + 2 * bx) * channels + c;
                double m = 0.25 * ((double)x[r0] + x[r0 + channels] + x[r1] + x[r1 + channels]);
                float mf = (float)m;
                out[r0] = mf;
                out[r0 + channels] = mf;
                out[r1] = mf;
                out[r1 + channels] = mf;
            }
}

// core blend; when pinned != nullptr it receives phi(ref + sigma_t * n)
static void ilvr_blend_core(float* x, const float* ref, int spatial, double sigma_t, Pcg32& rng,
                            float* pinned) {
    size_t n = (size_t)spatial * spatial * 3;
    std::vector<float> noised(n), low(n);
    for (size_t i = 0; i < n; ++i) noised[i] = (float)(ref[i] + sigma_t * rng.normal());
    lowpass_phi(x, spatial, 3, low.data());
    for (size_t i = 0; i < n; ++i) x[i] -= low[i];
    lowpass_phi(noised.data(), spatial, 3, low.data());
    for (size_t i = 0; i < n; ++i) x[i] += low[i];
    if (pinned) std::memcpy(pinned, low.data(), n * sizeof(float));
}

void ilvr_blend(float* x, const float* ref, int spatial, double sigma_t, Pcg32& rng) {
    ilvr_blend_core(x, ref, spatial, sigma_t, rng, nullptr);
}

Image ilvr_blend(const Image& state, const Image& reference, double sigma_t, Pcg32& rng) {
    if (state.height != reference.height || state.width != reference.width)
        throw ArgError("ilvr blend: state and reference shapes differ");
    if (state.height != state.width) throw ArgError("ilvr blend: state must be square");
    Image out = state;
    ilvr_blend(out.data.data(), reference.data.data(), state.width, sigma_t, rng);
    return out;
}

void heun_sample(const DenoiseFn& denoise, int batch, int spatial, const DiffusionConfig& cfg,
                 Pcg32* rngs, const IlvrGuide* guide, float* x_out,
                 const SampleObserver* observer) {
    cfg.validate();
    if (batch < 1) throw ArgError("sampler: batch must be positive");
    if (guide && guide->steps > 0 && !guide->ref)
        throw ArgError("sampler: guidance enabled without references");
    std::vector<double> sig = sigma_steps(cfg);
    size_t per = (size_t)spatial * spatial * 3;
    size_t total = (size_t)batch * per;

    std::vector<float> d(total), x2(total), den(total), lowband;
    float* x = x_out;
    for (int b = 0; b < batch; ++b) {
        float* xb = x + (size_t)b * per;
        for (size_t i = 0; i < per; ++i) xb[i] = (float)(sig[0] * rngs[b].normal());
    }

    for (int i = 0; i < cfg.num_steps; ++i) {
        double s_cur = sig[i], s_next = sig[i + 1];
        denoise(x, s_cur, batch, den.data());
        for (size_t k = 0; k < total; ++k) d[k] = (float)((x[k] - den[k]) / s_cur);
        double h = s_next - s_cur;
        for (size_t k = 0; k < total; ++k) x2[k] = (float)(x[k] + h * d[k]);
        if (s_next != 0.0) {
            denoise(x2.data(), s_next, batch, den.data());
            for (size_t k = 0; k < total; ++k) {
                double d2 = (x2[k] - den[k]) / s_next;
                x[k] = (float)(x[k] + h * 0.5 * (d[k] + d2));
            }
        } else {
            std::memcpy(x, x2.data(), total * sizeof(float));
        }

        bool guided = guide && i < guide->steps;
        if (guided) {
            if (observer && lowband.size() < total) lowband.resize(total);
            for (int b = 0; b < batch; ++b) {
                float* xb = x + (size_t)b * per;
                const float* rb = guide->ref + (size_t)b * per;
                ilvr_blend_core(xb, rb, spatial, s_next, rngs[b],
                                observer ? lowband.data() + (size_t)b * per : nullptr);
            }
        }
        for (size_t k = 0; k < total; ++k)
            if (!std::isfinite(x[k]))
                throw NumericError("sampler: non-finite state at step " + std::to_string(i));
        if (observer && observer->after_step)
            observer->after_step(i, s_next, x, guided ? lowband.data() : nullptr);
    }
}

}  // namespace lldiff
