#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lldiff/denoiser.hpp"
#include "lldiff/diffusion.hpp"
#include "lldiff/image.hpp"
#include "lldiff/normalize.hpp"
#include "lldiff/perceptual.hpp"

namespace lldiff {

struct TrainConfig {
    double learning_rate = 8e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    int batch_size = 160;  // paper scale; desk runs override to 16
    int64_t iterations = 3000;
    double lambda_perceptual = 5.0;
    double eta_sigma_max = 0.1;
    uint64_t seed = 0;
    int64_t checkpoint_interval = 0;  // 0 = emit only the final checkpoint

    void validate() const {
        if (!(learning_rate > 0)) throw ArgError("train config: learning_rate must be positive");
        if (!(adam_beta1 > 0 && adam_beta1 < 1) || !(adam_beta2 > 0 && adam_beta2 < 1))
            throw ArgError("train config: betas must lie in (0,1)");
        if (batch_size < 1) throw ArgError("train config: batch_size >= 1");
        if (iterations < 1) throw ArgError("train config: iterations >= 1");
        if (lambda_perceptual < 0 || eta_sigma_max < 0 || checkpoint_interval < 0)
            throw ArgError("train config: negative weight/interval");
    }
};

// normalized 256x256 pairs plus the stats that produced them (the loop
// denormalizes to linear for photometric augmentation, then re-normalizes)
struct TrainDataset {
    std::vector<Image> x;  // low-light, normalized domain
    std::vector<Image> y;  // well-lit, normalized domain
    NormStatsPair stats;
};

struct LossParts {
    double total = 0, edm = 0, mse = 0, perceptual = 0;  // components pre-weighted
};

// L = lambda(sigma)*MSE + MSE + lambda_perc*perceptual, averaged over h*w*3.
// d_pred (optional) is ACCUMULATED with weight * dL/dpred.
LossParts total_loss(const float* pred, const float* target, int h, int w, double sigma,
                     double sigma_data, double lambda_perc, const PerceptualMetric* perc,
                     float* d_pred = nullptr, float weight = 1.0f);

struct AdamState {
    std::vector<float> m, v;
    int64_t t = 0;
};

// bias-corrected Adam; eps = 1e-8
void adam_step(std::vector<float>& w, const std::vector<float>& g, AdamState& st, double lr,
               double beta1, double beta2);

struct Checkpoint {
    uint32_t version = 1;
    DenoiserConfig denoiser;
    DiffusionConfig diffusion;
    TrainConfig train;
    NormStatsPair stats;
    std::vector<float> params;  // manifest order
    int64_t iteration = 0;
    uint64_t rng_digest = 0;
    uint64_t manifest_hash = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a over "name:shape;" of every parameter entry
uint64_t manifest_digest(const ParamStore<float>& ps);

// construct the denoiser a checkpoint describes, verify the shape manifest,
// and install the stored parameters
UNet<float> build_net(const Checkpoint& ckpt, int max_batch);

struct TrainCallbacks {
    std::function<void(int64_t iter, const LossParts&)> on_loss;
    std::function<void(const Checkpoint&, int64_t iter)> on_checkpoint;  // interval emissions
};

Checkpoint train_loop(const TrainDataset& dataset, const DenoiserConfig& dcfg,
                      const DiffusionConfig& diffcfg, const TrainConfig& tcfg,
                      const TrainCallbacks* cb = nullptr);

}  // namespace lldiff
