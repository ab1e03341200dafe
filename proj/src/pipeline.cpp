#include "lldiff/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lldiff {

int gamma(int s) {
    if (s < 0 || s > 3) throw ArgError("scale index must be in {0,1,2,3}");
    return 1 << (s + 5);
}

int draw_scale(Pcg32& rng) { return (int)rng.next_below(4); }

static void check_norm_256(const Image& im, const char* which) {
    if (im.domain != Domain::normalized)
        throw ArgError(std::string(which) + ": expected normalized domain");
    if (im.height != 256 || im.width != 256)
        throw ArgError(std::string(which) + ": expected 256x256");
}

TrainingExample build_training_example(const Image& x, const Image& y, int s,
                                       const CondNoiseConfig& cn, Pcg32& rng) {
    check_norm_256(x, "training example x");
    check_norm_256(y, "training example y");
    cn.validate();
    int g = gamma(s);
    TrainingExample ex;
    ex.cond.resize((size_t)kPatch * kPatch * 9);
    ex.target.resize((size_t)kPatch * kPatch * 3);

    if (s == 0) {
        Image cx = resample(x, kPatch);
        Image ty = resample(y, kPatch);
        for (int p = 0; p < kPatch * kPatch; ++p)
            for (int c = 0; c < 3; ++c) {
                float v = cx.data[(size_t)p * 3 + c];
                ex.cond[(size_t)p * 9 + c] = v;
                ex.cond[(size_t)p * 9 + 3 + c] = v;
                ex.cond[(size_t)p * 9 + 6 + c] = v;
                ex.target[(size_t)p * 3 + c] = ty.data[(size_t)p * 3 + c];
            }
        return ex;
    }

    Image cx = resample(x, g);
    Image cy1 = resample(resample(y, g / 2), g);
    Image cy2 = resample(resample(y, kPatch), g);
    Image ty = resample(y, g);

    int oy = (int)rng.next_below((uint32_t)(g - kPatch + 1));
    int ox = (int)rng.next_below((uint32_t)(g - kPatch + 1));
    double eta_sigma = rng.uniform(0.0, cn.eta_sigma_max);

    for (int i = 0; i < kPatch; ++i)
        for (int j = 0; j < kPatch; ++j) {
            size_t dst = ((size_t)i * kPatch + j);
            for (int c = 0; c < 3; ++c) {
                ex.cond[dst * 9 + c] = cx.at(oy + i, ox + j, c);
                ex.cond[dst * 9 + 3 + c] = cy1.at(oy + i, ox + j, c);
                ex.cond[dst * 9 + 6 + c] = cy2.at(oy + i, ox + j, c);
                ex.target[dst * 3 + c] = ty.at(oy + i, ox + j, c);
            }
        }
    // conditioning predictions are imperfect at inference; mimic that with
    // shared-sigma noise on both prediction channels
    for (int p = 0; p < kPatch * kPatch; ++p)
        for (int c = 0; c < 3; ++c)
            ex.cond[(size_t)p * 9 + 3 + c] += (float)(eta_sigma * rng.normal());
    for (int p = 0; p < kPatch * kPatch; ++p)
        for (int c = 0; c < 3; ++c)
            ex.cond[(size_t)p * 9 + 6 + c] += (float)(eta_sigma * rng.normal());
    return ex;
}

std::vector<float> replicate_up(const std::vector<float>& src, int size, int channels,
                                int factor) {
    if (factor < 1) throw ArgError("replicate_up: factor must be >= 1");
    if (src.size() != (size_t)size * size * channels)
        throw ArgError("replicate_up: source size mismatch");
    int out = size * factor;
    std::vector<float> dst((size_t)out * out * channels);
    for (int y = 0; y < out; ++y)
        for (int x = 0; x < out; ++x) {
            const float* s = src.data() + ((size_t)(y / factor) * size + x / factor) * channels;
            float* d = dst.data() + ((size_t)y * out + x) * channels;
            for (int c = 0; c < channels; ++c) d[c] = s[c];
        }
    return dst;
}

ConditioningGrid build_inference_conditioning(const Image& x, const std::vector<float>& y_prev,
                                              int prev_size, const std::vector<float>& y_first,
                                              int s) {
    if (s < 1 || s > 3) throw ArgError("inference conditioning: scale must be in {1,2,3}");
    check_norm_256(x, "inference conditioning x");
    int g = gamma(s);
    if (prev_size != gamma(s - 1)) throw ArgError("inference conditioning: y_prev size mismatch");
    if (y_prev.size() != (size_t)prev_size * prev_size * 3)
        throw ArgError("inference conditioning: y_prev element count mismatch");
    if (y_first.size() != (size_t)kPatch * kPatch * 3)
        throw ArgError("inference conditioning: y_first must be 32x32x3");

    Image cx = resample(x, g);
    std::vector<float> cy1 = replicate_up(y_prev, prev_size, 3, 2);
    std::vector<float> cy2 = replicate_up(y_first, kPatch, 3, g / kPatch);

    ConditioningGrid grid;
    grid.s = s;
    grid.side = g / kPatch;
    int m = grid.count();
    grid.stacks.resize((size_t)m * kPatch * kPatch * 9);
    grid.refs.resize((size_t)m * kPatch * kPatch * 3);
    for (int p = 0; p < m; ++p) {
        int py = p / grid.side, px = p % grid.side;
        for (int i = 0; i < kPatch; ++i)
            for (int j = 0; j < kPatch; ++j) {
                int gy = py * kPatch + i, gx = px * kPatch + j;
                size_t src = ((size_t)gy * g + gx) * 3;
                size_t dst = (((size_t)p * kPatch + i) * kPatch + j);
                for (int c = 0; c < 3; ++c) {
                    grid.stacks[dst * 9 + c] = cx.data[src + c];
                    grid.stacks[dst * 9 + 3 + c] = cy1[src + c];
                    grid.stacks[dst * 9 + 6 + c] = cy2[src + c];
                    grid.refs[dst * 3 + c] = cy1[src + c];
                }
            }
    }
    return grid;
}

std::vector<Image> cascade_infer(const Image& x_srgb, UNet<float>& net,
                                 const DiffusionConfig& dcfg, const NormStatsPair& stats,
                                 uint64_t seed, const InferOptions& opts) {
    if (x_srgb.domain != Domain::srgb) throw ArgError("cascade: input must be srgb");
    if (x_srgb.height < 1 || x_srgb.width < 1) throw ArgError("cascade: empty input");
    if (opts.samples < 1) throw ArgError("cascade: samples must be >= 1");
    if (net.spatial() != kPatch) throw ArgError("cascade: denoiser patch size mismatch");
    dcfg.validate();

    // normalize geometry, then intensity
    Image sq = x_srgb;
    if (sq.height != sq.width) sq = center_crop(sq, std::min(sq.height, sq.width));
    if (sq.height != 256) sq = resample(sq, 256);
    Image lin = srgb_to_linear(sq);
    Image xn = tail_normalize(lin, stats.lowlight);

    Image cx0 = resample(xn, kPatch);
    std::vector<float> cond0((size_t)kPatch * kPatch * 9);
    for (int p = 0; p < kPatch * kPatch; ++p)
        for (int c = 0; c < 3; ++c) {
            float v = cx0.data[(size_t)p * 3 + c];
            cond0[(size_t)p * 9 + c] = v;
            cond0[(size_t)p * 9 + 3 + c] = v;
            cond0[(size_t)p * 9 + 6 + c] = v;
        }

    auto denoise_with = [&](const float* cond) {
        return DenoiseFn([&net, &dcfg, cond](const float* xx, double sg, int bb, float* oo) {
            std::vector<double> sig((size_t)bb, sg);
            net.denoise(xx, cond, sig.data(), bb, dcfg.sigma_data, false, nullptr, oo);
        });
    };

    std::vector<Image> results;
    for (int k = 0; k < opts.samples; ++k) {
        // scale 0: one unguided patch
        std::vector<float> y_first((size_t)kPatch * kPatch * 3);
        {
            Pcg32 rng0 = derive_stream(seed, (uint64_t)k, 0, 0);
            try {
                heun_sample(denoise_with(cond0.data()), 1, kPatch, dcfg, &rng0, nullptr,
                            y_first.data());
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " [scale 0, patch 0]");
            }
        }

        std::vector<float> y_prev = y_first;
        int prev_size = kPatch;
        for (int s = 1; s <= 3; ++s) {
            ConditioningGrid grid = build_inference_conditioning(xn, y_prev, prev_size, y_first, s);
            int m = grid.count();
            int g = gamma(s);
            std::vector<float> patches((size_t)m * kPatch * kPatch * 3);
            std::vector<Pcg32> rngs((size_t)m);
            for (int p = 0; p < m; ++p) rngs[p] = derive_stream(seed, (uint64_t)k, (uint64_t)s, (uint64_t)p);

            size_t per = (size_t)kPatch * kPatch;
            for (int start = 0; start < m; start += net.max_batch()) {
                int bb = std::min(net.max_batch(), m - start);
                IlvrGuide guide;
                guide.ref = grid.refs.data() + (size_t)start * per * 3;
                guide.steps = opts.ilvr ? dcfg.ilvr_steps : 0;
                try {
                    heun_sample(denoise_with(grid.stacks.data() + (size_t)start * per * 9), bb,
                                kPatch, dcfg, rngs.data() + start,
                                guide.steps > 0 ? &guide : nullptr,
                                patches.data() + (size_t)start * per * 3);
                } catch (const NumericError& e) {
                    throw NumericError(std::string(e.what()) + " [scale " + std::to_string(s) +
                                       ", patches " + std::to_string(start) + ".." +
                                       std::to_string(start + bb - 1) + "]");
                }
            }

            // stitch the disjoint tiles back into a g×g plane
            std::vector<float> ys((size_t)g * g * 3);
            for (int p = 0; p < m; ++p) {
                int py = p / grid.side, px = p % grid.side;
                for (int i = 0; i < kPatch; ++i)
                    for (int j = 0; j < kPatch; ++j) {
                        size_t src = (((size_t)p * kPatch + i) * kPatch + j) * 3;
                        size_t dst = ((size_t)(py * kPatch + i) * g + px * kPatch + j) * 3;
                        for (int c = 0; c < 3; ++c) ys[dst + c] = patches[src + c];
                    }
            }
            y_prev = std::move(ys);
            prev_size = g;
        }

        std::vector<float> out_lin((size_t)256 * 256 * 3);
        for (size_t i = 0; i < out_lin.size(); ++i)
            out_lin[i] = tail_denormalize_scalar(y_prev[i], stats.welllit);
        Image lin_img(256, 256, Domain::linear, std::move(out_lin));
        results.push_back(linear_to_srgb(lin_img));
    }
    return results;
}

}  // namespace lldiff
