// End-to-end acceptance harness. Runs ten independent checks against the
// built library plus the CLI binary (argv[1]) and prints one PASS/FAIL line
// per check, ordered by check id. Exit code 0 iff everything passed.
//
// The slow path: check 8 trains the desk-scale model (~50 min) and its
// checkpoint feeds check 5, so execution order differs from print order.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lldiff/blasdispatch.hpp"
#include "lldiff/datagen.hpp"
#include "lldiff/metrics.hpp"
#include "lldiff/pipeline.hpp"
#include "lldiff/png_io.hpp"
#include "lldiff/train.hpp"

using namespace lldiff;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

double seconds_since(clk::time_point t0) {
    return std::chrono::duration<double>(clk::now() - t0).count();
}

void note(const std::string& msg) {
    std::fprintf(stderr, "[acceptance] %s\n", msg.c_str());
    std::fflush(stderr);
}

struct Result {
    int id = 0;
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// ---- check 1: normalization fidelity -------------------------------------------

Result check_normalization() {
    auto t0 = clk::now();
    // right-tailed synthetic intensities x = t^4 with t a truncated normal;
    // the +-1.4 truncation keeps every pixel inside the unclamped band so the
    // round trip must be exact to float precision
    std::vector<Image> imgs;
    Pcg32 rng = derive_stream(101, 1);
    for (int k = 0; k < 30; ++k) {
        Image im(256, 256, Domain::linear);
        for (auto& v : im.data) {
            double z;
            do {
                z = rng.normal();
            } while (std::abs(z) > 1.4);
            double t = 0.55 + 0.12 * z;
            v = (float)(t * t * t * t);
        }
        imgs.push_back(std::move(im));
    }
    NormStats st = fit_stats(imgs, "lowlight");

    double sum = 0, sum_sq = 0, max_rt = 0;
    size_t n = 0;
    for (const Image& im : imgs) {
        Image v = tail_normalize(im, st);
        Image back = tail_denormalize(v, st);
        for (size_t i = 0; i < v.data.size(); ++i) {
            sum += v.data[i];
            sum_sq += (double)v.data[i] * v.data[i];
            max_rt = std::max(max_rt, (double)std::abs(back.data[i] - im.data[i]));
        }
        n += v.data.size();
    }
    double mean = sum / (double)n;
    double sd = std::sqrt(std::max(0.0, sum_sq / (double)n - mean * mean));
    double el = seconds_since(t0);

    bool ok = mean >= -0.1 && mean <= 0.1 && sd >= 0.35 && sd <= 0.65 && max_rt < 1e-5 &&
              el < 5.0;
    Result r{1, ok,
             fmt("pooled mean %.4f (want [-0.1,0.1]), std %.4f (want [0.35,0.65]), "
                 "round-trip max err %.2e (want <1e-5), %.1fs (want <5s)",
                 mean, sd, max_rt, el)};
    return r;
}

// ---- check 2: scale map ----------------------------------------------------------

Result check_scale_map() {
    bool ok = gamma(0) == 32 && gamma(1) == 64 && gamma(2) == 128 && gamma(3) == 256;
    return {2, ok, fmt("gamma(0..3) = {%d,%d,%d,%d} (want {32,64,128,256})", gamma(0), gamma(1),
                       gamma(2), gamma(3))};
}

// ---- check 3: patch grid round trip ---------------------------------------------

Result check_patch_grid() {
    auto t0 = clk::now();
    Pcg32 rng = derive_stream(103, 1);
    bool exact = true;
    int m_at_256 = -1;
    for (int k = 0; k < 100; ++k) {
        Image im(256, 256, Domain::normalized);
        for (auto& v : im.data) v = rng.next_float() * 2.f - 1.f;
        PatchGrid grid = patchify(im);
        m_at_256 = grid.count();
        Image back = stitch(grid);
        if (back.height != im.height || back.width != im.width ||
            std::memcmp(back.data.data(), im.data.data(), im.data.size() * 4) != 0) {
            exact = false;
            break;
        }
    }
    double el = seconds_since(t0);
    bool ok = exact && m_at_256 == 64 && el < 5.0;
    return {3, ok,
            fmt("stitch(patchify(x)) bit-exact on 100 random 256^2 images: %s, M = %d "
                "(want 64), %.1fs (want <5s)",
                exact ? "yes" : "NO", m_at_256, el)};
}

// ---- check 4: sampler contraction oracle ----------------------------------------

DenoiseFn constant_oracle(const std::vector<float>& mu, int spatial) {
    size_t per = (size_t)spatial * spatial * 3;
    return [mu, per](const float*, double, int batch, float* out) {
        for (int b = 0; b < batch; ++b)
            for (size_t i = 0; i < per; ++i) out[b * per + i] = mu[b * 3 + i % 3];
    };
}

Result check_sampler_oracle() {
    auto t0 = clk::now();
    DiffusionConfig cfg;  // 18 steps
    const int batch = 20, sp = 32;
    size_t per = (size_t)sp * sp * 3;
    std::vector<float> mu(batch * 3);
    Pcg32 mr = derive_stream(104, 1);
    for (auto& v : mu) v = (float)(mr.normal() * 0.4);

    auto run = [&](std::vector<float>& out) {
        std::vector<Pcg32> rngs;
        for (int b = 0; b < batch; ++b) rngs.push_back(derive_stream(104, 2, 0, (uint64_t)b));
        heun_sample(constant_oracle(mu, sp), batch, sp, cfg, rngs.data(), nullptr, out.data());
    };
    std::vector<float> out1(batch * per), out2(batch * per);
    run(out1);
    run(out2);

    double max_err = 0;
    for (int b = 0; b < batch; ++b)
        for (size_t i = 0; i < per; ++i)
            max_err = std::max(max_err, (double)std::abs(out1[b * per + i] - mu[b * 3 + i % 3]));
    bool deterministic = std::memcmp(out1.data(), out2.data(), out1.size() * 4) == 0;
    double el = seconds_since(t0);
    bool ok = max_err < 1e-5 && deterministic && el < 10.0;
    return {4, ok,
            fmt("max |out - mu| = %.2e over 20 oracles (want <1e-5), repeat %s, %.1fs "
                "(want <10s)",
                max_err, deterministic ? "bit-identical" : "DIVERGED", el)};
}

// ---- check 6: finite-difference gradients ---------------------------------------

Result check_gradients() {
    auto t0 = clk::now();
    DenoiserConfig cfg;
    cfg.base_channels = 4;
    const int sp = 16, batch = 2;
    UNet<double> net(cfg, sp, batch);
    net.init_params(106);
    Pcg32 hr = derive_stream(106, 2);
    for (const auto& e : net.params().manifest)
        if (e.name == "out.conv.w" || e.name == "out.conv.b")
            for (size_t i = 0; i < e.count; ++i)
                net.params().w[e.offset + i] = hr.normal() * 0.05;

    size_t n3 = (size_t)sp * sp * 3, n9 = (size_t)sp * sp * 9;
    std::vector<double> x(batch * n3), cond(batch * n9), pred(batch * n3), dpred(batch * n3);
    Pcg32 rng = derive_stream(106, 3);
    for (auto& v : x) v = rng.normal() * 0.6;
    for (auto& v : cond) v = rng.normal() * 0.4;
    std::vector<double> target(batch * n3);
    for (auto& v : target) v = rng.normal() * 0.4;
    double sigma[batch] = {0.3, 1.4};
    const double lambda_perc = 5.0, sigma_data = 0.5;

    // training objective in double: per-example weighted MSE + perceptual term
    auto loss_and_grad = [&](bool want_grad) {
        net.denoise(x.data(), cond.data(), sigma, batch, sigma_data, false, nullptr, pred.data());
        if (want_grad) std::fill(dpred.begin(), dpred.end(), 0.0);
        double total = 0;
        for (int b = 0; b < batch; ++b) {
            const double* pb = pred.data() + (size_t)b * n3;
            const double* tb = target.data() + (size_t)b * n3;
            double lam = loss_weight(sigma[b], sigma_data);
            double se = 0;
            for (size_t i = 0; i < n3; ++i) se += (pb[i] - tb[i]) * (pb[i] - tb[i]);
            double mse = se / (double)n3;
            total += (lam + 1.0) * mse / batch;
            double* db = want_grad ? dpred.data() + (size_t)b * n3 : nullptr;
            if (db) {
                double sc = (lam + 1.0) * 2.0 / (double)n3 / batch;
                for (size_t i = 0; i < n3; ++i) db[i] += sc * (pb[i] - tb[i]);
            }
            // sobel reference accumulates its own gradient; scale afterwards
            if (db) {
                std::vector<double> dp(n3, 0.0);
                total += lambda_perc / batch * sobel_perceptual_ref(pb, tb, sp, sp, dp.data());
                for (size_t i = 0; i < n3; ++i) db[i] += lambda_perc / batch * dp[i];
            } else {
                total += lambda_perc / batch * sobel_perceptual_ref(pb, tb, sp, sp, nullptr);
            }
        }
        return total;
    };

    net.params().zero_grads();
    loss_and_grad(true);
    net.backward(dpred.data(), false);
    std::vector<double> g = net.params().g;

    // floor 1e-5 in the denominator: at 4 base channels every GroupNorm group
    // is one channel, so biases feeding a GN are structurally dead and central
    // differences only measure round-off there
    Pcg32 pick = derive_stream(106, 4);
    size_t total_params = net.params().total;
    double max_rel = 0;
    for (int k = 0; k < 200; ++k) {
        size_t idx = pick.next_below((uint32_t)total_params);
        double keep = net.params().w[idx];
        double h = 1e-5 * std::max(1.0, std::abs(keep));
        net.params().w[idx] = keep + h;
        double lp = loss_and_grad(false);
        net.params().w[idx] = keep - h;
        double lm = loss_and_grad(false);
        net.params().w[idx] = keep;
        double fd = (lp - lm) / (2 * h);
        double rel = std::abs(g[idx] - fd) / std::max({std::abs(g[idx]), std::abs(fd), 1e-5});
        max_rel = std::max(max_rel, rel);
    }
    double el = seconds_since(t0);
    bool ok = max_rel < 1e-3 && el < 120.0;
    return {6, ok,
            fmt("max relative gradient error %.2e over 200 sampled params (want <1e-3), "
                "%.1fs (want <120s)",
                max_rel, el)};
}

// ---- check 7: sensor noise statistics -------------------------------------------

Result check_noise_stats() {
    auto t0 = clk::now();
    const double level = 0.25;
    const double sr = level / 4.0, ss = level * level;
    bool ok = true;
    std::string parts;
    const double xs[] = {0.1, 0.5, 0.9};
    for (int xi = 0; xi < 3; ++xi) {
        double x = xs[xi];
        Pcg32 rng = derive_stream(107, (uint64_t)xi);
        const int n = 1000000;
        double sum = 0, sum_sq = 0;
        for (int i = 0; i < n; ++i) {
            double e = poisson_gaussian_noise(x, level, rng);
            sum += e;
            sum_sq += e * e;
        }
        double mean = sum / n;
        double var = sum_sq / n - mean * mean;
        double want = sr * sr + ss * x;
        double rel = std::abs(var - want) / want;
        if (rel >= 0.05) ok = false;
        parts += fmt("x=%.1f: var %.5f vs %.5f (%.1f%%) ", x, var, want, rel * 100);
    }
    double el = seconds_since(t0);
    if (el >= 30.0) ok = false;
    return {7, ok, parts + fmt("(want <5%% each), %.1fs (want <30s)", el)};
}

// ---- check 9: text metrics -------------------------------------------------------

int lev_oracle(const std::string& a, const std::string& b) {
    size_t n = a.size(), m = b.size();
    std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
    for (size_t i = 0; i <= n; ++i) d[i][0] = (int)i;
    for (size_t j = 0; j <= m; ++j) d[0][j] = (int)j;
    for (size_t i = 1; i <= n; ++i)
        for (size_t j = 1; j <= m; ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                                d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return d[n][m];
}

Result check_text_metrics() {
    auto t0 = clk::now();
    Pcg32 rng = derive_stream(109, 1);
    auto rand_word = [&rng] {
        int len = (int)rng.next_below(13);
        std::string s;
        for (int i = 0; i < len; ++i) s.push_back((char)('a' + rng.next_below(8)));
        return s;
    };
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        std::string a = rand_word(), b = rand_word();
        if (levenshtein(a, b) != lev_oracle(a, b)) ++mismatches;
    }

    bool fixtures = levenshtein("kitten", "sitting") == 3 && levenshtein("", "abc") == 3 &&
                    levenshtein("naive", "na\xc3\xafve") == 1 &&
                    ned("kitten", "sitting") == 3.0 / 7.0;
    std::vector<std::string> preds = {"Hello,", "wOrld", "foo"};
    std::vector<std::string> gts = {"hello", "world!", "bar"};
    fixtures = fixtures && std::abs(word_accuracy(preds, gts) - 100.0 * 2 / 3) < 1e-12;
    std::vector<std::string> p2 = {"abc", "abc"}, g2 = {"abc", "abd"};
    fixtures = fixtures && std::abs(mean_one_minus_ned(p2, g2) - (1.0 + 2.0 / 3.0) / 2) < 1e-12;

    double el = seconds_since(t0);
    bool ok = mismatches == 0 && fixtures && el < 10.0;
    return {9, ok,
            fmt("%d/1000 oracle mismatches (want 0), fixtures %s, %.1fs (want <10s)", mismatches,
                fixtures ? "exact" : "BROKEN", el)};
}

// ---- check 8: desk-scale training + reconstruction gain --------------------------

struct TrainedModel {
    bool available = false;
    Checkpoint ckpt;
    PairedDataset held;
};

Result check_training(const fs::path& work, TrainedModel& model) {
    GlyphDatasetParams gp;
    gp.count = 200;
    gp.seed = 1001;
    std::string train_dir = (work / "train_data").string();
    note("check 8: generating 200 training pairs");
    write_glyph_dataset(train_dir, gp);
    GlyphDatasetParams hp;
    hp.count = 20;
    hp.seed = 2002;
    std::string held_dir = (work / "held_data").string();
    write_glyph_dataset(held_dir, hp);

    PairedDataset train_pairs = load_paired_dataset(train_dir);
    model.held = load_paired_dataset(held_dir);

    // fit normalization on a 30-pair subset, as the pipeline prescribes
    Pcg32 srng = derive_stream(108, 1);
    std::vector<size_t> subset = sample_stats_subset(train_pairs.size(), 30, srng);
    std::vector<Image> lows, highs;
    for (size_t i : subset) {
        lows.push_back(srgb_to_linear(train_pairs.low[i]));
        highs.push_back(srgb_to_linear(train_pairs.high[i]));
    }
    TrainDataset ds;
    ds.stats.lowlight = fit_stats(lows, "lowlight");
    ds.stats.welllit = fit_stats(highs, "welllit");
    for (size_t i = 0; i < train_pairs.size(); ++i) {
        ds.x.push_back(tail_normalize(srgb_to_linear(train_pairs.low[i]), ds.stats.lowlight));
        ds.y.push_back(tail_normalize(srgb_to_linear(train_pairs.high[i]), ds.stats.welllit));
    }

    DenoiserConfig dn;  // base 32, 4 blocks per resolution
    DiffusionConfig dc;
    TrainConfig tc;
    tc.batch_size = 16;
    tc.iterations = 3000;
    tc.learning_rate = 8e-4;
    tc.seed = 3003;

    std::vector<double> losses;
    losses.reserve((size_t)tc.iterations);
    TrainCallbacks cb{[&](int64_t iter, const LossParts& p) {
                          losses.push_back(p.total);
                          if ((iter + 1) % 250 == 0)
                              note(fmt("check 8: iteration %lld, loss %.4f",
                                       (long long)(iter + 1), p.total));
                      },
                      nullptr};
    note("check 8: training 3000 iterations at batch 16");
    auto t_train = clk::now();
    model.ckpt = train_loop(ds, dn, dc, tc, &cb);
    double train_s = seconds_since(t_train);
    model.available = true;
    save_checkpoint(model.ckpt, (work / "desk.ckpt").string());

    const int win = 100;
    double head = 0, tail = 0;
    for (int i = 0; i < win; ++i) head += losses[(size_t)i] / win;
    for (int i = 0; i < win; ++i) tail += losses[losses.size() - win + (size_t)i] / win;

    note("check 8: evaluating 20 held-out reconstructions");
    UNet<float> net = build_net(model.ckpt, 32);
    InferOptions opts;
    double psnr_ours = 0, psnr_base = 0, exp_ours = 0, exp_gt = 0;
    const int M = (int)model.held.size();
    for (int i = 0; i < M; ++i) {
        const Image& lo = model.held.low[i];
        const Image& hi = model.held.high[i];
        Image rec =
            cascade_infer(lo, net, model.ckpt.diffusion, model.ckpt.stats, 4000 + (uint64_t)i,
                          opts)[0];

        // naive baseline: undo the known dimming on the noisy input
        Image lin = srgb_to_linear(lo);
        for (auto& v : lin.data) v = std::min(1.0f, v / 0.4f);
        Image base = linear_to_srgb(lin);

        psnr_ours += psnr(rec, hi) / M;
        psnr_base += psnr(base, hi) / M;
        exp_ours += exposure_consistency(rec) / M;
        exp_gt += exposure_consistency(hi) / M;
        note(fmt("check 8: held-out %d/%d psnr %.2f (baseline %.2f)", i + 1, M, psnr(rec, hi),
                 psnr(base, hi)));
    }

    bool ok_time = train_s <= 3600.0;
    bool ok_loss = tail < 0.5 * head;
    bool ok_gain = psnr_ours - psnr_base >= 2.0;
    bool ok_exp = exp_ours <= 2.0 * exp_gt;
    bool ok = ok_time && ok_loss && ok_gain && ok_exp;
    return {8, ok,
            fmt("train %.0fs (want <=3600), loss %.3f -> %.3f ratio %.2f (want <0.5), "
                "psnr %.2f vs baseline %.2f gain %.2f dB (want >=2), exposure %.4f vs "
                "gt %.4f ratio %.2f (want <=2)",
                train_s, head, tail, tail / head, psnr_ours, psnr_base, psnr_ours - psnr_base,
                exp_ours, exp_gt, exp_ours / exp_gt)};
}

// ---- check 5: low-frequency pinning and exposure-drift suppression ---------------

Result check_ilvr(const TrainedModel& model) {
    if (!model.available) return {5, false, "skipped: no trained checkpoint from check 8"};
    auto t0 = clk::now();
    // The drift-suppression ratio is measured with guidance over 12 of the 18
    // steps (down to sigma ~ 0.3). The endpoint only retains the pinned low
    // band in proportion to c_skip at the last guided sigma, so a window that
    // stops at sigma ~ 8 (c_skip ~ 0.004) cannot move the post-sampling
    // statistic, and guiding the final sigma=0 step would pin it trivially;
    // 12 steps leaves 6 free steps the suppressed drift must survive.
    DiffusionConfig dc = model.ckpt.diffusion;
    dc.ilvr_steps = 12;
    UNet<float> net = build_net(model.ckpt, 64);

    // one held-out image provides a realistic conditioning patch; all 64
    // patches share it (and its reference), so any spread across patches is
    // sampling drift
    Image xn = tail_normalize(srgb_to_linear(model.held.low[0]), model.ckpt.stats.lowlight);
    std::vector<float> y_first((size_t)32 * 32 * 3, 0.f);
    {
        Image cx0 = resample(xn, 32);
        std::copy(cx0.data.begin(), cx0.data.end(), y_first.begin());
    }
    std::vector<float> y_prev = replicate_up(y_first, 32, 3, 4);  // 128^2 stand-in
    ConditioningGrid grid = build_inference_conditioning(xn, y_prev, 128, y_first, 3);

    const int m = 64;
    size_t per = (size_t)32 * 32;
    std::vector<float> stacks((size_t)m * per * 9), refs((size_t)m * per * 3);
    const int src_patch = 27;  // an interior tile
    for (int p = 0; p < m; ++p) {
        std::memcpy(stacks.data() + (size_t)p * per * 9,
                    grid.stacks.data() + (size_t)src_patch * per * 9, per * 9 * 4);
        std::memcpy(refs.data() + (size_t)p * per * 3,
                    grid.refs.data() + (size_t)src_patch * per * 3, per * 3 * 4);
    }

    DenoiseFn D = [&](const float* xx, double sg, int bb, float* oo) {
        std::vector<double> sig((size_t)bb, sg);
        net.denoise(xx, stacks.data(), sig.data(), bb, dc.sigma_data, false, nullptr, oo);
    };

    auto make_rngs = [] {
        std::vector<Pcg32> r;
        for (int p = 0; p < 64; ++p) r.push_back(derive_stream(105, 1, 0, (uint64_t)p));
        return r;
    };

    // guided run, verifying the pinning invariant after every guided step
    double max_pin = 0;
    int guided_steps_seen = 0;
    SampleObserver obs;
    std::vector<float> low(per * 3);
    obs.after_step = [&](int step, double, const float* x, const float* lowband) {
        if (!lowband) return;
        ++guided_steps_seen;
        for (int b = 0; b < m; ++b) {
            lowpass_phi(x + (size_t)b * per * 3, 32, 3, low.data());
            for (size_t i = 0; i < per * 3; ++i)
                max_pin = std::max(max_pin,
                                   (double)std::abs(low[i] - lowband[(size_t)b * per * 3 + i]));
        }
        (void)step;
    };

    IlvrGuide guide{refs.data(), dc.ilvr_steps};
    std::vector<float> out_g((size_t)m * per * 3), out_p((size_t)m * per * 3);
    {
        auto rngs = make_rngs();
        heun_sample(D, m, 32, dc, rngs.data(), &guide, out_g.data(), &obs);
    }
    {
        auto rngs = make_rngs();
        heun_sample(D, m, 32, dc, rngs.data(), nullptr, out_p.data());
    }

    auto patch_mean_std = [&](const std::vector<float>& v) {
        double s = 0, ss = 0;
        for (int p = 0; p < m; ++p) {
            double mean = 0;
            for (size_t i = 0; i < per * 3; ++i) mean += v[(size_t)p * per * 3 + i];
            mean /= (double)(per * 3);
            s += mean;
            ss += mean * mean;
        }
        s /= m;
        return std::sqrt(std::max(0.0, ss / m - s * s));
    };
    double std_g = patch_mean_std(out_g), std_p = patch_mean_std(out_p);
    double el = seconds_since(t0);

    bool ok = guided_steps_seen == dc.ilvr_steps && max_pin < 1e-4 && std_g <= 0.5 * std_p &&
              el < 120.0;
    return {5, ok,
            fmt("pinning max err %.2e over %d guided steps (want <1e-4), patch-mean std "
                "%.5f guided vs %.5f unguided on a 12/18 window, ratio %.3f (want <=0.5), "
                "%.1fs (want <120s)",
                max_pin, guided_steps_seen, std_g, std_p, std_g / std_p, el)};
}

// ---- check 10: end-to-end CLI determinism ----------------------------------------

Result check_cli_determinism(const std::string& cli, const fs::path& work) {
    auto shell = [&](const std::string& cmd) {
        note("check 10: " + cmd);
        int rc = std::system(cmd.c_str());
        return rc == 0;
    };
    auto file_bytes = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::vector<char>(std::istreambuf_iterator<char>(f), {});
    };

    std::string q = "'" + cli + "'";
    for (const char* run : {"r1", "r2"}) {
        fs::path d = work / run;
        fs::create_directories(d);
        std::string base = (d / "").string();
        std::ofstream cfg(d / "train.cfg");
        cfg << "train.iterations=50\ntrain.batch_size=16\ntrain.seed=5\n";
        cfg.close();
        bool ok =
            shell(q + " glyphs --out " + base + "data --count 32 --seed 77") &&
            shell(q + " stats --data " + base + "data --out " + base +
                  "stats.txt --n 30 --seed 1") &&
            shell(q + " train --data " + base + "data --stats " + base + "stats.txt --config " +
                  (d / "train.cfg").string() + " --out " + base + "model.ckpt") &&
            shell(q + " infer --ckpt " + base + "model.ckpt --in " + base +
                  "data/low/0000.png --out " + base + "out.png --seed 123");
        if (!ok) return {10, false, fmt("CLI pipeline failed in run %s", run)};
    }

    bool ckpt_same =
        file_bytes(work / "r1" / "model.ckpt") == file_bytes(work / "r2" / "model.ckpt");
    bool png_same = file_bytes(work / "r1" / "out.png") == file_bytes(work / "r2" / "out.png");
    bool loss_same = file_bytes(work / "r1" / "model.ckpt.loss.csv") ==
                     file_bytes(work / "r2" / "model.ckpt.loss.csv");
    bool nonempty = !file_bytes(work / "r1" / "out.png").empty();
    bool ok = ckpt_same && png_same && loss_same && nonempty;
    return {10, ok,
            fmt("repeat run checkpoints %s, outputs %s, loss logs %s",
                ckpt_same ? "byte-identical" : "DIFFER", png_same ? "byte-identical" : "DIFFER",
                loss_same ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
    ensure_fast_blas(argc, argv);
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <path-to-cli-binary>\n");
        return 2;
    }
    // std::system in check 10 must survive any child CWD, so pin the CLI path
    std::string cli = fs::absolute(argv[1]).string();
    fs::path work = fs::temp_directory_path() / "lldiff_acceptance";
    std::error_code ec;
    fs::remove_all(work, ec);
    fs::create_directories(work);

    std::vector<Result> results;
    auto run = [&](const char* name, auto&& fn) {
        note(std::string("running ") + name);
        auto t0 = clk::now();
        try {
            results.push_back(fn());
        } catch (const std::exception& e) {
            int id = std::atoi(name);
            results.push_back({id, false, std::string("exception: ") + e.what()});
        }
        const Result& r = results.back();
        note(fmt("%s finished in %.1fs: %s — %s", name, seconds_since(t0),
                 r.pass ? "PASS" : "FAIL", r.detail.c_str()));
    };

    TrainedModel model;
    run("1", [] { return check_normalization(); });
    run("2", [] { return check_scale_map(); });
    run("3", [] { return check_patch_grid(); });
    run("4", [] { return check_sampler_oracle(); });
    run("6", [] { return check_gradients(); });
    run("7", [] { return check_noise_stats(); });
    run("9", [] { return check_text_metrics(); });
    run("8", [&] { return check_training(work, model); });
    run("5", [&] { return check_ilvr(model); });
    run("10", [&] { return check_cli_determinism(cli, work); });

    std::sort(results.begin(), results.end(),
              [](const Result& a, const Result& b) { return a.id < b.id; });
    bool all = true;
    for (const Result& r : results) {
        std::printf("criterion %d: %s — %s\n", r.id, r.pass ? "PASS" : "FAIL", r.detail.c_str());
        if (!r.pass) all = false;
    }
    std::printf("%s\n", all ? "acceptance: all 10 criteria passed" : "acceptance: FAILURES present");
    return all ? 0 : 1;
}
