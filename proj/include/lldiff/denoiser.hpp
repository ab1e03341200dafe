#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lldiff/common.hpp"
#include "lldiff/rng.hpp"
#include "lldiff/tensor.hpp"

namespace lldiff {

// --- configuration -----------------------------------------------------------

struct DenoiserConfig {
    int base_channels = 32;                        // full-scale setting is 128
    int res_blocks_per_resolution = 4;
    std::vector<int> channel_multipliers = {2, 2, 2};  // 3 down / 3 up levels
    double dropout = 0.10;
    int in_channels = 12;  // 3 noisy target + 9 conditioning
    int out_channels = 3;
    int sigma_embedding_dim = 0;  // 0 -> base_channels

    int embed_dim() const { return sigma_embedding_dim > 0 ? sigma_embedding_dim : base_channels; }
    int levels() const { return (int)channel_multipliers.size() + 1; }
    int level_channels(int l) const {
        return l == 0 ? base_channels : base_channels * channel_multipliers[l - 1];
    }
    void validate() const {
        if (base_channels < 1 || res_blocks_per_resolution < 1)
            throw ArgError("denoiser config: channels/blocks must be positive");
        if (channel_multipliers.size() != 3)
            throw ArgError("denoiser config: expected 3 channel multipliers (3 down-blocks)");
        if (in_channels != 12 || out_channels != 3)
            throw ArgError("denoiser config: fixed 12-in/3-out channel contract");
        if (dropout < 0.0 || dropout >= 1.0) throw ArgError("denoiser config: dropout in [0,1)");
    }
};

// EDM preconditioning coefficients
inline double edm_c_skip(double sigma, double sigma_data) {
    return sigma_data * sigma_data / (sigma * sigma + sigma_data * sigma_data);
}
inline double edm_c_out(double sigma, double sigma_data) {
    return sigma * sigma_data / std::sqrt(sigma * sigma + sigma_data * sigma_data);
}
inline double edm_c_in(double sigma, double sigma_data) {
    return 1.0 / std::sqrt(sigma * sigma + sigma_data * sigma_data);
}
inline double edm_c_noise(double sigma) { return std::log(sigma) / 4.0; }

// --- parameter storage --------------------------------------------------------

// Flat parameter/gradient arrays plus a named shape manifest. Manifest order
// is construction order and is the serialization order of checkpoints.
template <typename T>
struct ParamStore {
    struct Entry {
        std::string name;
        size_t offset = 0;
        size_t count = 0;
        std::vector<int> shape;
    };
    std::vector<Entry> manifest;
    std::vector<T> w, g;
    size_t total = 0;

    size_t add(const std::string& name, std::vector<int> shape) {
        size_t cnt = 1;
        for (int d : shape) cnt *= (size_t)d;
        manifest.push_back({name, total, cnt, std::move(shape)});
        size_t off = total;
        total += cnt;
        return off;
    }
    void finalize() { w.assign(total, T(0)); }
    void ensure_grads() {
        if (g.size() != total) g.assign(total, T(0));
    }
    void zero_grads() {
        ensure_grads();
        std::fill(g.begin(), g.end(), T(0));
    }
};

// --- elementwise helpers -------------------------------------------------------

template <typename T>
inline T silu_of(T x) {
    T s = T(1) / (T(1) + std::exp(-x));
    return x * s;
}
template <typename T>
inline T silu_grad(T x) {
    T s = T(1) / (T(1) + std::exp(-x));
    return s * (T(1) + x * (T(1) - s));
}

// --- shared scratch -------------------------------------------------------------

template <typename T>
struct Scratch {
    std::vector<T> col;    // im2col of a conv input
    std::vector<T> dcol;   // gradient wrt col
    std::vector<T> act;    // recomputed elementwise activations
    std::vector<T> dact;   // gradient staging for activations
    std::vector<T> dtmp;   // per-block temb staging [batch, maxC]
    void ensure(size_t col_n, size_t act_n, size_t dtmp_n) {
        if (col.size() < col_n) col.resize(col_n);
        if (dcol.size() < col_n) dcol.resize(col_n);
        if (act.size() < act_n) act.resize(act_n);
        if (dact.size() < act_n) dact.resize(act_n);
        if (dtmp.size() < dtmp_n) dtmp.resize(dtmp_n);
    }
};

// --- layer primitives ----------------------------------------------------------
// Weight layout is always [K, Cout] with K the fan-in (9·cin for 3×3 convs,
// cin for 1×1 and linear), so the GEMM runs activations-major with no
// runtime transposes and fan-in is shape[0] for every weight entry.

template <typename T>
struct ConvK3 {
    int cin = 0, cout = 0, stride = 1, h = 0, w = 0;  // input spatial
    int oh = 0, ow = 0;
    size_t w_off = 0, b_off = 0;

    void build(ParamStore<T>& ps, const std::string& name, int cin_, int cout_, int stride_, int h_, int w_) {
        cin = cin_; cout = cout_; stride = stride_; h = h_; w = w_;
        oh = (h + 2 - 3) / stride + 1;
        ow = (w + 2 - 3) / stride + 1;
        w_off = ps.add(name + ".w", {9 * cin, cout});
        b_off = ps.add(name + ".b", {cout});
    }
    size_t col_elems(int batch) const { return (size_t)batch * oh * ow * 9 * cin; }

    void fwd(ParamStore<T>& ps, Scratch<T>& sc, const T* x, int batch, T* y) const {
        im2col_3x3(x, batch, h, w, cin, stride, sc.col.data());
        int rows = batch * oh * ow;
        gemm(false, false, rows, cout, 9 * cin, T(1), sc.col.data(), 9 * cin,
             &ps.w[w_off], cout, T(0), y, cout);
        const T* b = &ps.w[b_off];
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cout; ++c) y[(size_t)r * cout + c] += b[c];
    }
    // dW/dB always; dX accumulated into dx when non-null
    void bwd(ParamStore<T>& ps, Scratch<T>& sc, const T* x, const T* dy, int batch, T* dx) const {
        int rows = batch * oh * ow;
        im2col_3x3(x, batch, h, w, cin, stride, sc.col.data());
        gemm(true, false, 9 * cin, cout, rows, T(1), sc.col.data(), 9 * cin,
             dy, cout, T(1), &ps.g[w_off], cout);
        T* db = &ps.g[b_off];
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cout; ++c) db[c] += dy[(size_t)r * cout + c];
        if (dx) {
            gemm(false, true, rows, 9 * cin, cout, T(1), dy, cout,
                 &ps.w[w_off], cout, T(0), sc.dcol.data(), 9 * cin);
            col2im_3x3(sc.dcol.data(), batch, h, w, cin, stride, dx);
        }
    }
};

template <typename T>
struct Conv1x1 {
    int cin = 0, cout = 0;
    size_t w_off = 0, b_off = 0;
    void build(ParamStore<T>& ps, const std::string& name, int cin_, int cout_) {
        cin = cin_; cout = cout_;
        w_off = ps.add(name + ".w", {cin, cout});
        b_off = ps.add(name + ".b", {cout});
    }
    void fwd(ParamStore<T>& ps, const T* x, int rows, T* y) const {
        gemm(false, false, rows, cout, cin, T(1), x, cin, &ps.w[w_off], cout, T(0), y, cout);
        const T* b = &ps.w[b_off];
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cout; ++c) y[(size_t)r * cout + c] += b[c];
    }
    void bwd(ParamStore<T>& ps, const T* x, const T* dy, int rows, T* dx_accum) const {
        gemm(true, false, cin, cout, rows, T(1), x, cin, dy, cout, T(1), &ps.g[w_off], cout);
        T* db = &ps.g[b_off];
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cout; ++c) db[c] += dy[(size_t)r * cout + c];
        if (dx_accum)
            gemm(false, true, rows, cin, cout, T(1), dy, cout, &ps.w[w_off], cout, T(1), dx_accum, cin);
    }
};

// GroupNorm over (h·w·group-channels) per example; groups = min(8, C).
template <typename T>
struct GroupNorm {
    int ch = 0, groups = 0, hw = 0;
    size_t g_off = 0, b_off = 0;
    Tensor<T> xhat;           // normalized pre-affine activations
    std::vector<T> rstd;      // [batch·groups]
    static constexpr double kEps = 1e-5;

    void build(ParamStore<T>& ps, const std::string& name, int ch_, int hw_, int max_batch) {
        ch = ch_; hw = hw_; groups = std::min(8, ch_);
        if (ch % groups != 0) throw ArgError("group norm: channels not divisible by groups");
        g_off = ps.add(name + ".g", {ch});
        b_off = ps.add(name + ".b", {ch});
        xhat.resize(max_batch, 1, hw, ch);
        rstd.assign((size_t)max_batch * groups, T(0));
    }
    void fwd(ParamStore<T>& ps, const T* x, int batch, T* y) {
        int cg = ch / groups;
        const T* gamma = &ps.w[g_off];
        const T* beta = &ps.w[b_off];
        for (int b = 0; b < batch; ++b) {
            const T* xb = x + (size_t)b * hw * ch;
            T* hb = xhat.data() + (size_t)b * hw * ch;
            T* yb = y + (size_t)b * hw * ch;
            for (int g = 0; g < groups; ++g) {
                double sum = 0.0, sum_sq = 0.0;
                for (int p = 0; p < hw; ++p) {
                    const T* px = xb + (size_t)p * ch + g * cg;
                    for (int c = 0; c < cg; ++c) {
                        double v = (double)px[c];
                        sum += v;
                        sum_sq += v * v;
                    }
                }
                double m = (double)hw * cg;
                double mean = sum / m;
                double var = sum_sq / m - mean * mean;
                if (var < 0) var = 0;
                T rs = (T)(1.0 / std::sqrt(var + kEps));
                rstd[(size_t)b * groups + g] = rs;
                for (int p = 0; p < hw; ++p) {
                    size_t base = (size_t)p * ch + g * cg;
                    for (int c = 0; c < cg; ++c) {
                        T xh = (T)((xb[base + c] - mean) * rs);
                        hb[base + c] = xh;
                        yb[base + c] = gamma[g * cg + c] * xh + beta[g * cg + c];
                    }
                }
            }
        }
    }
    void bwd(ParamStore<T>& ps, const T* dy, int batch, T* dx_accum) {
        int cg = ch / groups;
        const T* gamma = &ps.w[g_off];
        T* dgamma = &ps.g[g_off];
        T* dbeta = &ps.g[b_off];
        for (int b = 0; b < batch; ++b) {
            const T* hb = xhat.data() + (size_t)b * hw * ch;
            const T* dyb = dy + (size_t)b * hw * ch;
            T* dxb = dx_accum + (size_t)b * hw * ch;
            for (int g = 0; g < groups; ++g) {
                double s1 = 0.0, s2 = 0.0;
                for (int p = 0; p < hw; ++p) {
                    size_t base = (size_t)p * ch + g * cg;
                    for (int c = 0; c < cg; ++c) {
                        double dxh = (double)dyb[base + c] * gamma[g * cg + c];
                        s1 += dxh;
                        s2 += dxh * hb[base + c];
                    }
                }
                double m = (double)hw * cg;
                double rs = rstd[(size_t)b * groups + g];
                for (int p = 0; p < hw; ++p) {
                    size_t base = (size_t)p * ch + g * cg;
                    for (int c = 0; c < cg; ++c) {
                        double dxh = (double)dyb[base + c] * gamma[g * cg + c];
                        dxb[base + c] += (T)(rs * (dxh - s1 / m - (double)hb[base + c] * s2 / m));
                        dgamma[g * cg + c] += dyb[base + c] * hb[base + c];
                        dbeta[g * cg + c] += dyb[base + c];
                    }
                }
            }
        }
    }
    // recompute the post-affine, post-SiLU activation from stored xhat
    void recompute_silu(ParamStore<T>& ps, int batch, T* out) const {
        const T* gamma = &ps.w[g_off];
        const T* beta = &ps.w[b_off];
        size_t rows = (size_t)batch * hw;
        const T* hb = xhat.data();
        for (size_t r = 0; r < rows; ++r)
            for (int c = 0; c < ch; ++c) {
                T pre = gamma[c] * hb[r * ch + c] + beta[c];
                out[r * ch + c] = silu_of(pre);
            }
    }
    // turn dL/d(silu-out) into dL/d(gn-out) in place
    void silu_backward_inplace(ParamStore<T>& ps, int batch, T* d) const {
        const T* gamma = &ps.w[g_off];
        const T* beta = &ps.w[b_off];
        size_t rows = (size_t)batch * hw;
        const T* hb = xhat.data();
        for (size_t r = 0; r < rows; ++r)
            for (int c = 0; c < ch; ++c) {
                T pre = gamma[c] * hb[r * ch + c] + beta[c];
                d[r * ch + c] *= silu_grad(pre);
            }
    }
};

template <typename T>
struct LinearOp {
    int din = 0, dout = 0;
    size_t w_off = 0, b_off = 0;
    void build(ParamStore<T>& ps, const std::string& name, int din_, int dout_) {
        din = din_; dout = dout_;
        w_off = ps.add(name + ".w", {din, dout});
        b_off = ps.add(name + ".b", {dout});
    }
    void fwd(ParamStore<T>& ps, const T* x, int rows, T* y) const {
        gemm(false, false, rows, dout, din, T(1), x, din, &ps.w[w_off], dout, T(0), y, dout);
        const T* b = &ps.w[b_off];
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < dout; ++c) y[(size_t)r * dout + c] += b[c];
    }
    void bwd(ParamStore<T>& ps, const T* x, const T* dy, int rows, T* dx_accum) const {
        gemm(true, false, din, dout, rows, T(1), x, din, dy, dout, T(1), &ps.g[w_off], dout);
        T* db = &ps.g[b_off];
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < dout; ++c) db[c] += dy[(size_t)r * dout + c];
        if (dx_accum)
            gemm(false, true, rows, din, dout, T(1), dy, dout, &ps.w[w_off], dout, T(1), dx_accum, din);
    }
};

// --- residual block -------------------------------------------------------------
// GN → SiLU → conv3×3 → (+ σ-embedding projection) → GN → SiLU → dropout →
// conv3×3, plus identity or 1×1 skip when the channel count changes.

template <typename T>
struct ResBlock {
    int cin = 0, cout = 0, h = 0, w = 0;
    double dropout = 0.0;
    GroupNorm<T> gn1, gn2;
    ConvK3<T> conv1, conv2;
    LinearOp<T> temb_proj;
    Conv1x1<T> skip;
    bool has_skip_conv = false;

    Tensor<T> x_in;   // stored input (skip path + conv-input recompute anchor)
    Tensor<T> h2;     // conv1 out + temb broadcast (gn2 source)
    Tensor<T> y;      // block output
    Tensor<T> dx;     // gradient wrt input (lazy)
    std::vector<uint8_t> mask;  // dropout keep mask

    void build(ParamStore<T>& ps, const std::string& name, int cin_, int cout_, int h_, int w_,
               int temb_dim, double dropout_, int max_batch) {
        cin = cin_; cout = cout_; h = h_; w = w_; dropout = dropout_;
        gn1.build(ps, name + ".gn1", cin, h * w, max_batch);
        conv1.build(ps, name + ".conv1", cin, cout, 1, h, w);
        temb_proj.build(ps, name + ".temb", temb_dim, cout);
        gn2.build(ps, name + ".gn2", cout, h * w, max_batch);
        conv2.build(ps, name + ".conv2", cout, cout, 1, h, w);
        has_skip_conv = (cin != cout);
        if (has_skip_conv) skip.build(ps, name + ".skip", cin, cout);
        x_in.resize(max_batch, h, w, cin);
        h2.resize(max_batch, h, w, cout);
        y.resize(max_batch, h, w, cout);
        mask.assign((size_t)max_batch * h * w * cout, 1);
    }
    size_t max_col_elems(int max_batch) const {
        return std::max(conv1.col_elems(max_batch), conv2.col_elems(max_batch));
    }

    // s_temb: [batch, temb_dim], the shared SiLU'd σ-embedding
    void fwd(ParamStore<T>& ps, Scratch<T>& sc, const T* x, const T* s_temb, int batch,
             bool training, Pcg32* rng) {
        size_t in_elems = (size_t)batch * h * w * cin;
        size_t out_elems = (size_t)batch * h * w * cout;
        size_t rows = (size_t)batch * h * w;
        std::copy(x, x + in_elems, x_in.data());

        // gn1 -> silu -> conv1
        gn1.fwd(ps, x, batch, sc.act.data());
        for (size_t i = 0; i < in_elems; ++i) sc.act[i] = silu_of(sc.act[i]);
        conv1.fwd(ps, sc, sc.act.data(), batch, h2.data());

        // + temb projection, broadcast over positions
        temb_proj.fwd(ps, s_temb, batch, sc.dtmp.data());
        for (int b = 0; b < batch; ++b) {
            const T* t = sc.dtmp.data() + (size_t)b * cout;
            T* hb = h2.data() + (size_t)b * h * w * cout;
            for (int p = 0; p < h * w; ++p)
                for (int c = 0; c < cout; ++c) hb[(size_t)p * cout + c] += t[c];
        }

        // gn2 -> silu -> dropout -> conv2
        gn2.fwd(ps, h2.data(), batch, sc.act.data());
        for (size_t i = 0; i < out_elems; ++i) sc.act[i] = silu_of(sc.act[i]);
        if (training && dropout > 0.0) {
            if (!rng) throw ArgError("res block: training mode needs a dropout rng");
            T scale = (T)(1.0 / (1.0 - dropout));
            for (size_t i = 0; i < out_elems; ++i) {
                bool keep = rng->next_double() >= dropout;
                mask[i] = keep ? 1 : 0;
                sc.act[i] = keep ? sc.act[i] * scale : T(0);
            }
        } else {
            std::fill(mask.begin(), mask.begin() + out_elems, 1);
        }
        conv2.fwd(ps, sc, sc.act.data(), batch, y.data());

        // skip path
        if (has_skip_conv) {
            skip.fwd(ps, x, (int)rows, sc.act.data());
            for (size_t i = 0; i < out_elems; ++i) y.data()[i] += sc.act[i];
        } else {
            for (size_t i = 0; i < out_elems; ++i) y.data()[i] += x[i];
        }
        (void)rows;
    }

    // dy: gradient wrt y; result lands in this->dx. d_s_temb accumulates.
    void bwd(ParamStore<T>& ps, Scratch<T>& sc, const T* dy, const T* s_temb, int batch,
             bool training, T* d_s_temb) {
        size_t in_elems = (size_t)batch * h * w * cin;
        size_t out_elems = (size_t)batch * h * w * cout;
        size_t rows = (size_t)batch * h * w;
        if (dx.count() < in_elems) dx.resize(x_in.n, h, w, cin);
        std::fill(dx.data(), dx.data() + in_elems, T(0));

        // conv2 backward (recompute its input: dropout(silu(gn2)))
        gn2.recompute_silu(ps, batch, sc.act.data());
        bool use_drop = training && dropout > 0.0;
        T scale = (T)(use_drop ? 1.0 / (1.0 - dropout) : 1.0);
        if (use_drop)
            for (size_t i = 0; i < out_elems; ++i) sc.act[i] = mask[i] ? sc.act[i] * scale : T(0);
        T* d_a2 = sc.dact.data();
        std::fill(d_a2, d_a2 + out_elems, T(0));
        conv2.bwd(ps, sc, sc.act.data(), dy, batch, d_a2);

        // dropout + silu backward, then gn2 backward into h2's storage
        if (use_drop)
            for (size_t i = 0; i < out_elems; ++i) d_a2[i] = mask[i] ? d_a2[i] * scale : T(0);
        gn2.silu_backward_inplace(ps, batch, d_a2);
        T* d_h2 = h2.data();  // h2 contents no longer needed
        std::fill(d_h2, d_h2 + out_elems, T(0));
        gn2.bwd(ps, d_a2, batch, d_h2);

        // temb projection backward: dt[b,c] = sum over positions
        for (int b = 0; b < batch; ++b) {
            T* t = sc.dtmp.data() + (size_t)b * cout;
            std::fill(t, t + cout, T(0));
            const T* db = d_h2 + (size_t)b * h * w * cout;
            for (int p = 0; p < h * w; ++p)
                for (int c = 0; c < cout; ++c) t[c] += db[(size_t)p * cout + c];
        }
        temb_proj.bwd(ps, s_temb, sc.dtmp.data(), batch, d_s_temb);

        // conv1 backward (recompute silu(gn1) input)
        gn1.recompute_silu(ps, batch, sc.act.data());
        T* d_a1 = sc.dact.data();  // reuse; conv2's d_a2 fully consumed above
        std::fill(d_a1, d_a1 + in_elems, T(0));
        conv1.bwd(ps, sc, sc.act.data(), d_h2, batch, d_a1);
        gn1.silu_backward_inplace(ps, batch, d_a1);
        gn1.bwd(ps, d_a1, batch, dx.data());

        // skip path backward
        if (has_skip_conv) {
            skip.bwd(ps, x_in.data(), dy, (int)rows, dx.data());
        } else {
            for (size_t i = 0; i < in_elems; ++i) dx.data()[i] += dy[i];
        }
    }
};

// --- the conditional U-Net ------------------------------------------------------
// 3 downs / 3 ups, res_blocks_per_resolution blocks per level on both sides,
// one skip concatenation per level, EDM pre/post conditioning around the whole
// network. Templated so the finite-difference oracle can run in double.

template <typename T>
class UNet {
  public:
    UNet(const DenoiserConfig& cfg, int spatial, int max_batch)
        : cfg_(cfg), spatial_(spatial), max_batch_(max_batch) {
        cfg_.validate();
        if (spatial % 8 != 0) throw ArgError("unet: spatial size must be divisible by 8");
        build();
    }

    ParamStore<T>& params() { return ps_; }
    const ParamStore<T>& params() const { return ps_; }
    const DenoiserConfig& config() const { return cfg_; }
    int spatial() const { return spatial_; }
    int max_batch() const { return max_batch_; }

    // deterministic fan-in-scaled init; final projection zeroed
    void init_params(uint64_t seed) {
        Pcg32 rng = derive_stream(seed, 0x11D7);
        for (const auto& e : ps_.manifest) {
            T* dst = &ps_.w[e.offset];
            bool is_gn_gamma = e.name.find(".gn") != std::string::npos && ends_with(e.name, ".g");
            bool is_out_gamma = e.name == "out.gn.g";
            if (e.name == "out.conv.w" || e.name == "out.conv.b") {
                std::fill(dst, dst + e.count, T(0));
            } else if (is_gn_gamma || is_out_gamma) {
                std::fill(dst, dst + e.count, T(1));
            } else if (ends_with(e.name, ".b")) {
                std::fill(dst, dst + e.count, T(0));
            } else {
                double a = 1.0 / std::sqrt((double)e.shape[0]);
                for (size_t i = 0; i < e.count; ++i) dst[i] = (T)rng.uniform(-a, a);
            }
        }
    }

    // D(x;σ) = c_skip·x + c_out·F(c_in·x, cond, c_noise). x/cond/out are
    // [batch, spatial, spatial, 3|9|3] channels-last; sigma is per example.
    void denoise(const T* x, const T* cond, const double* sigma, int batch, double sigma_data,
                 bool training, Pcg32* dropout_rng, T* out) {
        if (batch < 1 || batch > max_batch_) throw ArgError("unet: batch out of range");
        cur_batch_ = batch;
        size_t hw = (size_t)spatial_ * spatial_;
        c_out_.resize(batch);
        c_skip_.resize(batch);
        for (int b = 0; b < batch; ++b) {
            if (!(sigma[b] > 0)) throw ArgError("unet: sigma must be positive");
            c_out_[b] = edm_c_out(sigma[b], sigma_data);
            c_skip_[b] = edm_c_skip(sigma[b], sigma_data);
        }
        // assemble the 12-channel input: scaled noisy target then conditioning
        for (int b = 0; b < batch; ++b) {
            double ci = edm_c_in(sigma[b], sigma_data);
            const T* xb = x + (size_t)b * hw * 3;
            const T* cb = cond + (size_t)b * hw * 9;
            T* ib = in12_.data() + (size_t)b * hw * 12;
            for (size_t p = 0; p < hw; ++p) {
                for (int c = 0; c < 3; ++c) ib[p * 12 + c] = (T)(ci * xb[p * 3 + c]);
                for (int c = 0; c < 9; ++c) ib[p * 12 + 3 + c] = cb[p * 9 + c];
            }
        }
        forward_net(sigma, batch, training, dropout_rng);
        // EDM output mix
        const T* F = conv_out_y_.data();
        for (int b = 0; b < batch; ++b) {
            const T* xb = x + (size_t)b * hw * 3;
            const T* fb = F + (size_t)b * hw * 3;
            T* ob = out + (size_t)b * hw * 3;
            T cs = (T)c_skip_[b], co = (T)c_out_[b];
            for (size_t i = 0; i < hw * 3; ++i) ob[i] = cs * xb[i] + co * fb[i];
        }
        for (int b = 0; b < batch; ++b) {
            const T* ob = out + (size_t)b * hw * 3;
            for (size_t i = 0; i < hw * 3; ++i)
                if (!std::isfinite((double)ob[i]))
                    throw NumericError("unet: non-finite output at example " + std::to_string(b));
        }
    }

    // Reverse pass from dL/dD; accumulates parameter gradients. Call right
    // after denoise() with the same batch.
    void backward(const T* d_out, bool training) {
        int batch = cur_batch_;
        size_t hw = (size_t)spatial_ * spatial_;
        ps_.ensure_grads();
        // dF = c_out · dD
        size_t n3 = hw * 3;
        if (dF_.count() < (size_t)batch * n3) dF_.resize(max_batch_, spatial_, spatial_, 3);
        for (int b = 0; b < batch; ++b) {
            const T* db = d_out + (size_t)b * n3;
            T* fb = dF_.data() + (size_t)b * n3;
            T co = (T)c_out_[b];
            for (size_t i = 0; i < n3; ++i) fb[i] = co * db[i];
        }
        backward_net(dF_.data(), batch, training);
        for (const auto& e : ps_.manifest)
            for (size_t i = 0; i < e.count; ++i)
                if (!std::isfinite((double)ps_.g[e.offset + i]))
                    throw NumericError("unet: non-finite gradient in " + e.name);
    }

  private:
    static bool ends_with(const std::string& s, const std::string& suf) {
        return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
    }

    void build() {
        const int L = 4;
        int E = cfg_.embed_dim();
        int temb_dim = 4 * E;
        temb_lin1_.build(ps_, "temb.lin1", E, temb_dim);
        temb_lin2_.build(ps_, "temb.lin2", temb_dim, temb_dim);

        std::array<int, 4> ch{}, sp{};
        for (int l = 0; l < L; ++l) {
            ch[l] = cfg_.level_channels(l);
            sp[l] = spatial_ >> l;
        }
        conv_in_.build(ps_, "conv_in", cfg_.in_channels, ch[0], 1, sp[0], sp[0]);

        int nb = cfg_.res_blocks_per_resolution;
        for (int l = 0; l < L; ++l) {
            enc_[l].resize(nb);
            int cin = l == 0 ? ch[0] : ch[l - 1];
            for (int i = 0; i < nb; ++i) {
                enc_[l][i].build(ps_, "enc" + std::to_string(l) + ".b" + std::to_string(i),
                                 i == 0 ? cin : ch[l], ch[l], sp[l], sp[l], temb_dim,
                                 cfg_.dropout, max_batch_);
            }
            if (l < 3) down_[l].build(ps_, "down" + std::to_string(l), ch[l], ch[l], 2, sp[l], sp[l]);
        }
        for (int l = 3; l >= 0; --l) {
            dec_[l].resize(nb);
            // deepest level feeds straight through; others concat the encoder skip
            int cin = l == 3 ? ch[3] : ch[l] + ch[l];
            for (int i = 0; i < nb; ++i) {
                dec_[l][i].build(ps_, "dec" + std::to_string(l) + ".b" + std::to_string(i),
                                 i == 0 ? cin : ch[l], ch[l], sp[l], sp[l], temb_dim,
                                 cfg_.dropout, max_batch_);
            }
            if (l > 0) {
                // nearest-2× then 3×3 conv to the next level's channels
                up_[l - 1].build(ps_, "up" + std::to_string(l), ch[l], ch[l - 1], 1, sp[l - 1], sp[l - 1]);
            }
        }
        gn_out_.build(ps_, "out.gn", ch[0], sp[0] * sp[0], max_batch_);
        conv_out_.build(ps_, "out.conv", ch[0], cfg_.out_channels, 1, sp[0], sp[0]);
        ps_.finalize();

        // activation buffers
        in12_.resize(max_batch_, sp[0], sp[0], cfg_.in_channels);
        conv_in_y_.resize(max_batch_, sp[0], sp[0], ch[0]);
        for (int l = 0; l < 3; ++l) down_y_[l].resize(max_batch_, sp[l + 1], sp[l + 1], ch[l]);
        for (int l = 1; l < 4; ++l) {
            up_nn_[l - 1].resize(max_batch_, sp[l - 1], sp[l - 1], ch[l]);
            up_y_[l - 1].resize(max_batch_, sp[l - 1], sp[l - 1], ch[l - 1]);
            cat_[l - 1].resize(max_batch_, sp[l - 1], sp[l - 1], 2 * ch[l - 1]);
        }
        conv_out_y_.resize(max_batch_, sp[0], sp[0], cfg_.out_channels);
        gn_out_act_.resize(max_batch_, sp[0], sp[0], ch[0]);

        emb_.assign((size_t)max_batch_ * E, T(0));
        t1_.assign((size_t)max_batch_ * temb_dim, T(0));
        a_t1_.assign((size_t)max_batch_ * temb_dim, T(0));
        temb_vec_.assign((size_t)max_batch_ * temb_dim, T(0));
        s_temb_.assign((size_t)max_batch_ * temb_dim, T(0));
        d_s_temb_.assign((size_t)max_batch_ * temb_dim, T(0));

        // shared scratch: max im2col and activation footprints over all convs
        size_t col_max = conv_in_.col_elems(max_batch_);
        size_t act_max = in12_.count();
        for (int l = 0; l < 4; ++l) {
            for (auto& b : enc_[l]) {
                col_max = std::max(col_max, b.max_col_elems(max_batch_));
                act_max = std::max(act_max, (size_t)max_batch_ * b.h * b.w * std::max(b.cin, b.cout));
            }
            for (auto& b : dec_[l]) {
                col_max = std::max(col_max, b.max_col_elems(max_batch_));
                act_max = std::max(act_max, (size_t)max_batch_ * b.h * b.w * std::max(b.cin, b.cout));
            }
        }
        for (int l = 0; l < 3; ++l) {
            col_max = std::max(col_max, down_[l].col_elems(max_batch_));
            col_max = std::max(col_max, up_[l].col_elems(max_batch_));
            act_max = std::max(act_max, up_nn_[l].count());
        }
        col_max = std::max(col_max, conv_out_.col_elems(max_batch_));
        act_max = std::max(act_max, gn_out_act_.count());
        int max_ch = std::max(2 * ch[0], ch[3]);
        for (int l = 0; l < 4; ++l) max_ch = std::max(max_ch, 2 * ch[l]);
        sc_.ensure(col_max, act_max, (size_t)max_batch_ * max_ch);
    }

    void compute_temb(const double* sigma, int batch) {
        int E = cfg_.embed_dim();
        int half = E / 2;
        int temb_dim = 4 * E;
        for (int b = 0; b < batch; ++b) {
            double cn = edm_c_noise(sigma[b]);
            T* eb = emb_.data() + (size_t)b * E;
            for (int i = 0; i < half; ++i) {
                double freq = half > 1 ? std::exp(-std::log(10000.0) * i / (half - 1)) : 1.0;
                eb[i] = (T)std::sin(cn * freq);
                eb[half + i] = (T)std::cos(cn * freq);
            }
            if (E % 2) eb[E - 1] = T(0);
        }
        temb_lin1_.fwd(ps_, emb_.data(), batch, t1_.data());
        for (size_t i = 0; i < (size_t)batch * temb_dim; ++i) a_t1_[i] = silu_of(t1_[i]);
        temb_lin2_.fwd(ps_, a_t1_.data(), batch, temb_vec_.data());
        for (size_t i = 0; i < (size_t)batch * temb_dim; ++i) s_temb_[i] = silu_of(temb_vec_[i]);
    }

    static void nearest_up2(const T* x, int batch, int h, int w, int c, T* y) {
        for (int b = 0; b < batch; ++b) {
            const T* xb = x + (size_t)b * h * w * c;
            T* yb = y + (size_t)b * (2 * h) * (2 * w) * c;
            for (int yy = 0; yy < 2 * h; ++yy)
                for (int xx = 0; xx < 2 * w; ++xx) {
                    const T* s = xb + ((size_t)(yy / 2) * w + xx / 2) * c;
                    T* d = yb + ((size_t)yy * (2 * w) + xx) * c;
                    for (int ci = 0; ci < c; ++ci) d[ci] = s[ci];
                }
        }
    }
    static void nearest_up2_bwd(const T* dy, int batch, int h, int w, int c, T* dx) {
        // h,w are the SOURCE dims; dy is [2h,2w]
        for (int b = 0; b < batch; ++b) {
            const T* db = dy + (size_t)b * (2 * h) * (2 * w) * c;
            T* xb = dx + (size_t)b * h * w * c;
            std::fill(xb, xb + (size_t)h * w * c, T(0));
            for (int yy = 0; yy < 2 * h; ++yy)
                for (int xx = 0; xx < 2 * w; ++xx) {
                    const T* s = db + ((size_t)yy * (2 * w) + xx) * c;
                    T* d = xb + ((size_t)(yy / 2) * w + xx / 2) * c;
                    for (int ci = 0; ci < c; ++ci) d[ci] += s[ci];
                }
        }
    }

    void forward_net(const double* sigma, int batch, bool training, Pcg32* rng) {
        compute_temb(sigma, batch);
        const T* st = s_temb_.data();
        conv_in_.fwd(ps_, sc_, in12_.data(), batch, conv_in_y_.data());
        const T* h = conv_in_y_.data();
        for (int l = 0; l < 4; ++l) {
            for (auto& b : enc_[l]) {
                b.fwd(ps_, sc_, h, st, batch, training, rng);
                h = b.y.data();
            }
            if (l < 3) {
                down_[l].fwd(ps_, sc_, h, batch, down_y_[l].data());
                h = down_y_[l].data();
            }
        }
        for (int l = 3; l >= 0; --l) {
            const T* x_level;
            if (l == 3) {
                x_level = h;  // encoder deepest output flows straight in
            } else {
                // concat(upsampled, encoder skip)
                const T* skip = enc_[l].back().y.data();
                int c_half = dec_[l][0].cin / 2;
                int hw = dec_[l][0].h * dec_[l][0].w;
                T* cat = cat_[l].data();
                const T* up = up_y_[l].data();
                for (int b = 0; b < batch; ++b)
                    for (int p = 0; p < hw; ++p) {
                        T* d = cat + ((size_t)b * hw + p) * 2 * c_half;
                        const T* u = up + ((size_t)b * hw + p) * c_half;
                        const T* s = skip + ((size_t)b * hw + p) * c_half;
                        for (int c = 0; c < c_half; ++c) d[c] = u[c];
                        for (int c = 0; c < c_half; ++c) d[c_half + c] = s[c];
                    }
                x_level = cat;
            }
            const T* hh = x_level;
            for (auto& b : dec_[l]) {
                b.fwd(ps_, sc_, hh, st, batch, training, rng);
                hh = b.y.data();
            }
            if (l > 0) {
                auto& blk = dec_[l].back();
                nearest_up2(hh, batch, blk.h, blk.w, blk.cout, up_nn_[l - 1].data());
                up_[l - 1].fwd(ps_, sc_, up_nn_[l - 1].data(), batch, up_y_[l - 1].data());
            } else {
                h = hh;
            }
        }
        // out head: gn -> silu -> conv
        gn_out_.fwd(ps_, h, batch, gn_out_act_.data());
        size_t n_out = (size_t)batch * spatial_ * spatial_ * cfg_.level_channels(0);
        for (size_t i = 0; i < n_out; ++i) gn_out_act_.data()[i] = silu_of(gn_out_act_.data()[i]);
        conv_out_.fwd(ps_, sc_, gn_out_act_.data(), batch, conv_out_y_.data());
    }

    void backward_net(const T* dF, int batch, bool training) {
        const T* st = s_temb_.data();
        int temb_dim = 4 * cfg_.embed_dim();
        std::fill(d_s_temb_.begin(), d_s_temb_.begin() + (size_t)batch * temb_dim, T(0));

        // out head backward
        int c0 = cfg_.level_channels(0);
        size_t n_out = (size_t)batch * spatial_ * spatial_ * c0;
        if (d_head_.count() < n_out) d_head_.resize(max_batch_, spatial_, spatial_, c0);
        // recompute conv_out input (silu(gn_out)) for its dW
        gn_out_.recompute_silu(ps_, batch, gn_out_act_.data());
        T* d_act = sc_.dact.data();
        std::fill(d_act, d_act + n_out, T(0));
        conv_out_.bwd(ps_, sc_, gn_out_act_.data(), dF, batch, d_act);
        gn_out_.silu_backward_inplace(ps_, batch, d_act);
        std::fill(d_head_.data(), d_head_.data() + n_out, T(0));
        gn_out_.bwd(ps_, d_act, batch, d_head_.data());

        const T* d = d_head_.data();  // gradient flowing into dec0 output
        for (int l = 0; l <= 3; ++l) {
            if (l > 0) {
                // arrive here with d = gradient wrt up_y_[l-1]
                auto& blk = dec_[l].back();
                if (d_upnn_.count() < up_nn_[l - 1].count())
                    d_upnn_.resize(max_batch_, spatial_, spatial_, std::max(cfg_.level_channels(3), 2 * c0));
                T* dn = d_upnn_.data();
                std::fill(dn, dn + up_nn_[l - 1].count(), T(0));
                up_[l - 1].bwd(ps_, sc_, up_nn_[l - 1].data(), d, batch, dn);
                // back through nearest: into the last dec block's output grad
                if (d_level_.count() < (size_t)batch * blk.h * blk.w * blk.cout)
                    d_level_.resize(max_batch_, spatial_, spatial_, 2 * c0);
                nearest_up2_bwd(dn, batch, blk.h, blk.w, blk.cout, d_level_.data());
                d = d_level_.data();
            }
            for (int i = (int)dec_[l].size() - 1; i >= 0; --i) {
                dec_[l][i].bwd(ps_, sc_, d, st, batch, training, d_s_temb_.data());
                d = dec_[l][i].dx.data();
            }
            if (l == 3) {
                d_enc_tail_ = d;  // gradient wrt encoder deepest output
            } else {
                // split concat gradient: first half -> up path, second -> skip
                int c_half = dec_[l][0].cin / 2;
                int hw = dec_[l][0].h * dec_[l][0].w;
                if (d_upy_[l].count() < (size_t)batch * hw * c_half)
                    d_upy_[l].resize(max_batch_, dec_[l][0].h, dec_[l][0].w, c_half);
                if (d_skip_[l].count() < (size_t)batch * hw * c_half)
                    d_skip_[l].resize(max_batch_, dec_[l][0].h, dec_[l][0].w, c_half);
                for (int b = 0; b < batch; ++b)
                    for (int p = 0; p < hw; ++p) {
                        const T* s = d + ((size_t)b * hw + p) * 2 * c_half;
                        T* u = d_upy_[l].data() + ((size_t)b * hw + p) * c_half;
                        T* k = d_skip_[l].data() + ((size_t)b * hw + p) * c_half;
                        for (int c = 0; c < c_half; ++c) u[c] = s[c];
                        for (int c = 0; c < c_half; ++c) k[c] = s[c_half + c];
                    }
                d = d_upy_[l].data();
            }
        }

        // encoder backward, deepest level first
        const T* dcur = d_enc_tail_;
        for (int l = 3; l >= 0; --l) {
            if (l < 3) {
                // dcur is gradient wrt down_y_[l]; back through the down conv
                auto& src = enc_[l].back();
                if (d_down_.count() < (size_t)batch * src.h * src.w * src.cout)
                    d_down_.resize(max_batch_, spatial_, spatial_, 2 * c0);
                T* dd = d_down_.data();
                std::fill(dd, dd + (size_t)batch * src.h * src.w * src.cout, T(0));
                down_[l].bwd(ps_, sc_, src.y.data(), dcur, batch, dd);
                // add the decoder skip gradient at this level
                const T* dskip = d_skip_[l].data();
                for (size_t i = 0; i < (size_t)batch * src.h * src.w * src.cout; ++i)
                    dd[i] += dskip[i];
                dcur = dd;
            }
            for (int i = (int)enc_[l].size() - 1; i >= 0; --i) {
                enc_[l][i].bwd(ps_, sc_, dcur, st, batch, training, d_s_temb_.data());
                dcur = enc_[l][i].dx.data();
            }
        }
        // conv_in backward (no dX needed at the input boundary)
        conv_in_.bwd(ps_, sc_, in12_.data(), dcur, batch, nullptr);

        // temb chain backward
        for (size_t i = 0; i < (size_t)batch * temb_dim; ++i)
            d_s_temb_[i] *= silu_grad(temb_vec_[i]);
        if (d_t1_.size() < (size_t)batch * temb_dim) d_t1_.resize((size_t)batch * temb_dim);
        std::fill(d_t1_.begin(), d_t1_.end(), T(0));
        temb_lin2_.bwd(ps_, a_t1_.data(), d_s_temb_.data(), batch, d_t1_.data());
        for (size_t i = 0; i < (size_t)batch * temb_dim; ++i) d_t1_[i] *= silu_grad(t1_[i]);
        temb_lin1_.bwd(ps_, emb_.data(), d_t1_.data(), batch, nullptr);
    }

    DenoiserConfig cfg_;
    int spatial_;
    int max_batch_;
    int cur_batch_ = 0;
    ParamStore<T> ps_;
    Scratch<T> sc_;

    LinearOp<T> temb_lin1_, temb_lin2_;
    ConvK3<T> conv_in_, conv_out_;
    GroupNorm<T> gn_out_;
    std::array<std::vector<ResBlock<T>>, 4> enc_, dec_;
    std::array<ConvK3<T>, 3> down_, up_;

    Tensor<T> in12_, conv_in_y_, conv_out_y_, gn_out_act_;
    std::array<Tensor<T>, 3> down_y_, up_nn_, up_y_, cat_;
    std::vector<T> emb_, t1_, a_t1_, temb_vec_, s_temb_, d_s_temb_, d_t1_;
    std::vector<double> c_out_, c_skip_;

    // backward-only buffers (lazy)
    Tensor<T> dF_, d_head_, d_upnn_, d_level_, d_down_;
    std::array<Tensor<T>, 3> d_upy_, d_skip_;
    const T* d_enc_tail_ = nullptr;
};

}  // namespace lldiff
