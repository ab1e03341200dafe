#include "lldiff/perceptual.hpp"

#include <cmath>
#include <vector>

#include "lldiff/common.hpp"

namespace lldiff {

namespace {

constexpr double kCharb = 1e-3;   // charbonnier knee
constexpr double kMagEps = 1e-3;  // gradient-magnitude smoothing

const int KX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
const int KY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

// charbonnier L1 between Sobel magnitudes over the valid interior; gradient
// wrt `a` is accumulated into da (when non-null) scaled by w_eff
template <typename T>
double sobel_term(const T* a, const T* b, int h, int w, T* da, double w_eff) {
    double count = 3.0 * (h - 2) * (w - 2);
    double val = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int y = 1; y < h - 1; ++y)
            for (int x = 1; x < w - 1; ++x) {
                double gxa = 0, gya = 0, gxb = 0, gyb = 0;
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        size_t idx = ((size_t)(y + ky - 1) * w + (x + kx - 1)) * 3 + c;
                        gxa += KX[ky][kx] * (double)a[idx];
                        gya += KY[ky][kx] * (double)a[idx];
                        gxb += KX[ky][kx] * (double)b[idx];
                        gyb += KY[ky][kx] * (double)b[idx];
                    }
                double ma = std::sqrt(gxa * gxa + gya * gya + kMagEps * kMagEps);
                double mb = std::sqrt(gxb * gxb + gyb * gyb + kMagEps * kMagEps);
                double d = ma - mb;
                double root = std::sqrt(d * d + kCharb * kCharb);
                val += root - kCharb;
                if (da) {
                    double g = w_eff * (d / root) / count;
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            size_t idx = ((size_t)(y + ky - 1) * w + (x + kx - 1)) * 3 + c;
                            da[idx] += (T)(g * (gxa * KX[ky][kx] + gya * KY[ky][kx]) / ma);
                        }
                }
            }
    return val / count;
}

template <typename T>
void box_down2(const T* x, int h, int w, int hh, int hw, std::vector<T>& out) {
    out.assign((size_t)hh * hw * 3, T(0));
    for (int y = 0; y < hh; ++y)
        for (int x2 = 0; x2 < hw; ++x2)
            for (int c = 0; c < 3; ++c) {
                size_t r0 = ((size_t)(2 * y) * w + 2 * x2) * 3 + c;
                size_t r1 = ((size_t)(2 * y + 1) * w + 2 * x2) * 3 + c;
                out[((size_t)y * hw + x2) * 3 + c] =
                    (T)(0.25 * ((double)x[r0] + x[r0 + 3] + x[r1] + x[r1 + 3]));
            }
}

template <typename T>
double sobel_metric(const T* pred, const T* target, int h, int w, T* d_pred, double weight) {
    if (h < 3 || w < 3) throw ArgError("perceptual: patch too small for gradient filters");
    bool two_scale = h >= 6 && w >= 6;
    double w_full = two_scale ? 0.5 : 1.0;
    double v = w_full * sobel_term(pred, target, h, w, d_pred, w_full * weight);
    if (two_scale) {
        int hh = h / 2, hw = w / 2;
        std::vector<T> ph, th, dh;
        box_down2(pred, h, w, hh, hw, ph);
        box_down2(target, h, w, hh, hw, th);
        T* dhp = nullptr;
        if (d_pred) {
            dh.assign((size_t)hh * hw * 3, T(0));
            dhp = dh.data();
        }
        v += 0.5 * sobel_term(ph.data(), th.data(), hh, hw, dhp, 0.5 * weight);
        if (d_pred) {
            for (int y = 0; y < hh; ++y)
                for (int x2 = 0; x2 < hw; ++x2)
                    for (int c = 0; c < 3; ++c) {
                        T g = (T)(0.25 * dh[((size_t)y * hw + x2) * 3 + c]);
                        size_t r0 = ((size_t)(2 * y) * w + 2 * x2) * 3 + c;
                        size_t r1 = ((size_t)(2 * y + 1) * w + 2 * x2) * 3 + c;
                        d_pred[r0] += g;
                        d_pred[r0 + 3] += g;
                        d_pred[r1] += g;
                        d_pred[r1 + 3] += g;
                    }
        }
    }
    return v;
}

}  // namespace

double SobelPerceptual::eval(const float* pred, const float* target, int h, int w, float* d_pred,
                             float weight) const {
    return sobel_metric<float>(pred, target, h, w, d_pred, (double)weight);
}

std::unique_ptr<PerceptualMetric> make_default_perceptual() {
    return std::make_unique<SobelPerceptual>();
}

double sobel_perceptual_ref(const double* pred, const double* target, int h, int w,
                            double* d_pred) {
    return sobel_metric<double>(pred, target, h, w, d_pred, 1.0);
}

}  // namespace lldiff
