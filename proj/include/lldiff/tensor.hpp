#pragma once

#include <cblas.h>

#include <algorithm>
#include <cstddef>
#include <vector>

#include "lldiff/common.hpp"

namespace lldiff {

// Channels-last activation tensor [N, H, W, C], contiguous. Channels-last
// keeps conv GEMMs in the (rows = N·H·W) orientation OpenBLAS runs fastest
// in on this workload, and makes norm/concat/elementwise ops contiguous.
// Buffers are sized for a maximum batch; calls pass the live batch count.
template <typename T>
struct Tensor {
    int n = 0, h = 0, w = 0, c = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int n_, int h_, int w_, int c_) { resize(n_, h_, w_, c_); }

    void resize(int n_, int h_, int w_, int c_) {
        n = n_; h = h_; w = w_; c = c_;
        v.assign((size_t)n * h * w * c, T(0));
    }
    size_t count() const { return v.size(); }
    size_t per_example() const { return (size_t)h * w * c; }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

// row-major GEMM: C[m,n] = alpha · A (op) · B (op) + beta·C
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// im2col for 3×3 convolution, pad 1, stride 1 or 2. Rows are output positions
// (b, oy, ox), columns are (ky, kx, cin); out-of-bounds taps stay zero.
template <typename T>
void im2col_3x3(const T* x, int batch, int h, int w, int c, int stride, T* col) {
    int out_h = (h + 2 - 3) / stride + 1;
    int out_w = (w + 2 - 3) / stride + 1;
    size_t k = (size_t)9 * c;
    std::fill(col, col + (size_t)batch * out_h * out_w * k, T(0));
    for (int b = 0; b < batch; ++b) {
        const T* img = x + (size_t)b * h * w * c;
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                T* dst = col + (((size_t)b * out_h + oy) * out_w + ox) * k;
                for (int ky = 0; ky < 3; ++ky) {
                    int iy = oy * stride + ky - 1;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        int ix = ox * stride + kx - 1;
                        if (ix < 0 || ix >= w) continue;
                        const T* src = img + ((size_t)iy * w + ix) * c;
                        T* d = dst + ((size_t)ky * 3 + kx) * c;
                        for (int ci = 0; ci < c; ++ci) d[ci] = src[ci];
                    }
                }
            }
        }
    }
}

// transpose of im2col: scatter-add column gradients back into dX
template <typename T>
void col2im_3x3(const T* col, int batch, int h, int w, int c, int stride, T* dx) {
    int out_h = (h + 2 - 3) / stride + 1;
    int out_w = (w + 2 - 3) / stride + 1;
    size_t k = (size_t)9 * c;
    for (int b = 0; b < batch; ++b) {
        T* img = dx + (size_t)b * h * w * c;
        for (int oy = 0; oy < out_h; ++oy) {
            for (int ox = 0; ox < out_w; ++ox) {
                const T* src = col + (((size_t)b * out_h + oy) * out_w + ox) * k;
                for (int ky = 0; ky < 3; ++ky) {
                    int iy = oy * stride + ky - 1;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        int ix = ox * stride + kx - 1;
                        if (ix < 0 || ix >= w) continue;
                        T* d = img + ((size_t)iy * w + ix) * c;
                        const T* s = src + ((size_t)ky * 3 + kx) * c;
                        for (int ci = 0; ci < c; ++ci) d[ci] += s[ci];
                    }
                }
            }
        }
    }
}

}  // namespace lldiff
