#include <algorithm>
#include <cmath>
#include <vector>

#include "lldiff/image.hpp"

namespace lldiff {

namespace {

// Separable 1D resampling pass over one axis of an H×W×3 double buffer.
// in: n_in samples per line; out: n_out. All accumulation in double.
void resample_lines(const std::vector<double>& in, std::vector<double>& out,
                    int n_in, int n_out, int n_lines, int in_stride, int in_pitch,
                    int out_stride, int out_pitch) {
    if (n_in == n_out) {
        for (int l = 0; l < n_lines; ++l)
            for (int i = 0; i < n_in; ++i)
                out[(size_t)l * out_pitch + (size_t)i * out_stride] =
                    in[(size_t)l * in_pitch + (size_t)i * in_stride];
        return;
    }
    if (n_out < n_in && n_in % n_out == 0) {
        // integral-factor downsample: exact box average
        int k = n_in / n_out;
        double inv = 1.0 / k;
        for (int l = 0; l < n_lines; ++l) {
            const double* src = &in[(size_t)l * in_pitch];
            double* dst = &out[(size_t)l * out_pitch];
            for (int o = 0; o < n_out; ++o) {
                double acc = 0.0;
                for (int j = 0; j < k; ++j) acc += src[(size_t)(o * k + j) * in_stride];
                dst[(size_t)o * out_stride] = acc * inv;
            }
        }
        return;
    }
    if (n_out > n_in && n_out % n_in == 0) {
        // integral-factor upsample: block replication (keeps down∘up identity
        // on block-constant signals and makes the ILVR low-pass idempotent)
        int k = n_out / n_in;
        for (int l = 0; l < n_lines; ++l) {
            const double* src = &in[(size_t)l * in_pitch];
            double* dst = &out[(size_t)l * out_pitch];
            for (int o = 0; o < n_out; ++o) dst[(size_t)o * out_stride] = src[(size_t)(o / k) * in_stride];
        }
        return;
    }
    if (n_out < n_in) {
        // non-integral downsample: triangle prefilter scaled by the ratio
        double scale = (double)n_in / n_out;
        for (int l = 0; l < n_lines; ++l) {
            const double* src = &in[(size_t)l * in_pitch];
            double* dst = &out[(size_t)l * out_pitch];
            for (int o = 0; o < n_out; ++o) {
                double center = (o + 0.5) * scale - 0.5;
                int lo = (int)std::ceil(center - scale);
                int hi = (int)std::floor(center + scale);
                double acc = 0.0, wsum = 0.0;
                for (int j = lo; j <= hi; ++j) {
                    double w = 1.0 - std::abs(j - center) / scale;
                    if (w <= 0.0) continue;
                    int jj = std::clamp(j, 0, n_in - 1);
                    acc += w * src[(size_t)jj * in_stride];
                    wsum += w;
                }
                dst[(size_t)o * out_stride] = acc / wsum;
            }
        }
        return;
    }
    // non-integral upsample: centered bilinear
    double scale = (double)n_in / n_out;
    for (int l = 0; l < n_lines; ++l) {
        const double* src = &in[(size_t)l * in_pitch];
        double* dst = &out[(size_t)l * out_pitch];
        for (int o = 0; o < n_out; ++o) {
            double pos = (o + 0.5) * scale - 0.5;
            int i0 = (int)std::floor(pos);
            double f = pos - i0;
            int a = std::clamp(i0, 0, n_in - 1);
            int b = std::clamp(i0 + 1, 0, n_in - 1);
            dst[(size_t)o * out_stride] = (1.0 - f) * src[(size_t)a * in_stride] + f * src[(size_t)b * in_stride];
        }
    }
}

}  // namespace

Image resample(const Image& img, int target) {
    if (target < 1) throw ArgError("resample: target must be >= 1");
    if (img.height != img.width)
        throw ArgError("resample: square images only (crop first)");
    int src = img.height;
    if (target == src) return img;

    std::vector<double> a(img.data.begin(), img.data.end());
    // horizontal pass: src×src -> src×target, per channel
    std::vector<double> b((size_t)src * target * 3);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> in_view((size_t)src * src), out_view((size_t)src * target);
        for (int y = 0; y < src; ++y)
            for (int x = 0; x < src; ++x) in_view[(size_t)y * src + x] = a[((size_t)y * src + x) * 3 + c];
        resample_lines(in_view, out_view, src, target, src, 1, src, 1, target);
        for (int y = 0; y < src; ++y)
            for (int x = 0; x < target; ++x) b[((size_t)y * target + x) * 3 + c] = out_view[(size_t)y * target + x];
    }
    // vertical pass: src×target -> target×target
    std::vector<float> out_px((size_t)target * target * 3);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> in_view((size_t)src * target), out_view((size_t)target * target);
        for (int y = 0; y < src; ++y)
            for (int x = 0; x < target; ++x) in_view[(size_t)x * src + y] = b[((size_t)y * target + x) * 3 + c];
        resample_lines(in_view, out_view, src, target, target, 1, src, 1, target);
        for (int x = 0; x < target; ++x)
            for (int y = 0; y < target; ++y)
                out_px[((size_t)y * target + x) * 3 + c] = (float)out_view[(size_t)x * target + y];
    }
    return Image(target, target, img.domain, std::move(out_px));
}

Image resample_checked(const Image& img, int target, bool down) {
    if (down && target > std::min(img.height, img.width))
        throw ArgError("resample: downsample target exceeds source size");
    if (!down && target < std::max(img.height, img.width))
        throw ArgError("resample: upsample target below source size");
    return resample(img, target);
}

}  // namespace lldiff
