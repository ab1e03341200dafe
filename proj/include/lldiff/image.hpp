#pragma once

#include <cstddef>
#include <vector>

#include "lldiff/common.hpp"

namespace lldiff {

enum class Domain { srgb, linear, normalized, hsv };

const char* domain_name(Domain d);

// H×W×3 row-major interleaved float image with a color-domain tag.
// srgb/linear values are clamped to [0,1] on construction, normalized to
// [-1,1]; hsv carries H in [0,1) turns and S,V in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    Domain domain = Domain::srgb;
    std::vector<float> data;  // height*width*3

    Image() = default;
    Image(int h, int w, Domain d, float fill = 0.f);
    // takes ownership of pixels; clamps per domain
    Image(int h, int w, Domain d, std::vector<float> pixels);

    float& at(int y, int x, int c) { return data[((size_t)y * width + x) * 3 + c]; }
    const float& at(int y, int x, int c) const { return data[((size_t)y * width + x) * 3 + c]; }
    size_t size() const { return data.size(); }

    void clamp_to_domain();
};

// Non-overlapping decomposition into 32×32 tiles, row-major patch order.
struct PatchGrid {
    int patch_size = 32;
    int rows = 0;
    int cols = 0;
    std::vector<Image> patches;
    std::vector<std::pair<int, int>> origin;  // (row, col) pixel offset per patch

    int count() const { return rows * cols; }
};

// --- color transforms -------------------------------------------------------

// IEC 61966-2-1 transfer curve, scalar forms
float srgb_to_linear_scalar(float v);
float linear_to_srgb_scalar(float v);

Image srgb_to_linear(const Image& img);
Image linear_to_srgb(const Image& img);

// hexcone HSV; H stored in [0,1) turns
Image rgb_to_hsv(const Image& img);
Image hsv_to_rgb(const Image& img);

// Rec.709 luma of a linear or srgb pixel triple
inline float luma709(float r, float g, float b) {
    return 0.2126f * r + 0.7152f * g + 0.0722f * b;
}

// --- geometry ----------------------------------------------------------------

// Anti-aliased square resize. Integral-factor downsampling is an exact box
// average and integral-factor upsampling replicates blocks, so down∘up by the
// same factor is the identity on block-constant images and the ILVR low-pass
// built on top of it is an exact projector. Non-integral factors fall back to
// a triangle prefilter (down) / centered bilinear (up). Accumulates in double.
Image resample(const Image& img, int target);

// resample with an explicit direction check, per the library contract
Image resample_checked(const Image& img, int target, bool down);

Image center_crop(const Image& img, int size = 256);

PatchGrid patchify(const Image& img);
Image stitch(const PatchGrid& grid);

}  // namespace lldiff
