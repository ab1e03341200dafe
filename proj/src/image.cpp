#include "lldiff/image.hpp"

#include <algorithm>
#include <cmath>

namespace lldiff {

const char* domain_name(Domain d) {
    switch (d) {
        case Domain::srgb: return "srgb";
        case Domain::linear: return "linear";
        case Domain::normalized: return "normalized";
        case Domain::hsv: return "hsv";
    }
    return "?";
}

Image::Image(int h, int w, Domain d, float fill) : height(h), width(w), domain(d) {
    if (h < 1 || w < 1) throw ArgError("image dimensions must be >= 1");
    data.assign((size_t)h * w * 3, fill);
    clamp_to_domain();
}

Image::Image(int h, int w, Domain d, std::vector<float> pixels)
    : height(h), width(w), domain(d), data(std::move(pixels)) {
    if (h < 1 || w < 1) throw ArgError("image dimensions must be >= 1");
    if (data.size() != (size_t)h * w * 3) throw ArgError("pixel buffer size mismatch");
    clamp_to_domain();
}

void Image::clamp_to_domain() {
    float lo = 0.f, hi = 1.f;
    if (domain == Domain::normalized) lo = -1.f;
    if (domain == Domain::hsv) return;  // H wraps; S,V already sane from conversions
    for (float& v : data) v = std::clamp(v, lo, hi);
}

// --- color -------------------------------------------------------------------

float srgb_to_linear_scalar(float v) {
    return v <= 0.04045f ? v / 12.92f : std::pow((v + 0.055f) / 1.055f, 2.4f);
}

float linear_to_srgb_scalar(float v) {
    return v <= 0.0031308f ? v * 12.92f : 1.055f * std::pow(v, 1.0f / 2.4f) - 0.055f;
}

Image srgb_to_linear(const Image& img) {
    if (img.domain != Domain::srgb)
        throw DomainError(std::string("srgb_to_linear: expected srgb, got ") + domain_name(img.domain));
    Image out = img;
    out.domain = Domain::linear;
    for (float& v : out.data) v = srgb_to_linear_scalar(v);
    out.clamp_to_domain();
    return out;
}

Image linear_to_srgb(const Image& img) {
    if (img.domain != Domain::linear)
        throw DomainError(std::string("linear_to_srgb: expected linear, got ") + domain_name(img.domain));
    Image out = img;
    out.domain = Domain::srgb;
    for (float& v : out.data) v = linear_to_srgb_scalar(v);
    out.clamp_to_domain();
    return out;
}

Image rgb_to_hsv(const Image& img) {
    if (img.domain != Domain::srgb)
        throw DomainError(std::string("rgb_to_hsv: expected srgb, got ") + domain_name(img.domain));
    Image out(img.height, img.width, Domain::hsv);
    for (size_t i = 0; i < img.data.size(); i += 3) {
        float r = img.data[i], g = img.data[i + 1], b = img.data[i + 2];
        float mx = std::max({r, g, b}), mn = std::min({r, g, b});
        float d = mx - mn;
        float h = 0.f;
        if (d > 0.f) {
            if (mx == r) h = (g - b) / d;
            else if (mx == g) h = (b - r) / d + 2.f;
            else h = (r - g) / d + 4.f;
            h /= 6.f;
            if (h < 0.f) h += 1.f;
        }
        out.data[i] = h;
        out.data[i + 1] = mx > 0.f ? d / mx : 0.f;
        out.data[i + 2] = mx;
    }
    return out;
}

Image hsv_to_rgb(const Image& img) {
    if (img.domain != Domain::hsv)
        throw DomainError(std::string("hsv_to_rgb: expected hsv, got ") + domain_name(img.domain));
    Image out(img.height, img.width, Domain::srgb);
    for (size_t i = 0; i < img.data.size(); i += 3) {
        float h = img.data[i] * 6.f, s = img.data[i + 1], v = img.data[i + 2];
        int sector = (int)std::floor(h) % 6;
        if (sector < 0) sector += 6;
        float f = h - std::floor(h);
        float p = v * (1.f - s);
        float q = v * (1.f - s * f);
        float t = v * (1.f - s * (1.f - f));
        float r, g, b;
        switch (sector) {
            case 0: r = v; g = t; b = p; break;
            case 1: r = q; g = v; b = p; break;
            case 2: r = p; g = v; b = t; break;
            case 3: r = p; g = q; b = v; break;
            case 4: r = t; g = p; b = v; break;
            default: r = v; g = p; b = q; break;
        }
        out.data[i] = r;
        out.data[i + 1] = g;
        out.data[i + 2] = b;
    }
    out.clamp_to_domain();
    return out;
}

// --- geometry ----------------------------------------------------------------

Image center_crop(const Image& img, int size) {
    if (size < 1 || size > std::min(img.height, img.width))
        throw ArgError("center_crop: size exceeds image bounds");
    // odd margins break toward top-left
    int y0 = (img.height - size) / 2;
    int x0 = (img.width - size) / 2;
    Image out(size, size, img.domain);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

PatchGrid patchify(const Image& img) {
    const int ps = 32;
    if (img.height % ps || img.width % ps)
        throw ArgError("patchify: dimensions must be multiples of 32 (resample first)");
    PatchGrid grid;
    grid.patch_size = ps;
    grid.rows = img.height / ps;
    grid.cols = img.width / ps;
    grid.patches.reserve((size_t)grid.rows * grid.cols);
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            Image p(ps, ps, img.domain);
            for (int y = 0; y < ps; ++y)
                for (int x = 0; x < ps; ++x)
                    for (int ch = 0; ch < 3; ++ch) p.at(y, x, ch) = img.at(r * ps + y, c * ps + x, ch);
            grid.patches.push_back(std::move(p));
            grid.origin.emplace_back(r * ps, c * ps);
        }
    }
    return grid;
}

Image stitch(const PatchGrid& grid) {
    if (grid.rows < 1 || grid.cols < 1 || (int)grid.patches.size() != grid.count())
        throw ArgError("stitch: incomplete patch grid");
    const int ps = grid.patch_size;
    Image out(grid.rows * ps, grid.cols * ps, grid.patches[0].domain);
    for (int i = 0; i < grid.count(); ++i) {
        auto [oy, ox] = grid.origin[i];
        const Image& p = grid.patches[i];
        for (int y = 0; y < ps; ++y)
            for (int x = 0; x < ps; ++x)
                for (int c = 0; c < 3; ++c) out.at(oy + y, ox + x, c) = p.at(y, x, c);
    }
    return out;
}

}  // namespace lldiff
