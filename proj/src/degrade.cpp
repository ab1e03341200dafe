#include "lldiff/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace lldiff {

Image dim(const Image& img, double brightness) {
    if (!(brightness > 0.0 && brightness <= 1.0))
        throw ArgError("dim: brightness must be in (0,1]");
    if (brightness == 1.0) return img;
    if (img.domain == Domain::srgb) {
        Image hsv = rgb_to_hsv(img);
        for (size_t i = 2; i < hsv.data.size(); i += 3)
            hsv.data[i] = (float)(hsv.data[i] * brightness);
        return hsv_to_rgb(hsv);
    }
    if (img.domain == Domain::linear) {
        // scaling V scales every RGB channel by the same factor (hexcone
        // identity), so in linear space the dim is a direct per-channel scale
        Image out = img;
        for (float& v : out.data) v = (float)(v * brightness);
        return out;
    }
    throw DomainError("dim: expected srgb or linear, got " +
                      std::string(domain_name(img.domain)));
}

double poisson_gaussian_noise(double x, double level, Pcg32& rng) {
    if (level < 0.0) throw ArgError("poisson_gaussian_noise: level must be >= 0");
    double var_read = (level / 4.0) * (level / 4.0);
    double gain_shot = level * level;
    return std::sqrt(var_read + gain_shot * x) * rng.normal();
}

Image add_poisson_gaussian(const Image& img, double level, Pcg32& rng) {
    if (level < 0.0) throw ArgError("add_poisson_gaussian: level must be >= 0");
    if (level == 0.0) return img;
    Image out = img;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (float)(out.data[i] + poisson_gaussian_noise(out.data[i], level, rng));
    out.clamp_to_domain();
    return out;
}

Image degrade(const Image& img, const DegradeParams& params, Pcg32& rng) {
    return add_poisson_gaussian(dim(img, params.brightness), params.noise_level, rng);
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    int radius = std::max(1, (int)std::ceil(3.0 * sigma));
    std::vector<float> k(2 * radius + 1);
    {
        std::vector<double> kd(2 * radius + 1);
        double mass = 0.0;
        for (int i = -radius; i <= radius; ++i) {
            kd[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
            mass += kd[i + radius];
        }
        for (size_t i = 0; i < kd.size(); ++i) k[i] = (float)(kd[i] / mass);
    }

    const int h = img.height, w = img.width, rw = w * 3;
    // separable shifted-FMA passes (edge-replicated); each tap is a
    // contiguous saxpy so the compiler vectorizes it
    std::vector<float> tmp((size_t)h * rw), padded((size_t)(w + 2 * radius) * 3);
    for (int y = 0; y < h; ++y) {
        const float* src = &img.data[(size_t)y * rw];
        for (int i = 0; i < radius; ++i)
            for (int c = 0; c < 3; ++c) {
                padded[(size_t)i * 3 + c] = src[c];
                padded[(size_t)(w + radius + i) * 3 + c] = src[(size_t)(w - 1) * 3 + c];
            }
        std::copy(src, src + rw, padded.begin() + (size_t)radius * 3);
        float* dst = &tmp[(size_t)y * rw];
        std::fill(dst, dst + rw, 0.f);
        for (int t = 0; t <= 2 * radius; ++t) {
            const float kt = k[t];
            const float* p = &padded[(size_t)t * 3];
            for (int j = 0; j < rw; ++j) dst[j] += kt * p[j];
        }
    }
    Image res(h, w, img.domain);
    for (int y = 0; y < h; ++y) {
        float* dst = &res.data[(size_t)y * rw];
        std::fill(dst, dst + rw, 0.f);
        for (int t = 0; t <= 2 * radius; ++t) {
            int yy = std::clamp(y + t - radius, 0, h - 1);
            const float kt = k[t];
            const float* p = &tmp[(size_t)yy * rw];
            for (int j = 0; j < rw; ++j) dst[j] += kt * p[j];
        }
    }
    res.clamp_to_domain();
    return res;
}

void augment(Image& a, Image& b, Pcg32& rng) {
    if (a.height != b.height || a.width != b.width)
        throw ArgError("augment: pair size mismatch");
    // identical draws drive both images
    bool do_blur = rng.next_u32() & 1u;
    double blur_sigma = rng.uniform(0.3, 1.0);
    double sharpen_amount = rng.uniform(0.2, 0.8);
    double brightness = rng.uniform(0.9, 1.1);
    double saturation = rng.uniform(0.9, 1.1);

    auto apply = [&](Image& img) {
        if (do_blur) {
            img = gaussian_blur(img, blur_sigma);
        } else {
            // unsharp mask: x + amount·(x − blur(x))
            Image blurred = gaussian_blur(img, 1.0);
            for (size_t i = 0; i < img.data.size(); ++i)
                img.data[i] = (float)(img.data[i] + sharpen_amount * (img.data[i] - blurred.data[i]));
        }
        for (size_t i = 0; i < img.data.size(); i += 3) {
            float r = (float)(img.data[i] * brightness);
            float g = (float)(img.data[i + 1] * brightness);
            float bl = (float)(img.data[i + 2] * brightness);
            // saturation as lerp toward luma, cheap and domain-agnostic
            float y = luma709(r, g, bl);
            img.data[i] = (float)(y + saturation * (r - y));
            img.data[i + 1] = (float)(y + saturation * (g - y));
            img.data[i + 2] = (float)(y + saturation * (bl - y));
        }
        img.clamp_to_domain();
    };
    apply(a);
    apply(b);
}

}  // namespace lldiff
