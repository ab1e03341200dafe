#include "lldiff/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "lldiff/png_io.hpp"

namespace fs = std::filesystem;

namespace lldiff {

PairedDataset load_paired_dataset(const std::string& root) {
    fs::path low_dir = fs::path(root) / "low";
    fs::path high_dir = fs::path(root) / "high";
    if (!fs::is_directory(low_dir) || !fs::is_directory(high_dir))
        throw IoError("dataset: '" + root + "' must contain low/ and high/ directories");

    auto list_pngs = [](const fs::path& dir) {
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            std::string name = e.path().filename().string();
            if (name.size() > 4 && name.substr(name.size() - 4) == ".png") names.push_back(name);
        }
        std::sort(names.begin(), names.end());
        return names;
    };
    std::vector<std::string> lows = list_pngs(low_dir), highs = list_pngs(high_dir);

    std::vector<std::string> orphans;
    std::set_difference(lows.begin(), lows.end(), highs.begin(), highs.end(),
                        std::back_inserter(orphans));
    size_t low_only = orphans.size();
    std::set_difference(highs.begin(), highs.end(), lows.begin(), lows.end(),
                        std::back_inserter(orphans));
    if (!orphans.empty()) {
        std::string msg = "dataset: unmatched files:";
        for (size_t i = 0; i < orphans.size(); ++i)
            msg += std::string(" ") + (i < low_only ? "low/" : "high/") + orphans[i];
        throw IoError(msg);
    }

    PairedDataset ds;
    for (const std::string& name : lows) {
        Image lo = load_png((low_dir / name).string());
        Image hi = load_png((high_dir / name).string());
        if (std::min(lo.height, lo.width) < 256 || std::min(hi.height, hi.width) < 256) {
            std::cerr << "warning: skipping " << name << " (smaller than 256x256)\n";
            continue;
        }
        ds.names.push_back(name);
        ds.low.push_back(center_crop(lo, 256));
        ds.high.push_back(center_crop(hi, 256));
    }
    return ds;
}

std::vector<size_t> sample_stats_subset(size_t dataset_size, size_t n, Pcg32& rng) {
    if (dataset_size == 0) throw ArgError("stats subset: dataset is empty");
    std::vector<size_t> idx(dataset_size);
    for (size_t i = 0; i < dataset_size; ++i) idx[i] = i;
    if (dataset_size <= n) {
        if (dataset_size < n)
            std::cerr << "warning: dataset has " << dataset_size << " pairs, wanted " << n
                      << "; using all of them\n";
        return idx;
    }
    for (size_t i = 0; i < n; ++i) {
        size_t j = i + rng.next_below((uint32_t)(dataset_size - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    return idx;
}

// --- glyph synthesis ---------------------------------------------------------------

namespace {

constexpr double kTau = 6.283185307179586;

struct Stroke {
    float val[3];
};

void paint_rect_outline(Image& im, Pcg32& rng, const Stroke& ink) {
    int size = im.width;
    int t = 1 + (int)rng.next_below(4);
    int x0 = (int)rng.next_below((uint32_t)(size - 8));
    int y0 = (int)rng.next_below((uint32_t)(size - 8));
    int rw = 8 + (int)rng.next_below(57);
    int rh = 8 + (int)rng.next_below(57);
    rw = std::min(rw, size - x0);
    rh = std::min(rh, size - y0);
    for (int y = 0; y < rh; ++y)
        for (int x = 0; x < rw; ++x) {
            bool border = x < t || y < t || rw - 1 - x < t || rh - 1 - y < t;
            if (!border) continue;
            for (int c = 0; c < 3; ++c) im.at(y0 + y, x0 + x, c) = ink.val[c];
        }
}

void paint_bar(Image& im, Pcg32& rng, const Stroke& ink) {
    int size = im.width;
    int t = 1 + (int)rng.next_below(4);
    int len = 8 + (int)rng.next_below(41);
    bool horizontal = rng.next_u32() & 1u;
    int bw = horizontal ? len : t, bh = horizontal ? t : len;
    int x0 = (int)rng.next_below((uint32_t)std::max(1, size - bw));
    int y0 = (int)rng.next_below((uint32_t)std::max(1, size - bh));
    bw = std::min(bw, size - x0);
    bh = std::min(bh, size - y0);
    for (int y = 0; y < bh; ++y)
        for (int x = 0; x < bw; ++x)
            for (int c = 0; c < 3; ++c) im.at(y0 + y, x0 + x, c) = ink.val[c];
}

void paint_ring_segment(Image& im, Pcg32& rng, const Stroke& ink) {
    int size = im.width;
    double t = 1.0 + rng.next_below(4);
    int cx = (int)rng.next_below((uint32_t)size);
    int cy = (int)rng.next_below((uint32_t)size);
    double r = 6.0 + rng.next_below(35);
    double a0 = rng.uniform(0.0, kTau);
    double span = rng.uniform(kTau / 6.0, kTau);
    int lo_y = std::max(0, (int)std::floor(cy - r - t)), hi_y = std::min(size - 1, (int)std::ceil(cy + r + t));
    int lo_x = std::max(0, (int)std::floor(cx - r - t)), hi_x = std::min(size - 1, (int)std::ceil(cx + r + t));
    for (int y = lo_y; y <= hi_y; ++y)
        for (int x = lo_x; x <= hi_x; ++x) {
            double dx = x - cx, dy = y - cy;
            double dist = std::sqrt(dx * dx + dy * dy);
            if (std::abs(dist - r) > t * 0.5) continue;
            double ang = std::atan2(dy, dx);
            if (ang < 0) ang += kTau;
            double rel = ang - a0;
            if (rel < 0) rel += kTau;
            if (rel > span) continue;
            for (int c = 0; c < 3; ++c) im.at(y, x, c) = ink.val[c];
        }
}

}  // namespace

std::pair<Image, Image> generate_glyph_pair(Pcg32& rng, int size, const DegradeParams& params) {
    if (size < 32 || size % 32 != 0)
        throw ArgError("glyph pair: size must be a positive multiple of 32");
    Image high(size, size, Domain::linear);

    // smooth colored background from two sinusoid terms + faint texture term
    double f1x = rng.uniform(0.5, 3.0), f1y = rng.uniform(0.5, 3.0), p1 = rng.uniform(0.0, kTau);
    double f2x = rng.uniform(0.5, 3.0), f2y = rng.uniform(0.5, 3.0), p2 = rng.uniform(0.0, kTau);
    double base[3], amp1[3], amp2[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(0.3, 0.6);
        amp1[c] = rng.uniform(0.05, 0.2);
        amp2[c] = rng.uniform(0.05, 0.2);
    }
    double ftx = rng.uniform(4.0, 10.0), fty = rng.uniform(4.0, 10.0);
    double ptx = rng.uniform(0.0, kTau), pty = rng.uniform(0.0, kTau);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double s1 = std::sin(kTau * (f1x * x + f1y * y) / size + p1);
            double s2 = std::sin(kTau * (f2x * x - f2y * y) / size + p2);
            double tex = 0.02 * std::sin(kTau * ftx * x / size + ptx) *
                         std::sin(kTau * fty * y / size + pty);
            for (int c = 0; c < 3; ++c)
                high.at(y, x, c) = (float)(base[c] + amp1[c] * s1 + amp2[c] * s2 + tex);
        }

    int strokes = 3 + (int)rng.next_below(6);
    for (int i = 0; i < strokes; ++i) {
        bool bright = rng.next_u32() & 1u;
        double v = bright ? rng.uniform(0.85, 1.0) : rng.uniform(0.0, 0.15);
        Stroke ink;
        for (int c = 0; c < 3; ++c)
            ink.val[c] = (float)std::clamp(v + rng.uniform(-0.05, 0.05), 0.0, 1.0);
        switch (rng.next_below(3)) {
            case 0: paint_rect_outline(high, rng, ink); break;
            case 1: paint_bar(high, rng, ink); break;
            default: paint_ring_segment(high, rng, ink); break;
        }
    }
    high.clamp_to_domain();

    Image low = degrade(high, params, rng);
    return {std::move(low), std::move(high)};
}

void write_glyph_dataset(const std::string& out_dir, const GlyphDatasetParams& p) {
    if (p.count < 1) throw ArgError("glyph dataset: count must be positive");
    fs::path root(out_dir);
    fs::create_directories(root / "low");
    fs::create_directories(root / "high");
    for (int i = 0; i < p.count; ++i) {
        Pcg32 rng = derive_stream(p.seed, 0x61, (uint64_t)i);
        auto [low, high] = generate_glyph_pair(rng, p.size, p.degrade);
        char name[16];
        std::snprintf(name, sizeof name, "%04d.png", i);
        save_png(linear_to_srgb(low), (root / "low" / name).string(), 8);
        save_png(linear_to_srgb(high), (root / "high" / name).string(), 16);
    }
    nlohmann::json manifest = {
        {"seed", p.seed},
        {"count", p.count},
        {"size", p.size},
        {"brightness", p.degrade.brightness},
        {"noise_level", p.degrade.noise_level},
    };
    std::ofstream mf(root / "manifest.json");
    if (!mf) throw IoError("glyph dataset: cannot write manifest.json");
    mf << manifest.dump(2) << "\n";
}

}  // namespace lldiff
