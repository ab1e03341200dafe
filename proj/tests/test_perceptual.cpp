#include <doctest.h>

#include <cmath>
#include <vector>

#include "lldiff/common.hpp"
#include "lldiff/perceptual.hpp"
#include "lldiff/rng.hpp"

using namespace lldiff;

TEST_CASE("metric contract: zero at identity, positive off it") {
    auto m = make_default_perceptual();
    const int h = 16, w = 16;
    std::vector<float> a(h * w * 3), b;
    Pcg32 rng(3);
    for (auto& v : a) v = (float)(rng.normal() * 0.4);
    CHECK(m->eval(a.data(), a.data(), h, w) == 0.0);

    b = a;
    for (int y = 4; y < 10; ++y) b[(y * w + 5) * 3 + 1] += 0.8f;  // add an edge
    double d = m->eval(a.data(), b.data(), h, w);
    CHECK(d > 0.0);
    CHECK(std::isfinite(d));

    // edge-blind to a constant offset (pure gradient comparison)
    std::vector<float> shifted(a.size());
    for (size_t i = 0; i < a.size(); ++i) shifted[i] = a[i] + 0.3f;
    CHECK(m->eval(a.data(), shifted.data(), h, w) < 1e-8);

    std::vector<float> tiny(2 * 2 * 3, 0.f);
    CHECK_THROWS_AS(m->eval(tiny.data(), tiny.data(), 2, 2), ArgError);
}

TEST_CASE("weight scales value-side gradient accumulation linearly") {
    auto m = make_default_perceptual();
    const int h = 12, w = 12;
    size_t n = (size_t)h * w * 3;
    std::vector<float> a(n), b(n);
    Pcg32 rng(5);
    for (auto& v : a) v = (float)(rng.normal() * 0.4);
    for (auto& v : b) v = (float)(rng.normal() * 0.4);

    std::vector<float> g1(n, 0.f), g2(n, 0.25f), g2_copy;
    m->eval(a.data(), b.data(), h, w, g1.data(), 1.0f);
    g2_copy = g2;
    m->eval(a.data(), b.data(), h, w, g2.data(), 2.0f);
    for (size_t i = 0; i < n; ++i)
        CHECK(g2[i] - g2_copy[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-4));
}

TEST_CASE("reference gradient matches central finite differences") {
    const int h = 10, w = 10;
    size_t n = (size_t)h * w * 3;
    std::vector<double> a(n), b(n), g(n, 0.0);
    Pcg32 rng(7);
    for (auto& v : a) v = rng.normal() * 0.4;
    for (auto& v : b) v = rng.normal() * 0.4;

    sobel_perceptual_ref(a.data(), b.data(), h, w, g.data());

    Pcg32 pick(11);
    const double step = 1e-6;
    double max_rel = 0;
    for (int k = 0; k < 60; ++k) {
        size_t i = pick.next_below((uint32_t)n);
        double keep = a[i];
        a[i] = keep + step;
        double lp = sobel_perceptual_ref(a.data(), b.data(), h, w, nullptr);
        a[i] = keep - step;
        double lm = sobel_perceptual_ref(a.data(), b.data(), h, w, nullptr);
        a[i] = keep;
        double fd = (lp - lm) / (2 * step);
        double rel = std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("float metric tracks the double reference") {
    auto m = make_default_perceptual();
    const int h = 14, w = 14;
    size_t n = (size_t)h * w * 3;
    std::vector<float> af(n), bf(n), gf(n, 0.f);
    std::vector<double> ad(n), bd(n), gd(n, 0.0);
    Pcg32 rng(9);
    for (size_t i = 0; i < n; ++i) {
        ad[i] = rng.normal() * 0.4;
        bd[i] = rng.normal() * 0.4;
        af[i] = (float)ad[i];
        bf[i] = (float)bd[i];
    }
    double vf = m->eval(af.data(), bf.data(), h, w, gf.data(), 1.0f);
    double vd = sobel_perceptual_ref(ad.data(), bd.data(), h, w, gd.data());
    CHECK(vf == doctest::Approx(vd).epsilon(1e-4));
    for (size_t i = 0; i < n; ++i) CHECK(gf[i] == doctest::Approx(gd[i]).epsilon(2e-3));
}
