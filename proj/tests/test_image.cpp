#include <doctest.h>

#include <cmath>
#include <cstring>

#include "lldiff/image.hpp"
#include "lldiff/rng.hpp"

using namespace lldiff;

static Image random_image(int h, int w, Domain d, uint64_t seed) {
    Image img(h, w, d);
    Pcg32 rng(seed);
    for (auto& v : img.data) v = rng.next_float();
    return img;
}

TEST_CASE("srgb transfer fixed points and midpoint") {
    CHECK(srgb_to_linear_scalar(0.0f) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(srgb_to_linear_scalar(1.0f) == doctest::Approx(1.0).epsilon(1e-9));
    // ((0.5+0.055)/1.055)^2.4, evaluated independently
    CHECK(srgb_to_linear_scalar(0.5f) == doctest::Approx(0.21404114048223255).epsilon(1e-6));
    CHECK(linear_to_srgb_scalar(0.2f) == doctest::Approx(0.48452920448170694).epsilon(1e-6));
}

TEST_CASE("srgb/linear round trip and domain errors") {
    Image img = random_image(17, 23, Domain::srgb, 7);
    Image back = linear_to_srgb(srgb_to_linear(img));
    REQUIRE(back.data.size() == img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(back.data[i] - img.data[i]) < 1e-6f);
    CHECK(back.domain == Domain::srgb);
    CHECK_THROWS_AS(srgb_to_linear(srgb_to_linear(img)), DomainError);
    CHECK_THROWS_AS(linear_to_srgb(img), DomainError);
}

TEST_CASE("hsv round trip and anchors") {
    Image gray(4, 4, Domain::srgb, 0.37f);
    Image hsv = rgb_to_hsv(gray);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            CHECK(hsv.at(y, x, 1) == doctest::Approx(0.0));       // S
            CHECK(hsv.at(y, x, 2) == doctest::Approx(0.37).epsilon(1e-6));  // V
        }
    Image red(1, 1, Domain::srgb);
    red.at(0, 0, 0) = 1.f;
    Image hr = rgb_to_hsv(red);
    CHECK(hr.at(0, 0, 0) == doctest::Approx(0.0));
    CHECK(hr.at(0, 0, 1) == doctest::Approx(1.0));
    CHECK(hr.at(0, 0, 2) == doctest::Approx(1.0));

    Image img = random_image(13, 9, Domain::srgb, 8);
    Image back = hsv_to_rgb(rgb_to_hsv(img));
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(back.data[i] - img.data[i]) < 1e-6f);
    CHECK_THROWS_AS(rgb_to_hsv(rgb_to_hsv(img)), DomainError);
}

TEST_CASE("resample box oracle and identities") {
    // 2x2 {0,0,1,1} down to 1x1 -> 0.5 on every channel
    Image q(2, 2, Domain::linear);
    q.at(1, 0, 0) = q.at(1, 0, 1) = q.at(1, 0, 2) = 1.f;
    q.at(1, 1, 0) = q.at(1, 1, 1) = q.at(1, 1, 2) = 1.f;
    Image one = resample(q, 1);
    for (int c = 0; c < 3; ++c) CHECK(one.at(0, 0, c) == doctest::Approx(0.5).epsilon(1e-9));

    // constants are preserved exactly at any target
    Image c5(10, 10, Domain::linear, 0.3f);
    for (int target : {3, 7, 10, 20, 33}) {
        Image r = resample(c5, target);
        for (float v : r.data) CHECK(v == doctest::Approx(0.3).epsilon(1e-7));
    }

    // down-then-up by 2 is the identity on block-constant images
    Image block(16, 16, Domain::linear);
    Pcg32 rng(3);
    for (int y = 0; y < 16; y += 2)
        for (int x = 0; x < 16; x += 2) {
            float v[3] = {rng.next_float(), rng.next_float(), rng.next_float()};
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx)
                    for (int c = 0; c < 3; ++c) block.at(y + dy, x + dx, c) = v[c];
        }
    Image rt = resample(resample(block, 8), 16);
    for (size_t i = 0; i < block.data.size(); ++i)
        CHECK(std::abs(rt.data[i] - block.data[i]) < 1e-6f);
}

TEST_CASE("resample linearity") {
    Image a = random_image(12, 12, Domain::linear, 11);
    Image b = random_image(12, 12, Domain::linear, 12);
    Image mix(12, 12, Domain::linear);
    for (size_t i = 0; i < mix.data.size(); ++i)
        mix.data[i] = 0.25f * a.data[i] + 0.5f * b.data[i];
    Image ra = resample(a, 5), rb = resample(b, 5), rmix = resample(mix, 5);
    for (size_t i = 0; i < rmix.data.size(); ++i)
        CHECK(std::abs(rmix.data[i] - (0.25f * ra.data[i] + 0.5f * rb.data[i])) < 1e-6f);
}

TEST_CASE("resample_checked direction contract") {
    Image img(8, 8, Domain::linear, 0.5f);
    CHECK_THROWS_AS(resample_checked(img, 16, /*down=*/true), ArgError);
    CHECK_THROWS_AS(resample_checked(img, 4, /*down=*/false), ArgError);
    CHECK(resample_checked(img, 4, true).height == 4);
    CHECK(resample_checked(img, 16, false).height == 16);
}

TEST_CASE("center crop alignment") {
    Image id = random_image(256, 256, Domain::srgb, 21);
    Image same = center_crop(id, 256);
    CHECK(std::memcmp(same.data.data(), id.data.data(), id.data.size() * 4) == 0);

    Image odd = random_image(260, 260, Domain::srgb, 22);
    Image c = center_crop(odd, 256);
    CHECK(c.at(0, 0, 0) == odd.at(2, 2, 0));
    CHECK(c.at(255, 255, 2) == odd.at(257, 257, 2));

    Image rect = random_image(300, 400, Domain::srgb, 23);
    Image cr = center_crop(rect, 256);
    CHECK(cr.at(0, 0, 1) == rect.at(22, 72, 1));
    CHECK(cr.at(100, 200, 0) == rect.at(122, 272, 0));

    CHECK_THROWS_AS(center_crop(Image(100, 100, Domain::srgb), 256), ArgError);
}

TEST_CASE("patchify/stitch bijection") {
    Image tiny = random_image(32, 32, Domain::normalized, 31);
    PatchGrid g1 = patchify(tiny);
    CHECK(g1.count() == 1);

    Image full = random_image(256, 256, Domain::normalized, 32);
    PatchGrid g = patchify(full);
    CHECK(g.rows == 8);
    CHECK(g.cols == 8);
    CHECK(g.count() == 64);
    Image back = stitch(g);
    CHECK(std::memcmp(back.data.data(), full.data.data(), full.data.size() * 4) == 0);

    Image mid = random_image(128, 128, Domain::srgb, 33);
    Image rt = stitch(patchify(mid));
    CHECK(std::memcmp(rt.data.data(), mid.data.data(), mid.data.size() * 4) == 0);

    CHECK_THROWS_AS(patchify(Image(100, 96, Domain::srgb)), ArgError);
}
