#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "adae/degrade.hpp"

using namespace adae;
using namespace adae::degrade;

namespace {

img::Image make_image(int h, int w, float v) {
    img::Image im;
    im.data = Plane<float>(h, w, v);
    return im;
}

}  // namespace

TEST_CASE("stretch: mid-gray is a fixed point") {
    for (double alpha : {0.5, 1.0, 2.0, 5.0}) {
        const auto r = stretch_illumination(make_image(2, 2, 0.5f), alpha, 0.0);
        for (float v : r.image.data.v) CHECK(v == 0.5f);
    }
}

TEST_CASE("stretch: bright pixel clips and lands in the extreme mask") {
    const auto r = stretch_illumination(make_image(1, 1, 0.9f), 2.0, 0.0);
    CHECK(r.image.data.v[0] == 1.0f);
    CHECK(r.partition.extreme_mask.v[0] == 1);
    CHECK(r.partition.normal_mask.v[0] == 0);
}

TEST_CASE("stretch: unclipped pixel stays normal") {
    const auto r = stretch_illumination(make_image(1, 1, 0.3f), 2.0, 0.0);
    CHECK_THAT(r.image.data.v[0], Catch::Matchers::WithinAbs(0.1, 1e-6));
    CHECK(r.partition.normal_mask.v[0] == 1);
}

TEST_CASE("stretch: identity at alpha 1 and monotonicity") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> ud(2.0f / 255.0f, 1.0f - 2.0f / 255.0f);
    img::Image im;
    im.data = Plane<float>(4, 4);
    for (auto& v : im.data.v) v = ud(rng);
    const auto r = stretch_illumination(im, 1.0, 0.0);
    for (size_t i = 0; i < im.data.size(); ++i) CHECK(r.image.data.v[i] == im.data.v[i]);

    // monotone non-decreasing in the input for any alpha > 0
    for (double alpha : {0.3, 1.7, 4.0}) {
        float prev = -1.0f;
        for (float x = 0.0f; x <= 1.001f; x += 0.05f) {
            const auto s = stretch_illumination(make_image(1, 1, std::min(x, 1.0f)), alpha);
            CHECK(s.image.data.v[0] >= prev);
            prev = s.image.data.v[0];
        }
    }
}

TEST_CASE("stretch: masks partition the image exactly") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> ud(0.0f, 1.0f);
    img::Image im;
    im.data = Plane<float>(8, 8);
    for (auto& v : im.data.v) v = ud(rng);
    const auto r = stretch_illumination(im, 2.5, 0.1);
    for (size_t i = 0; i < im.data.size(); ++i)
        CHECK(r.partition.extreme_mask.v[i] + r.partition.normal_mask.v[i] == 1);
}

TEST_CASE("stretch rejects non-positive alpha") {
    CHECK_THROWS_AS(stretch_illumination(make_image(1, 1, 0.5f), 0.0), BadAlpha);
    CHECK_THROWS_AS(stretch_illumination(make_image(1, 1, 0.5f), -1.0), BadAlpha);
}

TEST_CASE("blur: single frame is the identity") {
    const auto im = make_image(3, 3, 0.4f);
    const auto out = synthesize_blur({im});
    CHECK(out.data.v == im.data.v);
}

TEST_CASE("blur: mean of opposite frames") {
    const auto out = synthesize_blur({make_image(2, 2, 0.0f), make_image(2, 2, 1.0f)});
    for (float v : out.data.v) CHECK(v == 0.5f);
}

TEST_CASE("blur: moving bar leaves a uniform smear") {
    std::vector<img::Image> frames;
    for (int k = 0; k < 4; ++k) {
        img::Image f = make_image(4, 8, 0.0f);
        for (int y = 0; y < 4; ++y) f.data.at(y, 2 + k) = 1.0f;
        frames.push_back(f);
    }
    const auto out = synthesize_blur(frames);
    for (int y = 0; y < 4; ++y) {
        for (int x = 2; x < 6; ++x) CHECK(out.data.at(y, x) == 0.25f);
        CHECK(out.data.at(y, 0) == 0.0f);
        CHECK(out.data.at(y, 7) == 0.0f);
    }
}

TEST_CASE("blur: output bounded by input envelope") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> ud(0.0f, 1.0f);
    std::vector<img::Image> frames(3);
    for (auto& f : frames) {
        f.data = Plane<float>(5, 5);
        for (auto& v : f.data.v) v = ud(rng);
    }
    const auto out = synthesize_blur(frames);
    for (size_t i = 0; i < out.data.size(); ++i) {
        float mn = 1.0f, mx = 0.0f;
        for (const auto& f : frames) {
            mn = std::min(mn, f.data.v[i]);
            mx = std::max(mx, f.data.v[i]);
        }
        CHECK(out.data.v[i] >= mn - 1e-6f);
        CHECK(out.data.v[i] <= mx + 1e-6f);
    }
}

TEST_CASE("blur error paths") {
    CHECK_THROWS_AS(synthesize_blur({}), EmptySequence);
    CHECK_THROWS_AS(synthesize_blur({make_image(2, 2, 0.0f), make_image(3, 3, 0.0f)}),
                    ShapeMismatch);
}

TEST_CASE("degraded pair: identity recipe is bit-exact") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<float> ud(2.0f / 255.0f, 1.0f - 2.0f / 255.0f);
    img::Image im;
    im.data = Plane<float>(6, 6);
    for (auto& v : im.data.v) v = ud(rng);
    DegradeRecipe recipe;  // alpha 1, offset 0, K 1
    const auto pair = make_degraded_pair({im}, recipe);
    CHECK(pair.degraded.data.v == im.data.v);
    CHECK(pair.clipped_fraction == 0.0);
    for (uint8_t m : pair.partition.extreme_mask.v) CHECK(m == 0);
}

TEST_CASE("degraded pair: linear ramp clip fraction matches closed form") {
    // alpha = 3: pixels with |I - 0.5| > 1/6 clip
    const int n = 256;
    img::Image ramp;
    ramp.data = Plane<float>(1, n);
    for (int x = 0; x < n; ++x) ramp.data.at(0, x) = static_cast<float>(x) / (n - 1);
    DegradeRecipe recipe;
    recipe.alpha = 3.0;
    const auto pair = make_degraded_pair({ramp}, recipe);
    size_t predicted = 0;
    for (int x = 0; x < n; ++x)
        if (std::abs(ramp.data.at(0, x) - 0.5f) > 1.0f / 6.0f) ++predicted;
    size_t got = 0;
    for (uint8_t m : pair.partition.extreme_mask.v) got += m;
    CHECK(std::abs(static_cast<long>(got) - static_cast<long>(predicted)) <= 2);
}

TEST_CASE("degraded pair: deterministic under a fixed recipe") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> ud(0.0f, 1.0f);
    std::vector<img::Image> frames(4);
    for (auto& f : frames) {
        f.data = Plane<float>(8, 8);
        for (auto& v : f.data.v) v = ud(rng);
    }
    DegradeRecipe recipe;
    recipe.alpha = 2.4;
    recipe.offset = 0.2;
    recipe.blur_frames = 4;
    recipe.seed = 77;
    const auto a = make_degraded_pair(frames, recipe);
    const auto b = make_degraded_pair(frames, recipe);
    CHECK(a.degraded.data.v == b.degraded.data.v);
    CHECK(a.partition.extreme_mask.v == b.partition.extreme_mask.v);
    CHECK(a.clipped_fraction == b.clipped_fraction);
}
