#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <random>

#include "adae/imagery.hpp"

using namespace adae;
using namespace adae::img;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("depth gradient of constant and linear fields") {
    Plane<float> d(5, 5, 2.0f);
    auto g = depth_gradient(make_depth(d));
    for (float v : g.magnitude.v) CHECK(v == 0.0f);

    Plane<float> ramp(5, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) ramp.at(y, x) = static_cast<float>(x + 1);
    g = depth_gradient(make_depth(ramp));
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            CHECK(g.gx.at(y, x) == 1.0f);
            CHECK(g.gy.at(y, x) == 0.0f);
        }
}

TEST_CASE("depth gradient matches a scalar stencil oracle") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> ud(1.0f, 9.0f);
    Plane<float> d(5, 5);
    for (auto& v : d.v) v = ud(rng);
    const auto g = depth_gradient(make_depth(d));
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            const int x0 = std::max(x - 1, 0), x1 = std::min(x + 1, 4);
            const int y0 = std::max(y - 1, 0), y1 = std::min(y + 1, 4);
            const float ex = (d.at(y, x1) - d.at(y, x0)) / (x1 - x0);
            const float ey = (d.at(y1, x) - d.at(y0, x)) / (y1 - y0);
            CHECK(g.gx.at(y, x) == ex);
            CHECK(g.gy.at(y, x) == ey);
            CHECK_THAT(g.magnitude.at(y, x),
                       Catch::Matchers::WithinRel(std::sqrt(ex * ex + ey * ey), 1e-6f));
        }
}

TEST_CASE("gradient invalidity propagation and degenerate size") {
    Plane<float> d(4, 4, 3.0f);
    DepthMap m = make_depth(d);
    m.valid.at(1, 1) = 0;
    const auto g = depth_gradient(m);
    CHECK(g.valid.at(1, 0) == 0);
    CHECK(g.valid.at(1, 2) == 0);
    CHECK(g.valid.at(0, 1) == 0);
    CHECK(g.valid.at(2, 1) == 0);
    CHECK(g.valid.at(3, 3) == 1);
    CHECK_THROWS_AS(depth_gradient(make_depth(Plane<float>(1, 4, 1.0f))), DegenerateSize);
}

TEST_CASE("warp with zero flow is the identity") {
    Plane<float> src(4, 6);
    for (size_t i = 0; i < src.v.size(); ++i) src.v[i] = static_cast<float>(i);
    FlowField flow{Plane<float>(4, 6, 0.0f), Plane<float>(4, 6, 0.0f)};
    for (double scale : {-1.0, 0.0, 0.7, 1.0}) {
        const auto out = warp_bilinear(src, flow, scale);
        for (size_t i = 0; i < src.v.size(); ++i) {
            CHECK(out.covered.v[i] == 1);
            CHECK(out.data.v[i] == src.v[i]);
        }
    }
}

TEST_CASE("integer flow shifts by one column and uncovers the border") {
    Plane<float> src(3, 4);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x) src.at(y, x) = static_cast<float>(10 * y + x);
    FlowField flow{Plane<float>(3, 4, 1.0f), Plane<float>(3, 4, 0.0f)};
    const auto out = warp_bilinear(src, flow, 1.0);
    for (int y = 0; y < 3; ++y) {
        CHECK(out.covered.at(y, 0) == 0);
        for (int x = 1; x < 4; ++x) {
            CHECK(out.covered.at(y, x) == 1);
            CHECK(out.data.at(y, x) == src.at(y, x - 1));
        }
    }
}

TEST_CASE("fractional flow interpolates midpoints") {
    Plane<float> src(1, 4);
    for (int x = 0; x < 4; ++x) src.at(0, x) = static_cast<float>(2 * x);
    FlowField flow{Plane<float>(1, 4, 0.5f), Plane<float>(1, 4, 0.0f)};
    const auto out = warp_bilinear(src, flow, 1.0);
    // sample at x - 0.5: midpoint of neighbors on a ramp
    CHECK(out.covered.at(0, 0) == 0);
    CHECK_THAT(out.data.at(0, 1), Catch::Matchers::WithinAbs(1.0, 1e-6));
    CHECK_THAT(out.data.at(0, 2), Catch::Matchers::WithinAbs(3.0, 1e-6));
    CHECK_THAT(out.data.at(0, 3), Catch::Matchers::WithinAbs(5.0, 1e-6));
}

TEST_CASE("warp is linear in src on covered pixels") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<float> ud(-2.0f, 2.0f);
    Plane<float> a(6, 6), b(6, 6);
    FlowField flow{Plane<float>(6, 6), Plane<float>(6, 6)};
    for (auto& v : a.v) v = ud(rng);
    for (auto& v : b.v) v = ud(rng);
    for (auto& v : flow.u.v) v = ud(rng);
    for (auto& v : flow.v.v) v = ud(rng);
    Plane<float> combo(6, 6);
    for (size_t i = 0; i < combo.v.size(); ++i) combo.v[i] = 2.0f * a.v[i] - 3.0f * b.v[i];
    const auto wa = warp_bilinear(a, flow, 0.8);
    const auto wb = warp_bilinear(b, flow, 0.8);
    const auto wc = warp_bilinear(combo, flow, 0.8);
    for (size_t i = 0; i < combo.v.size(); ++i)
        if (wc.covered.v[i])
            CHECK_THAT(wc.data.v[i],
                       Catch::Matchers::WithinAbs(2.0f * wa.data.v[i] - 3.0f * wb.data.v[i],
                                                  1e-5));
}

TEST_CASE("warp shape mismatch") {
    Plane<float> src(3, 3);
    FlowField flow{Plane<float>(4, 4), Plane<float>(4, 4)};
    CHECK_THROWS_AS(warp_bilinear(src, flow, 1.0), ShapeMismatch);
}

TEST_CASE("TNS1 container round-trips bit-exactly") {
    TensorFile t;
    t.dims = {2, 2};
    t.data = {0.0f, 1.0f, 2.0f, 3.0f};
    const std::string path = tmp_path("adae_t22.tns");
    save_tensor(path, t);
    const TensorFile r = load_tensor(path);
    REQUIRE(r.dims == t.dims);
    CHECK(r.data == t.data);

    TensorFile t3;
    t3.dims = {2, 3, 4};
    for (int i = 0; i < 24; ++i) t3.data.push_back(0.125f * i);
    save_tensor(path, t3);
    const TensorFile r3 = load_tensor(path);
    CHECK(r3.dims == t3.dims);
    CHECK(r3.data == t3.data);
    std::remove(path.c_str());
}

TEST_CASE("TNS1 error paths") {
    TensorFile t;
    t.dims = {2, 2, 2, 2};
    t.data.assign(16, 0.0f);
    std::ostringstream os;
    CHECK_THROWS_AS(write_tensor(os, t), RankUnsupported);

    std::istringstream bad("NOP");
    CHECK_THROWS_AS(read_tensor(bad), TruncatedFile);
    std::istringstream bad2("ABCD\x02");
    CHECK_THROWS_AS(read_tensor(bad2), BadMagic);
    // valid header, missing payload
    std::string buf = "TNS1";
    buf += '\x02';
    const uint32_t d = 4;
    buf.append(reinterpret_cast<const char*>(&d), 4);
    buf.append(reinterpret_cast<const char*>(&d), 4);
    std::istringstream trunc(buf);
    CHECK_THROWS_AS(read_tensor(trunc), TruncatedFile);
}

TEST_CASE("PFM and container agree on a depth map") {
    Plane<float> d(3, 3);
    for (size_t i = 0; i < d.v.size(); ++i) d.v[i] = 0.5f + 1.25f * static_cast<float>(i);
    const std::string pfm = tmp_path("adae_d33.pfm");
    save_pfm(pfm, d);
    const Plane<float> back = load_pfm(pfm);
    REQUIRE(back.h == 3);
    REQUIRE(back.w == 3);
    for (size_t i = 0; i < d.v.size(); ++i)
        CHECK_THAT(back.v[i], Catch::Matchers::WithinAbs(d.v[i], 1e-6));
    std::remove(pfm.c_str());
}

TEST_CASE("PGM round-trip within quantization") {
    Plane<float> im(4, 5);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> ud(0.0f, 1.0f);
    for (auto& v : im.v) v = ud(rng);
    const std::string path = tmp_path("adae_im.pgm");
    save_pgm(path, im);
    const Plane<float> back = load_pgm(path);
    for (size_t i = 0; i < im.v.size(); ++i)
        CHECK_THAT(back.v[i], Catch::Matchers::WithinAbs(im.v[i], 0.5 / 255.0 + 1e-6));
    std::remove(path.c_str());
}
