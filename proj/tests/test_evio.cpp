#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "adae/evio.hpp"

using namespace adae;
using namespace adae::evio;

namespace {

// Naive per-(event, bin) oracle applying the voxel formula literally.
VoxelGrid voxelize_oracle(const EventStream& s, int bins) {
    VoxelGrid g;
    g.bins = bins;
    g.h = s.height;
    g.w = s.width;
    g.data.assign(static_cast<size_t>(bins) * s.height * s.width, 0.0);
    if (s.count() == 0) return g;
    const auto ts = normalize_timestamps(s, bins);
    for (int b = 0; b < bins; ++b)
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                double acc = 0;
                for (size_t i = 0; i < s.count(); ++i) {
                    const Event& e = s.events[i];
                    if (e.x != x || e.y != y) continue;
                    acc += e.p * std::max(0.0, 1.0 - std::abs(b - ts[i]));
                }
                g.at(b, y, x) = acc;
            }
    return g;
}

EventStream random_stream(std::mt19937_64& rng, int max_n = 200, int max_hw = 16) {
    EventStream s;
    std::uniform_int_distribution<int> nd(0, max_n);
    std::uniform_int_distribution<int> wh(2, max_hw);
    s.width = wh(rng);
    s.height = wh(rng);
    const int n = nd(rng);
    std::uniform_int_distribution<int> xd(0, s.width - 1), yd(0, s.height - 1);
    std::uniform_int_distribution<uint64_t> td(0, 1000);
    for (int i = 0; i < n; ++i)
        s.events.push_back({td(rng), static_cast<uint16_t>(xd(rng)),
                            static_cast<uint16_t>(yd(rng)),
                            static_cast<int8_t>(rng() % 2 ? 1 : -1)});
    std::sort(s.events.begin(), s.events.end(),
              [](const Event& a, const Event& b) { return a.t < b.t; });
    return s;
}

}  // namespace

TEST_CASE("csv parsing maps fields directly") {
    const auto s = parse_events("640,480\n3,100,50,1\n7,101,50,-1\n", Format::csv);
    REQUIRE(s.count() == 2);
    CHECK(s.width == 640);
    CHECK(s.height == 480);
    CHECK(s.events[0].t == 3);
    CHECK(s.events[0].x == 100);
    CHECK(s.events[0].p == 1);
    CHECK(s.events[1].t == 7);
    CHECK(s.events[1].p == -1);
}

TEST_CASE("empty body with valid header gives empty stream") {
    const auto s = parse_events("640,480\n", Format::csv);
    CHECK(s.count() == 0);
    CHECK(s.width == 640);
}

TEST_CASE("csv error paths") {
    CHECK_THROWS_AS(parse_events("640,480\n3,700,50,1\n", Format::csv), OutOfBounds);
    CHECK_THROWS_AS(parse_events("640,480\n3,10,50,2\n", Format::csv), BadPolarity);
    CHECK_THROWS_AS(parse_events("640,480\n3,10,50\n", Format::csv), MalformedRecord);
    CHECK_THROWS_AS(parse_events("640,480\n3,ten,50,1\n", Format::csv), MalformedRecord);
    CHECK_THROWS_AS(parse_events("3,10,50,1\n", Format::csv), MalformedRecord);
}

TEST_CASE("zero polarity remapped only under flag") {
    CHECK_THROWS_AS(parse_events("8,8\n3,1,1,0\n", Format::csv), BadPolarity);
    ParseOptions opt;
    opt.zero_as_negative = true;
    const auto s = parse_events("8,8\n3,1,1,0\n", Format::csv, opt);
    REQUIRE(s.count() == 1);
    CHECK(s.events[0].p == -1);
}

TEST_CASE("unsorted input is time-sorted, sorted input preserved") {
    const auto s = parse_events("8,8\n7,1,1,1\n3,2,2,-1\n", Format::csv);
    CHECK(s.events[0].t == 3);
    CHECK(s.events[1].t == 7);
}

TEST_CASE("packed binary round-trip is bit-exact") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const EventStream s = random_stream(rng);
        const std::string bytes = serialize_events_binary(s);
        const EventStream r = parse_events(bytes, Format::packed_binary);
        REQUIRE(r.count() == s.count());
        CHECK(r.width == s.width);
        CHECK(r.height == s.height);
        for (size_t i = 0; i < s.count(); ++i) {
            CHECK(r.events[i].t == s.events[i].t);
            CHECK(r.events[i].x == s.events[i].x);
            CHECK(r.events[i].y == s.events[i].y);
            CHECK(r.events[i].p == s.events[i].p);
        }
    }
}

TEST_CASE("binary format error paths") {
    CHECK_THROWS_AS(parse_events("EVT", Format::packed_binary), TruncatedFile);
    CHECK_THROWS_AS(parse_events(std::string(16, 'X'), Format::packed_binary), BadMagic);
    EventStream s;
    s.width = 4;
    s.height = 4;
    s.events.push_back({1, 0, 0, 1});
    std::string bytes = serialize_events_binary(s);
    bytes.pop_back();
    CHECK_THROWS_AS(parse_events(bytes, Format::packed_binary), TruncatedFile);
}

TEST_CASE("timestamp normalization") {
    EventStream s;
    s.width = s.height = 8;
    SECTION("even spacing lands on bin centers") {
        for (uint64_t t : {0ull, 50ull, 100ull}) s.events.push_back({t, 0, 0, 1});
        const auto ts = normalize_timestamps(s, 3);
        CHECK(ts[0] == 0.0);
        CHECK(ts[1] == 1.0);
        CHECK(ts[2] == 2.0);
    }
    SECTION("single event maps to zero") {
        s.events.push_back({77, 0, 0, 1});
        const auto ts = normalize_timestamps(s, 5);
        CHECK(ts[0] == 0.0);
    }
    SECTION("hand-evaluated fractional case") {
        for (uint64_t t : {10ull, 20ull, 40ull}) s.events.push_back({t, 0, 0, 1});
        const auto ts = normalize_timestamps(s, 2);
        CHECK(ts[0] == 0.0);
        CHECK_THAT(ts[1], Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
        CHECK(ts[2] == 1.0);
    }
    SECTION("degenerate window: identical timestamps all map to zero") {
        for (int i = 0; i < 3; ++i) s.events.push_back({42, 0, 0, 1});
        for (double t : normalize_timestamps(s, 4)) CHECK(t == 0.0);
    }
}

TEST_CASE("voxelize: events on bin centers") {
    EventStream s;
    s.width = s.height = 4;
    s.events.push_back({0, 2, 1, 1});
    s.events.push_back({100, 2, 1, -1});
    const VoxelGrid g = voxelize(s, 2);
    CHECK(g.at(0, 1, 2) == 1.0);
    CHECK(g.at(1, 1, 2) == -1.0);
    double other = 0;
    for (double v : g.data) other += std::abs(v);
    CHECK(other == 2.0);
}

TEST_CASE("voxelize: empty stream gives all-zero grid") {
    EventStream s;
    s.width = s.height = 4;
    const VoxelGrid g = voxelize(s, 3);
    for (double v : g.data) CHECK(v == 0.0);
}

TEST_CASE("voxelize: bilinear split between neighboring bins") {
    EventStream s;
    s.width = s.height = 4;
    s.events.push_back({0, 1, 1, 1});
    s.events.push_back({30, 1, 1, 1});
    s.events.push_back({100, 1, 1, 1});
    const VoxelGrid g = voxelize(s, 3);
    // middle event: t* = 0.6 -> bin0 += 0.4, bin1 += 0.6
    CHECK_THAT(g.at(0, 1, 1), Catch::Matchers::WithinAbs(1.4, 1e-12));
    CHECK_THAT(g.at(1, 1, 1), Catch::Matchers::WithinAbs(0.6, 1e-12));
    CHECK_THAT(g.at(2, 1, 1), Catch::Matchers::WithinAbs(1.0, 1e-12));
    const VoxelGrid o = voxelize_oracle(s, 3);
    for (size_t i = 0; i < g.data.size(); ++i)
        CHECK_THAT(g.data[i], Catch::Matchers::WithinAbs(o.data[i], 1e-12));
}

TEST_CASE("voxelize matches the naive oracle on random streams") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> bd(1, 8);
    for (int trial = 0; trial < 50; ++trial) {
        const EventStream s = random_stream(rng);
        const int bins = bd(rng);
        const VoxelGrid g = voxelize(s, bins);
        const VoxelGrid o = voxelize_oracle(s, bins);
        REQUIRE(g.data.size() == o.data.size());
        for (size_t i = 0; i < g.data.size(); ++i)
            REQUIRE_THAT(g.data[i], Catch::Matchers::WithinAbs(o.data[i], 1e-6));
    }
}

TEST_CASE("mass conservation and per-event locality") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        EventStream s = random_stream(rng);
        if (s.count() == 0) continue;
        const int bins = 1 + static_cast<int>(rng() % 8);
        const VoxelGrid g = voxelize(s, bins);
        double mass = 0;
        for (double v : g.data) mass += v;
        double pol = 0;
        for (const Event& e : s.events) pol += e.p;
        CHECK_THAT(mass, Catch::Matchers::WithinAbs(pol, 1e-9));
    }
    // one event touches exactly one pixel and at most two bins
    EventStream s;
    s.width = s.height = 8;
    s.events.push_back({0, 3, 4, 1});
    s.events.push_back({10, 3, 4, 1});
    s.events.push_back({100, 5, 5, 1});
    const VoxelGrid g = voxelize(s, 5);
    int touched = 0;
    for (double v : g.data)
        if (v != 0.0) ++touched;
    CHECK(touched <= 2 * 3);
}

TEST_CASE("permutation invariance for same-timestamp events") {
    EventStream a;
    a.width = a.height = 8;
    a.events = {{0, 1, 1, 1}, {50, 2, 2, -1}, {50, 3, 3, 1}, {100, 4, 4, 1}};
    EventStream b = a;
    std::swap(b.events[1], b.events[2]);
    const VoxelGrid ga = voxelize(a, 4), gb = voxelize(b, 4);
    for (size_t i = 0; i < ga.data.size(); ++i) CHECK(ga.data[i] == gb.data[i]);
}
