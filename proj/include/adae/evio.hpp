#pragma once

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "adae/common.hpp"

namespace adae::evio {

struct Event {
    uint64_t t = 0;  // microseconds
    uint16_t x = 0;
    uint16_t y = 0;
    int8_t p = 0;  // exactly -1 or +1 after validation
};

struct EventStream {
    std::vector<Event> events;
    int width = 0;
    int height = 0;
    size_t count() const { return events.size(); }
};

/// B x H x W signed voxel tensor. Double accumulators keep the grid
/// bit-reproducible under the fixed stream accumulation order.
struct VoxelGrid {
    int bins = 0;
    int h = 0;
    int w = 0;
    uint64_t t_start = 0;
    uint64_t t_end = 0;
    std::vector<double> data;  // bins * h * w, bin-major

    double& at(int b, int y, int x) { return data[(static_cast<size_t>(b) * h + y) * w + x]; }
    const double& at(int b, int y, int x) const {
        return data[(static_cast<size_t>(b) * h + y) * w + x];
    }
};

enum class Format { csv, packed_binary };

struct ParseOptions {
    bool zero_as_negative = false;  // remap on-disk p=0 to -1 instead of rejecting
};

namespace detail {

inline int8_t check_polarity(long long p, const ParseOptions& opt) {
    if (p == 1) return 1;
    if (p == -1) return -1;
    if (p == 0) {
        if (opt.zero_as_negative) return -1;
        throw BadPolarity("polarity 0 (pass zero-as-negative to remap to -1)");
    }
    throw BadPolarity("polarity must be -1, 0 or +1, got " + std::to_string(p));
}

inline void check_bounds(long long x, long long y, int width, int height) {
    if (x < 0 || y < 0 || x >= width || y >= height)
        throw OutOfBounds("event (" + std::to_string(x) + "," + std::to_string(y) +
                          ") outside " + std::to_string(width) + "x" + std::to_string(height));
}

inline long long parse_ll(std::string_view s, const char* what) {
    long long out = 0;
    const auto* b = s.data();
    const auto* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc{} || p != e)
        throw MalformedRecord(std::string("bad ") + what + " field: '" + std::string(s) + "'");
    return out;
}

inline void split_csv(std::string_view line, std::vector<std::string_view>& out) {
    out.clear();
    size_t start = 0;
    while (true) {
        const size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace detail

// CSV: header `width,height`, then one `t,x,y,p` record per line.
inline EventStream parse_events_csv(std::string_view text, const ParseOptions& opt = {}) {
    EventStream s;
    std::vector<std::string_view> fields;
    size_t pos = 0;
    bool have_header = false;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        detail::split_csv(line, fields);
        if (!have_header) {
            if (fields.size() != 2) throw MalformedRecord("header must be `width,height`");
            s.width = static_cast<int>(detail::parse_ll(fields[0], "width"));
            s.height = static_cast<int>(detail::parse_ll(fields[1], "height"));
            if (s.width <= 0 || s.height <= 0) throw MalformedRecord("non-positive resolution");
            have_header = true;
            continue;
        }
        if (fields.size() != 4) throw MalformedRecord("record must be `t,x,y,p`");
        const long long t = detail::parse_ll(fields[0], "t");
        const long long x = detail::parse_ll(fields[1], "x");
        const long long y = detail::parse_ll(fields[2], "y");
        const long long p = detail::parse_ll(fields[3], "p");
        if (t < 0) throw MalformedRecord("negative timestamp");
        detail::check_bounds(x, y, s.width, s.height);
        s.events.push_back({static_cast<uint64_t>(t), static_cast<uint16_t>(x),
                            static_cast<uint16_t>(y), detail::check_polarity(p, opt)});
    }
    if (!have_header) throw MalformedRecord("missing `width,height` header");
    return s;
}

// Packed binary: magic `EVT1`, u32 width, u32 height, u64 count,
// then count x (u64 t, u16 x, u16 y, i8 p), little-endian.
inline EventStream parse_events_binary(const std::string& bytes, const ParseOptions& opt = {}) {
    EventStream s;
    const size_t header = 4 + 4 + 4 + 8;
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "EVT1", 4) != 0)
        throw BadMagic("EVT1: bad magic");
    if (bytes.size() < header) throw TruncatedFile("EVT1: file shorter than header");
    uint32_t w, h;
    uint64_t count;
    std::memcpy(&w, bytes.data() + 4, 4);
    std::memcpy(&h, bytes.data() + 8, 4);
    std::memcpy(&count, bytes.data() + 12, 8);
    s.width = static_cast<int>(w);
    s.height = static_cast<int>(h);
    const size_t record = 8 + 2 + 2 + 1;
    if (bytes.size() < header + count * record) throw TruncatedFile("EVT1: truncated records");
    s.events.reserve(count);
    const char* p = bytes.data() + header;
    for (uint64_t i = 0; i < count; ++i, p += record) {
        Event e;
        std::memcpy(&e.t, p, 8);
        std::memcpy(&e.x, p + 8, 2);
        std::memcpy(&e.y, p + 10, 2);
        int8_t pol;
        std::memcpy(&pol, p + 12, 1);
        detail::check_bounds(e.x, e.y, s.width, s.height);
        e.p = detail::check_polarity(pol, opt);
        s.events.push_back(e);
    }
    return s;
}

inline std::string serialize_events_binary(const EventStream& s) {
    std::string out;
    out.reserve(16 + s.count() * 13);
    out.append("EVT1", 4);
    const uint32_t w = static_cast<uint32_t>(s.width), h = static_cast<uint32_t>(s.height);
    const uint64_t n = s.count();
    out.append(reinterpret_cast<const char*>(&w), 4);
    out.append(reinterpret_cast<const char*>(&h), 4);
    out.append(reinterpret_cast<const char*>(&n), 8);
    for (const Event& e : s.events) {
        out.append(reinterpret_cast<const char*>(&e.t), 8);
        out.append(reinterpret_cast<const char*>(&e.x), 2);
        out.append(reinterpret_cast<const char*>(&e.y), 2);
        out.append(reinterpret_cast<const char*>(&e.p), 1);
    }
    return out;
}

/// Parse, validate and time-sort. Already-sorted input is preserved verbatim
/// (stable sort keeps same-timestamp order).
inline EventStream parse_events(const std::string& bytes, Format format,
                                const ParseOptions& opt = {}) {
    EventStream s = (format == Format::csv) ? parse_events_csv(bytes, opt)
                                            : parse_events_binary(bytes, opt);
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return s;
}

/// Normalized timestamps t* = (B-1)(t_i - t_1)/(t_N - t_1), each in [0, B-1].
/// Degenerate window (t_N == t_1, including N == 1): all t* = 0.
inline std::vector<double> normalize_timestamps(const EventStream& s, int bins) {
    if (s.count() < 1) throw EmptySequence("normalize_timestamps: empty stream");
    if (bins < 1) throw BadBins("bin count must be >= 1");
    const uint64_t t1 = s.events.front().t, tN = s.events.back().t;
    std::vector<double> out(s.count(), 0.0);
    if (tN == t1) return out;
    const double span = static_cast<double>(tN - t1);
    for (size_t i = 0; i < s.count(); ++i)
        out[i] = (bins - 1) * static_cast<double>(s.events[i].t - t1) / span;
    return out;
}

/// Voxelization: each event deposits its polarity at its pixel, split
/// bilinearly between the two temporal bins neighboring t*. Accumulation
/// follows stream order.
inline VoxelGrid voxelize(const EventStream& s, int bins) {
    if (bins < 1) throw BadBins("bin count must be >= 1");
    if (s.width <= 0 || s.height <= 0) throw ShapeMismatch("voxelize: stream resolution unset");
    VoxelGrid g;
    g.bins = bins;
    g.h = s.height;
    g.w = s.width;
    g.data.assign(static_cast<size_t>(bins) * s.height * s.width, 0.0);
    if (s.count() == 0) return g;
    g.t_start = s.events.front().t;
    g.t_end = s.events.back().t;
    const std::vector<double> ts = normalize_timestamps(s, bins);
    for (size_t i = 0; i < s.count(); ++i) {
        const Event& e = s.events[i];
        const double tstar = ts[i];
        const int b0 = std::min(static_cast<int>(std::floor(tstar)), bins - 1);
        const double w1 = tstar - b0;  // weight of the upper bin
        g.at(b0, e.y, e.x) += e.p * (1.0 - w1);
        if (w1 > 0.0 && b0 + 1 < bins) g.at(b0 + 1, e.y, e.x) += e.p * w1;
    }
    return g;
}

inline double signed_mass(const VoxelGrid& g) {
    double s = 0.0;
    for (double v : g.data) s += v;
    return s;
}

}  // namespace adae::evio
