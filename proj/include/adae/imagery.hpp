#pragma once

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <utility>

#include "adae/common.hpp"

namespace adae::img {

/// Grayscale intensity image, values in [0,1].
struct Image {
    Plane<float> data;
    int h() const { return data.h; }
    int w() const { return data.w; }
};

/// Depth in meters (or relative units). Valid pixels are > 0 and finite.
struct DepthMap {
    Plane<float> data;
    Plane<uint8_t> valid;
    int h() const { return data.h; }
    int w() const { return data.w; }
};

/// Pixel displacement per unit normalized exposure time.
struct FlowField {
    Plane<float> u;
    Plane<float> v;
    int h() const { return u.h; }
    int w() const { return u.w; }
};

struct GradientMap {
    Plane<float> gx;
    Plane<float> gy;
    Plane<float> magnitude;
    Plane<uint8_t> valid;  // gradient touched only valid depth samples
};

inline DepthMap make_depth(const Plane<float>& d) {
    DepthMap m;
    m.data = d;
    m.valid = Plane<uint8_t>(d.h, d.w, 1);
    for (size_t i = 0; i < d.v.size(); ++i)
        if (!(d.v[i] > 0.0f) || !std::isfinite(d.v[i])) m.valid.v[i] = 0;
    return m;
}

// -------------------------------------------------------------------------
// Spatial gradients: central differences in the interior, one-sided at the
// borders. Exact on affine fields. Invalid depth samples invalidate every
// gradient that touches them.
// -------------------------------------------------------------------------
inline GradientMap depth_gradient(const DepthMap& d) {
    const int h = d.h(), w = d.w();
    if (h < 2 || w < 2) throw DegenerateSize("depth_gradient: need H,W >= 2");
    GradientMap g;
    g.gx = Plane<float>(h, w);
    g.gy = Plane<float>(h, w);
    g.magnitude = Plane<float>(h, w);
    g.valid = Plane<uint8_t>(h, w, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(x - 1, 0), x1 = std::min(x + 1, w - 1);
            const int y0 = std::max(y - 1, 0), y1 = std::min(y + 1, h - 1);
            const bool ok = d.valid.at(y, x0) && d.valid.at(y, x1) && d.valid.at(y0, x) &&
                            d.valid.at(y1, x);
            if (!ok) {
                g.valid.at(y, x) = 0;
                continue;
            }
            const float gx = (d.data.at(y, x1) - d.data.at(y, x0)) / static_cast<float>(x1 - x0);
            const float gy = (d.data.at(y1, x) - d.data.at(y0, x)) / static_cast<float>(y1 - y0);
            g.gx.at(y, x) = gx;
            g.gy.at(y, x) = gy;
            g.magnitude.at(y, x) = std::sqrt(gx * gx + gy * gy);
        }
    }
    return g;
}

// -------------------------------------------------------------------------
// Backward bilinear warp: output(x,y) samples src at (x - scale*u, y - scale*v).
// Samples whose 2x2 support leaves the frame are marked uncovered.
// -------------------------------------------------------------------------
template <typename T>
struct Warped {
    Plane<T> data;
    Plane<uint8_t> covered;
};

template <typename T>
Warped<T> warp_bilinear(const Plane<T>& src, const FlowField& flow, double scale) {
    if (src.h != flow.h() || src.w != flow.w())
        throw ShapeMismatch("warp_bilinear: src and flow resolution differ");
    const int h = src.h, w = src.w;
    Warped<T> out;
    out.data = Plane<T>(h, w);
    out.covered = Plane<uint8_t>(h, w, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double sx = x - scale * flow.u.at(y, x);
            const double sy = y - scale * flow.v.at(y, x);
            if (sx < 0 || sy < 0 || sx > w - 1 || sy > h - 1) continue;
            const int x0 = std::min(static_cast<int>(std::floor(sx)), std::max(w - 2, 0));
            const int y0 = std::min(static_cast<int>(std::floor(sy)), std::max(h - 2, 0));
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double fx = sx - x0, fy = sy - y0;
            const double v00 = src.at(y0, x0), v01 = src.at(y0, x1);
            const double v10 = src.at(y1, x0), v11 = src.at(y1, x1);
            const double val = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                               fy * ((1 - fx) * v10 + fx * v11);
            out.data.at(y, x) = static_cast<T>(val);
            out.covered.at(y, x) = 1;
        }
    }
    return out;
}

// -------------------------------------------------------------------------
// `TNS1` float-tensor container: magic, u8 rank (2 or 3), u32 dims,
// float32 row-major, little-endian.
// -------------------------------------------------------------------------
struct TensorFile {
    std::vector<uint32_t> dims;  // rank 2: {h,w}; rank 3: {c,h,w}
    std::vector<float> data;
};

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void get_bytes(std::istream& is, void* p, size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is.gcount()) != n) throw TruncatedFile("TNS1: unexpected EOF");
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const TensorFile& t) {
    if (t.dims.size() != 2 && t.dims.size() != 3)
        throw RankUnsupported("TNS1: rank must be 2 or 3");
    size_t n = 1;
    for (uint32_t d : t.dims) n *= d;
    if (n != t.data.size()) throw ShapeMismatch("TNS1: dims do not match data length");
    os.write("TNS1", 4);
    const uint8_t rank = static_cast<uint8_t>(t.dims.size());
    detail::put_bytes(os, &rank, 1);
    for (uint32_t d : t.dims) detail::put_bytes(os, &d, 4);
    detail::put_bytes(os, t.data.data(), t.data.size() * sizeof(float));
}

inline TensorFile read_tensor(std::istream& is) {
    char magic[4];
    detail::get_bytes(is, magic, 4);
    if (std::memcmp(magic, "TNS1", 4) != 0) throw BadMagic("TNS1: bad magic");
    uint8_t rank = 0;
    detail::get_bytes(is, &rank, 1);
    if (rank != 2 && rank != 3) throw RankUnsupported("TNS1: rank must be 2 or 3");
    TensorFile t;
    t.dims.resize(rank);
    size_t n = 1;
    for (auto& d : t.dims) {
        detail::get_bytes(is, &d, 4);
        n *= d;
    }
    t.data.resize(n);
    if (n) detail::get_bytes(is, t.data.data(), n * sizeof(float));
    return t;
}

inline void save_tensor(const std::string& path, const TensorFile& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    write_tensor(f, t);
}

inline TensorFile load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    return read_tensor(f);
}

inline TensorFile to_tensor(const Plane<float>& p) {
    TensorFile t;
    t.dims = {static_cast<uint32_t>(p.h), static_cast<uint32_t>(p.w)};
    t.data = p.v;
    return t;
}

inline TensorFile to_tensor(const Tensor3<float>& p) {
    TensorFile t;
    t.dims = {static_cast<uint32_t>(p.c), static_cast<uint32_t>(p.h),
              static_cast<uint32_t>(p.w)};
    t.data = p.v;
    return t;
}

inline Plane<float> to_plane(const TensorFile& t) {
    if (t.dims.size() != 2) throw RankUnsupported("expected rank-2 tensor");
    Plane<float> p(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    p.v = t.data;
    return p;
}

inline Tensor3<float> to_tensor3(const TensorFile& t) {
    if (t.dims.size() != 3) throw RankUnsupported("expected rank-3 tensor");
    Tensor3<float> p(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                     static_cast<int>(t.dims[2]));
    p.v = t.data;
    return p;
}

// -------------------------------------------------------------------------
// PGM (P5, 8-bit) and PFM (Pf, float32) interop.
// -------------------------------------------------------------------------
inline void save_pgm(const std::string& path, const Plane<float>& p) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P5\n" << p.w << " " << p.h << "\n255\n";
    for (float x : p.v) {
        const int q = static_cast<int>(std::lround(std::clamp(x, 0.0f, 1.0f) * 255.0f));
        const uint8_t b = static_cast<uint8_t>(q);
        f.write(reinterpret_cast<const char*>(&b), 1);
    }
}

inline void save_pgm_raw(const std::string& path, const Plane<uint8_t>& p) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P5\n" << p.w << " " << p.h << "\n255\n";
    f.write(reinterpret_cast<const char*>(p.v.data()), static_cast<std::streamsize>(p.v.size()));
}

inline Plane<float> load_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw BadMagic("PGM: expected P5");
    int w, h, maxv;
    f >> w >> h >> maxv;
    f.get();  // single whitespace after maxval
    if (maxv != 255) throw MalformedRecord("PGM: only 8-bit supported");
    Plane<float> p(h, w);
    std::vector<uint8_t> buf(p.size());
    detail::get_bytes(f, buf.data(), buf.size());
    for (size_t i = 0; i < buf.size(); ++i) p.v[i] = buf[i] / 255.0f;
    return p;
}

// PFM rows are stored bottom-to-top; a negative scale marks little-endian.
inline void save_pfm(const std::string& path, const Plane<float>& p) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "Pf\n" << p.w << " " << p.h << "\n-1.0\n";
    for (int y = p.h - 1; y >= 0; --y)
        f.write(reinterpret_cast<const char*>(&p.at(y, 0)),
                static_cast<std::streamsize>(p.w * sizeof(float)));
}

inline Plane<float> load_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string magic;
    f >> magic;
    if (magic != "Pf") throw BadMagic("PFM: expected grayscale Pf");
    int w, h;
    double scale;
    f >> w >> h >> scale;
    f.get();
    Plane<float> p(h, w);
    for (int y = h - 1; y >= 0; --y)
        detail::get_bytes(f, &p.at(y, 0), static_cast<size_t>(w) * sizeof(float));
    if (scale > 0)  // big-endian file
        for (auto& x : p.v) {
            uint32_t u;
            std::memcpy(&u, &x, 4);
            u = __builtin_bswap32(u);
            std::memcpy(&x, &u, 4);
        }
    return p;
}

}  // namespace adae::img
