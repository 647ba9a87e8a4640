#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace adae {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define ADAE_DEFINE_ERROR(Name)            \
    struct Name : ::adae::Error {          \
        using ::adae::Error::Error;        \
    }

ADAE_DEFINE_ERROR(MalformedRecord);
ADAE_DEFINE_ERROR(OutOfBounds);
ADAE_DEFINE_ERROR(BadPolarity);
ADAE_DEFINE_ERROR(ShapeMismatch);
ADAE_DEFINE_ERROR(BadMagic);
ADAE_DEFINE_ERROR(RankUnsupported);
ADAE_DEFINE_ERROR(TruncatedFile);
ADAE_DEFINE_ERROR(DegenerateSize);
ADAE_DEFINE_ERROR(BadBins);
ADAE_DEFINE_ERROR(ZeroNorm);
ADAE_DEFINE_ERROR(NoPositives);
ADAE_DEFINE_ERROR(BadTau);
ADAE_DEFINE_ERROR(ClassUnderflow);
ADAE_DEFINE_ERROR(BadAlpha);
ADAE_DEFINE_ERROR(EmptySequence);
ADAE_DEFINE_ERROR(NonPositiveDepth);
ADAE_DEFINE_ERROR(EmptyMask);
ADAE_DEFINE_ERROR(NonFinite);
ADAE_DEFINE_ERROR(NoEdges);
ADAE_DEFINE_ERROR(ManifestInvalid);
ADAE_DEFINE_ERROR(DivergedLoss);
ADAE_DEFINE_ERROR(IoError);

/// Row-major H x W plane of scalars. The basic 2-D container everything
/// else builds on.
template <typename T>
struct Plane {
    int h = 0;
    int w = 0;
    std::vector<T> v;

    Plane() = default;
    Plane(int h_, int w_, T fill = T{}) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

    T& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    const T& at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return v.size(); }
    template <typename U>
    bool same_shape(const Plane<U>& o) const { return h == o.h && w == o.w; }
};

/// C x H x W tensor (channel-major), used for feature maps and voxel grids.
template <typename T>
struct Tensor3 {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<T> v;

    Tensor3() = default;
    Tensor3(int c_, int h_, int w_, T fill = T{})
        : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, fill) {}

    T& at(int ch, int y, int x) { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
    const T& at(int ch, int y, int x) const { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
    size_t size() const { return v.size(); }
    bool same_shape(const Tensor3& o) const { return c == o.c && h == o.h && w == o.w; }
};

template <typename T>
bool all_finite(const std::vector<T>& v) {
    for (T x : v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

// Named-stream seed splitter: one master seed, independent substreams keyed
// by module/purpose name. FNV-1a over the name, mixed with the master via
// splitmix64 so adding a stream never perturbs another.
inline uint64_t split_seed(uint64_t master, const std::string& stream) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : stream) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    uint64_t z = master ^ h;
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace adae
