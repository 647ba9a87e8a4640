#pragma once

#include <algorithm>

#include "adae/common.hpp"
#include "adae/imagery.hpp"

namespace adae::degrade {

struct DegradeRecipe {
    double alpha = 1.0;   // contrast stretch factor, > 0
    double offset = 0.0;  // brightness shift in [-0.5, 0.5]; 0 keeps the pure stretch
    int blur_frames = 1;  // exposure averaging window K >= 1
    uint64_t seed = 0;
};

/// Extreme vs normal illumination split. A pixel is extreme when the stretch
/// clipped it or left it within 1/255 of the range ends.
struct RegionPartition {
    Plane<uint8_t> extreme_mask;
    Plane<uint8_t> normal_mask;
};

struct StretchResult {
    img::Image image;
    RegionPartition partition;
};

inline StretchResult stretch_illumination(const img::Image& in, double alpha,
                                          double offset = 0.0) {
    if (!(alpha > 0)) throw BadAlpha("stretch factor must be > 0");
    const int H = in.h(), W = in.w();
    StretchResult out;
    out.image.data = Plane<float>(H, W);
    out.partition.extreme_mask = Plane<uint8_t>(H, W, 0);
    out.partition.normal_mask = Plane<uint8_t>(H, W, 1);
    constexpr double kEdge = 1.0 / 255.0;
    for (size_t i = 0; i < in.data.size(); ++i) {
        const double raw = 0.5 + offset + alpha * (in.data.v[i] - 0.5);
        const double clipped = std::clamp(raw, 0.0, 1.0);
        out.image.data.v[i] = static_cast<float>(clipped);
        if (raw != clipped || clipped <= kEdge || clipped >= 1.0 - kEdge) {
            out.partition.extreme_mask.v[i] = 1;
            out.partition.normal_mask.v[i] = 0;
        }
    }
    return out;
}

/// Pixelwise mean over the exposure window.
inline img::Image synthesize_blur(const std::vector<img::Image>& frames) {
    if (frames.empty()) throw EmptySequence("synthesize_blur: no frames");
    const int H = frames[0].h(), W = frames[0].w();
    for (const auto& f : frames)
        if (f.h() != H || f.w() != W) throw ShapeMismatch("synthesize_blur: frame shapes differ");
    img::Image out;
    out.data = Plane<float>(H, W);
    const double inv_k = 1.0 / static_cast<double>(frames.size());
    for (size_t i = 0; i < out.data.size(); ++i) {
        double acc = 0;
        for (const auto& f : frames) acc += f.data.v[i];
        out.data.v[i] = static_cast<float>(acc * inv_k);
    }
    return out;
}

struct DegradedPair {
    img::Image degraded;
    img::Image clean;  // reference (sharp mid-exposure frame)
    RegionPartition partition;
    double clipped_fraction = 0.0;
};

/// Blur over the exposure first, then illumination stretch.
inline DegradedPair make_degraded_pair(const std::vector<img::Image>& clean_frames,
                                       const DegradeRecipe& recipe) {
    if (clean_frames.empty()) throw EmptySequence("make_degraded_pair: no frames");
    const size_t k = std::min<size_t>(static_cast<size_t>(recipe.blur_frames),
                                      clean_frames.size());
    // centered exposure window, so the clean mid-exposure reference stays aligned
    const size_t start = (clean_frames.size() - k) / 2;
    std::vector<img::Image> window(clean_frames.begin() + static_cast<long>(start),
                                   clean_frames.begin() + static_cast<long>(start + k));
    DegradedPair out;
    out.clean = clean_frames[clean_frames.size() / 2];
    img::Image blurred = synthesize_blur(window);
    StretchResult s = stretch_illumination(blurred, recipe.alpha, recipe.offset);
    out.degraded = std::move(s.image);
    out.partition = std::move(s.partition);
    size_t clipped = 0;
    for (uint8_t m : out.partition.extreme_mask.v) clipped += m;
    out.clipped_fraction =
        static_cast<double>(clipped) / static_cast<double>(out.partition.extreme_mask.size());
    return out;
}

}  // namespace adae::degrade
