#pragma once

#include <random>

#include "adae/common.hpp"
#include "adae/degrade.hpp"
#include "adae/evio.hpp"
#include "adae/fusenet.hpp"
#include "adae/imagery.hpp"

// Procedural adverse-condition scenes: a shaded background plane plus a
// nearer rectangular object sweeping through the exposure. Frames are
// blurred over the exposure and contrast-stretched so one side of the image
// saturates; events are rendered from the clean sub-frame differences, so
// they keep structure where the frame clips.

namespace adae::synth {

struct SceneConfig {
    int h = 64, w = 64;
    int subframes = 8;
    uint64_t exposure_us = 100000;
    double contrast_thresh = 0.04;  // event trigger on clean intensity change
    int voxel_bins = 5;
    double alpha = 2.2;    // illumination stretch
    double offset = 0.15;  // brightness shift toward overexposure
    double illum_gain = 0.3;  // extra clean-side brightness on the right half
    double fg_depth = 3.0;
    double bg_depth_near = 6.0, bg_depth_far = 12.0;
    double speed_scale = 1.0;  // scales object motion, i.e. blur extent
};

namespace detail {

inline double texture(int x, int y) {
    return std::sin(2.0 * M_PI * x / 13.0) * std::sin(2.0 * M_PI * y / 11.0);
}

inline double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// soft-edged rectangle coverage, 1 px feather
inline double rect_coverage(double px, double py, double cx, double cy, double hw, double hh) {
    const double dx = hw - std::abs(px - cx);
    const double dy = hh - std::abs(py - cy);
    return smoothstep(dx + 0.5) * smoothstep(dy + 0.5);
}

}  // namespace detail

struct Scene {
    fuse::Sample sample;         // degraded frame + events + flow + gt + partition
    img::Image clean_mid;        // sharp mid-exposure frame (foundation training input)
    bool object_in_bright_half = false;
};

/// Render one scene. Object placement alternates between the normally lit
/// and the to-be-clipped half across seeds.
inline Scene make_scene(uint64_t seed, const SceneConfig& cfg = {}) {
    std::mt19937_64 rng(split_seed(seed, "synth-scene"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Scene out;
    out.object_in_bright_half = (seed % 2) == 1;
    const int H = cfg.h, W = cfg.w;

    // object geometry and motion (px over the whole exposure)
    const double hw = 5.0 + 3.0 * unit(rng);
    const double hh = 5.0 + 3.0 * unit(rng);
    const double cx = out.object_in_bright_half
                          ? W * (0.62 + 0.18 * unit(rng))
                          : W * (0.15 + 0.22 * unit(rng));
    const double cy = H * (0.25 + 0.5 * unit(rng));
    const double vx = cfg.speed_scale * (unit(rng) < 0.5 ? -1.0 : 1.0) * (2.0 + 2.0 * unit(rng));
    const double vy = cfg.speed_scale * (unit(rng) - 0.5) * 2.0;

    auto bg_depth = [&](int y) {
        return cfg.bg_depth_near + (cfg.bg_depth_far - cfg.bg_depth_near) * y / (H - 1.0);
    };
    auto illum = [&](int x) {
        return cfg.illum_gain * detail::smoothstep((x / (W - 1.0) - 0.45) / 0.1);
    };
    // shading tied to depth so intensity carries a depth cue where unclipped
    auto clean_at = [&](int x, int y, double t_frac) {  // t_frac in [-0.5, 0.5]
        const double cov = detail::rect_coverage(x, y, cx + vx * t_frac, cy + vy * t_frac, hw, hh);
        const double bg = 0.18 + 2.4 / bg_depth(y) + 0.06 * detail::texture(x, y);
        const double fg = 0.55 + 0.05 * detail::texture(x, y);
        return std::clamp((1.0 - cov) * bg + cov * fg + illum(x), 0.0, 1.0);
    };

    std::vector<img::Image> frames(cfg.subframes);
    for (int k = 0; k < cfg.subframes; ++k) {
        const double t_frac = (k + 0.5) / cfg.subframes - 0.5;
        frames[k].data = Plane<float>(H, W);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                frames[k].data.at(y, x) = static_cast<float>(clean_at(x, y, t_frac));
    }
    out.clean_mid = frames[cfg.subframes / 2];

    // events from clean sub-frame differences (HDR: fire even where the
    // degraded frame will clip)
    evio::EventStream stream;
    stream.width = W;
    stream.height = H;
    for (int k = 0; k + 1 < cfg.subframes; ++k) {
        const uint64_t t = (k + 1) * cfg.exposure_us / cfg.subframes;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double diff = frames[k + 1].data.at(y, x) - frames[k].data.at(y, x);
                const int n = std::min(3, static_cast<int>(std::abs(diff) / cfg.contrast_thresh));
                for (int i = 0; i < n; ++i)
                    stream.events.push_back({t, static_cast<uint16_t>(x),
                                             static_cast<uint16_t>(y),
                                             static_cast<int8_t>(diff > 0 ? 1 : -1)});
            }
    }
    out.sample.vox = evio::voxelize(stream, cfg.voxel_bins);

    degrade::DegradeRecipe recipe;
    recipe.alpha = cfg.alpha;
    recipe.offset = cfg.offset;
    recipe.blur_frames = cfg.subframes;
    recipe.seed = seed;
    auto pair = degrade::make_degraded_pair(frames, recipe);
    out.sample.frame = std::move(pair.degraded);
    out.sample.partition = std::move(pair.partition);

    // GT depth at mid-exposure object position
    Plane<float> d(H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double cov = detail::rect_coverage(x, y, cx, cy, hw, hh);
            d.at(y, x) = static_cast<float>(cov > 0.5 ? cfg.fg_depth : bg_depth(y));
        }
    out.sample.gt = img::make_depth(d);

    // flow: object displacement per unit normalized exposure (scale = +/-1
    // reaches the exposure ends from the mid-exposure reference)
    out.sample.flow.u = Plane<float>(H, W, 0.0f);
    out.sample.flow.v = Plane<float>(H, W, 0.0f);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (detail::rect_coverage(x, y, cx, cy, hw, hh) > 0.25) {
                out.sample.flow.u.at(y, x) = static_cast<float>(vx / 2.0);
                out.sample.flow.v.at(y, x) = static_cast<float>(vy / 2.0);
            }
    return out;
}

inline std::vector<Scene> make_dataset(uint64_t seed, int n, const SceneConfig& cfg = {}) {
    std::vector<Scene> scenes;
    scenes.reserve(n);
    for (int i = 0; i < n; ++i) scenes.push_back(make_scene(split_seed(seed, "scene") + i, cfg));
    return scenes;
}

inline std::vector<fuse::Sample> training_samples(const std::vector<Scene>& scenes) {
    std::vector<fuse::Sample> out;
    out.reserve(scenes.size());
    for (const auto& s : scenes) out.push_back(s.sample);
    return out;
}

/// Clean variants (sharp, unstretched frame) for the foundation stand-in.
inline std::vector<fuse::Sample> clean_samples(const std::vector<Scene>& scenes) {
    std::vector<fuse::Sample> out;
    out.reserve(scenes.size());
    for (const auto& s : scenes) {
        fuse::Sample c = s.sample;
        c.frame = s.clean_mid;
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace adae::synth
