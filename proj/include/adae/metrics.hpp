#pragma once

#include <algorithm>
#include <optional>

#include "adae/common.hpp"
#include "adae/degrade.hpp"
#include "adae/imagery.hpp"

namespace adae::metrics {

inline double absrel(const img::DepthMap& pred, const img::DepthMap& gt,
                     const Plane<uint8_t>& mask) {
    if (!pred.data.same_shape(gt.data) || !pred.data.same_shape(mask))
        throw ShapeMismatch("absrel: shape mismatch");
    double acc = 0;
    size_t n = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask.v[i] || !gt.valid.v[i] || !pred.valid.v[i]) continue;
        acc += std::abs(static_cast<double>(pred.data.v[i]) - gt.data.v[i]) /
               static_cast<double>(gt.data.v[i]);
        ++n;
    }
    if (n == 0) throw EmptyMask("absrel: no pixels under mask");
    return acc / static_cast<double>(n);
}

/// Fraction of pixels with max(D/D*, D*/D) < 1.25^i.
inline double delta_acc(const img::DepthMap& pred, const img::DepthMap& gt,
                        const Plane<uint8_t>& mask, int i) {
    if (i < 1 || i > 3) throw Error("delta_acc: i must be 1, 2 or 3");
    if (!pred.data.same_shape(gt.data) || !pred.data.same_shape(mask))
        throw ShapeMismatch("delta_acc: shape mismatch");
    const double thresh = std::pow(1.25, i);
    size_t hits = 0, n = 0;
    for (size_t k = 0; k < mask.size(); ++k) {
        if (!mask.v[k] || !gt.valid.v[k] || !pred.valid.v[k]) continue;
        const double r = static_cast<double>(pred.data.v[k]) / gt.data.v[k];
        if (std::max(r, 1.0 / r) < thresh) ++hits;
        ++n;
    }
    if (n == 0) throw EmptyMask("delta_acc: no pixels under mask");
    return static_cast<double>(hits) / static_cast<double>(n);
}

/// Edge Gradient Error: mean relative gradient-magnitude error over pixels
/// whose GT gradient magnitude exceeds G. Undefined (NoEdges) when no pixel
/// passes the threshold.
inline double ege(const img::DepthMap& pred, const img::DepthMap& gt, double G) {
    if (!pred.data.same_shape(gt.data)) throw ShapeMismatch("ege: shape mismatch");
    const img::GradientMap gp = img::depth_gradient(pred);
    const img::GradientMap gg = img::depth_gradient(gt);
    double acc = 0;
    size_t n = 0;
    for (size_t i = 0; i < gg.magnitude.size(); ++i) {
        if (!gg.valid.v[i] || !gp.valid.v[i]) continue;
        const double mg = gg.magnitude.v[i];
        if (!(mg > G)) continue;
        acc += std::abs(gp.magnitude.v[i] - mg) / mg;
        ++n;
    }
    if (n == 0) throw NoEdges("ege: no GT gradient exceeds threshold");
    return acc / static_cast<double>(n);
}

inline double mae(const img::DepthMap& pred, const img::DepthMap& gt,
                  const Plane<uint8_t>& mask, double cap_m) {
    if (!pred.data.same_shape(gt.data) || !pred.data.same_shape(mask))
        throw ShapeMismatch("mae: shape mismatch");
    double acc = 0;
    size_t n = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask.v[i] || !gt.valid.v[i] || !pred.valid.v[i]) continue;
        if (gt.data.v[i] > cap_m) continue;
        acc += std::abs(static_cast<double>(pred.data.v[i]) - gt.data.v[i]);
        ++n;
    }
    if (n == 0) throw EmptyMask("mae: no pixels under capped mask");
    return acc / static_cast<double>(n);
}

struct RegionMetrics {
    double absrel = 0;
    double delta1 = 0, delta2 = 0, delta3 = 0;
    size_t pixels = 0;
};

struct EvalReport {
    std::optional<RegionMetrics> normal;
    std::optional<RegionMetrics> extreme;
    std::optional<double> ege;  // whole image; absent when no GT edge passes G
    std::optional<double> mae;
    size_t samples = 1;
};

/// Median-ratio scale alignment: pred * median(gt/pred) over valid pixels.
inline img::DepthMap median_align(const img::DepthMap& pred, const img::DepthMap& gt) {
    std::vector<double> ratios;
    for (size_t i = 0; i < pred.data.size(); ++i)
        if (pred.valid.v[i] && gt.valid.v[i])
            ratios.push_back(static_cast<double>(gt.data.v[i]) / pred.data.v[i]);
    if (ratios.empty()) throw EmptyMask("median_align: no jointly valid pixels");
    auto mid = ratios.begin() + static_cast<long>(ratios.size() / 2);
    std::nth_element(ratios.begin(), mid, ratios.end());
    const double s = *mid;
    img::DepthMap out = pred;
    for (auto& v : out.data.v) v = static_cast<float>(v * s);
    return out;
}

/// Per-region AbsRel/delta plus whole-image EGE, after median-scale
/// alignment of the prediction. An empty region is reported as absent.
inline EvalReport evaluate(const img::DepthMap& pred_raw, const img::DepthMap& gt,
                           const degrade::RegionPartition& partition, double G,
                           std::optional<double> mae_cap = std::nullopt) {
    if (!pred_raw.data.same_shape(gt.data)) throw ShapeMismatch("evaluate: shape mismatch");
    const img::DepthMap pred = median_align(pred_raw, gt);
    EvalReport rep;
    auto region = [&](const Plane<uint8_t>& mask) -> std::optional<RegionMetrics> {
        size_t n = 0;
        for (size_t i = 0; i < mask.size(); ++i)
            if (mask.v[i] && gt.valid.v[i] && pred.valid.v[i]) ++n;
        if (n == 0) return std::nullopt;
        RegionMetrics m;
        m.pixels = n;
        m.absrel = absrel(pred, gt, mask);
        m.delta1 = delta_acc(pred, gt, mask, 1);
        m.delta2 = delta_acc(pred, gt, mask, 2);
        m.delta3 = delta_acc(pred, gt, mask, 3);
        return m;
    };
    rep.normal = region(partition.normal_mask);
    rep.extreme = region(partition.extreme_mask);
    try {
        rep.ege = ege(pred, gt, G);
    } catch (const NoEdges&) {
        rep.ege = std::nullopt;
    }
    if (mae_cap) {
        Plane<uint8_t> all(gt.data.h, gt.data.w, 1);
        rep.mae = mae(pred, gt, all, *mae_cap);
    }
    return rep;
}

}  // namespace adae::metrics
