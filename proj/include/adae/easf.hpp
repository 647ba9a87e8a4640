#pragma once

#include <algorithm>
#include <cmath>

#include "adae/common.hpp"
#include "adae/evio.hpp"
#include "adae/imagery.hpp"

namespace adae::easf {

/// Patch-grid entropy map, values normalized to [0,1] by log2(bin count).
struct EntropyMap {
    Plane<float> data;  // h x w patch grid
    int patch_size = 0;
};

struct WeightMap {
    Plane<float> data;  // event weight per patch; frame weight is 1 - W
    float threshold_used = 0.0f;
};

namespace detail {

inline double hist_entropy(const std::vector<size_t>& hist, size_t total, int bins) {
    if (total == 0) return 0.0;
    double e = 0.0;
    for (size_t c : hist) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        e -= p * std::log2(p);
    }
    return e / std::log2(static_cast<double>(bins));
}

inline int bin_of(double v, int bins) {
    const int b = static_cast<int>(v * bins);
    return std::clamp(b, 0, bins - 1);
}

}  // namespace detail

/// Shannon entropy of the intensity histogram per patch. Edge patches may be
/// smaller than patch_size.
inline EntropyMap patch_entropy_frame(const img::Image& img, int patch_size, int bins) {
    if (bins < 2) throw BadBins("histogram bins must be >= 2");
    if (patch_size < 1) throw BadBins("patch size must be >= 1");
    const int H = img.h(), W = img.w();
    const int ph = (H + patch_size - 1) / patch_size;
    const int pw = (W + patch_size - 1) / patch_size;
    EntropyMap out;
    out.patch_size = patch_size;
    out.data = Plane<float>(ph, pw);
    std::vector<size_t> hist(static_cast<size_t>(bins));
    for (int py = 0; py < ph; ++py) {
        for (int px = 0; px < pw; ++px) {
            std::fill(hist.begin(), hist.end(), 0);
            size_t total = 0;
            const int y1 = std::min((py + 1) * patch_size, H);
            const int x1 = std::min((px + 1) * patch_size, W);
            for (int y = py * patch_size; y < y1; ++y)
                for (int x = px * patch_size; x < x1; ++x) {
                    ++hist[detail::bin_of(img.data.at(y, x), bins)];
                    ++total;
                }
            out.data.at(py, px) = static_cast<float>(detail::hist_entropy(hist, total, bins));
        }
    }
    return out;
}

/// Entropy of |V| within each patch, aggregated across all temporal bins.
/// |V| is normalized by the grid-wide max before histogramming; an all-zero
/// grid has entropy 0 everywhere.
inline EntropyMap patch_entropy_event(const evio::VoxelGrid& vox, int patch_size, int bins) {
    if (bins < 2) throw BadBins("histogram bins must be >= 2");
    if (patch_size < 1) throw BadBins("patch size must be >= 1");
    const int H = vox.h, W = vox.w;
    const int ph = (H + patch_size - 1) / patch_size;
    const int pw = (W + patch_size - 1) / patch_size;
    EntropyMap out;
    out.patch_size = patch_size;
    out.data = Plane<float>(ph, pw);
    double maxabs = 0.0;
    for (double v : vox.data) maxabs = std::max(maxabs, std::abs(v));
    if (maxabs == 0.0) return out;
    std::vector<size_t> hist(static_cast<size_t>(bins));
    for (int py = 0; py < ph; ++py) {
        for (int px = 0; px < pw; ++px) {
            std::fill(hist.begin(), hist.end(), 0);
            size_t total = 0;
            const int y1 = std::min((py + 1) * patch_size, H);
            const int x1 = std::min((px + 1) * patch_size, W);
            for (int b = 0; b < vox.bins; ++b)
                for (int y = py * patch_size; y < y1; ++y)
                    for (int x = px * patch_size; x < x1; ++x) {
                        ++hist[detail::bin_of(std::abs(vox.at(b, y, x)) / maxabs, bins)];
                        ++total;
                    }
            out.data.at(py, px) = static_cast<float>(detail::hist_entropy(hist, total, bins));
        }
    }
    return out;
}

/// Fusion weight per patch: W = E_e/(E_e+E_f) where the entropy sum clears
/// the threshold, 0.5 where both modalities are nearly uninformative.
inline WeightMap weight_map(const EntropyMap& e_event, const EntropyMap& e_frame, float T) {
    if (!e_event.data.same_shape(e_frame.data))
        throw ShapeMismatch("weight_map: entropy grids differ in shape");
    if (!(T > 0.0f && T <= 2.0f)) throw Error("weight_map: T must be in (0, 2]");
    WeightMap out;
    out.threshold_used = T;
    out.data = Plane<float>(e_event.data.h, e_event.data.w);
    for (size_t i = 0; i < out.data.size(); ++i) {
        const float ee = e_event.data.v[i], ef = e_frame.data.v[i];
        out.data.v[i] = (ee + ef >= T) ? ee / (ee + ef) : 0.5f;
    }
    return out;
}

/// Nearest-neighbor resample of a patch-grid map to a feature resolution.
inline Plane<float> resample_nearest(const Plane<float>& src, int h, int w) {
    Plane<float> out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int sy = std::min(static_cast<int>((y + 0.5) * src.h / h), src.h - 1);
            const int sx = std::min(static_cast<int>((x + 0.5) * src.w / w), src.w - 1);
            out.at(y, x) = src.at(sy, sx);
        }
    return out;
}

template <typename T>
struct SpatialLossResult {
    T loss = 0;
    Tensor3<T> grad_fused;  // dL/dF_fused
};

/// Cross-modal feature-selection loss. Per spatial location, S_e and S_f are
/// channel-axis cosine similarities between the fused features and each
/// modality; the loss is a W-weighted two-way cross entropy over the softmax
/// of {S_e, S_f}, averaged over locations. Natural log.
template <typename T>
SpatialLossResult<T> spatial_loss(const Tensor3<T>& fused, const Tensor3<T>& f_event,
                                  const Tensor3<T>& f_frame, const Plane<float>& weights) {
    if (!fused.same_shape(f_event) || !fused.same_shape(f_frame))
        throw ShapeMismatch("spatial_loss: feature maps differ in shape");
    const int C = fused.c, H = fused.h, W = fused.w;
    const Plane<float> wmap =
        (weights.h == H && weights.w == W) ? weights : resample_nearest(weights, H, W);
    SpatialLossResult<T> res;
    res.grad_fused = Tensor3<T>(C, H, W);
    const double inv_n = 1.0 / (static_cast<double>(H) * W);
    double total = 0.0;
    std::vector<double> u(C), e(C), f(C);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double nu = 0, ne = 0, nf = 0, de = 0, df = 0;
            for (int c = 0; c < C; ++c) {
                u[c] = fused.at(c, y, x);
                e[c] = f_event.at(c, y, x);
                f[c] = f_frame.at(c, y, x);
                nu += u[c] * u[c];
                ne += e[c] * e[c];
                nf += f[c] * f[c];
                de += u[c] * e[c];
                df += u[c] * f[c];
            }
            nu = std::sqrt(nu);
            ne = std::sqrt(ne);
            nf = std::sqrt(nf);
            if (nu < 1e-8 || ne < 1e-8 || nf < 1e-8)
                throw ZeroNorm("spatial_loss: feature vector norm below 1e-8");
            const double se = de / (nu * ne);
            const double sf = df / (nu * nf);
            const double wgt = wmap.at(y, x);
            // two-logit softmax, stabilized
            const double m = std::max(se, sf);
            const double lse = m + std::log(std::exp(se - m) + std::exp(sf - m));
            const double pe = std::exp(se - lse);
            const double pf = std::exp(sf - lse);
            total += -wgt * (se - lse) - (1.0 - wgt) * (sf - lse);
            // dL/dse = pe - W, dL/dsf = pf - (1-W); then cosine backward wrt u
            const double gse = (pe - wgt) * inv_n;
            const double gsf = (pf - (1.0 - wgt)) * inv_n;
            for (int c = 0; c < C; ++c) {
                const double dse_du = e[c] / (nu * ne) - se * u[c] / (nu * nu);
                const double dsf_du = f[c] / (nu * nf) - sf * u[c] / (nu * nu);
                res.grad_fused.at(c, y, x) = static_cast<T>(gse * dse_du + gsf * dsf_du);
            }
        }
    }
    res.loss = static_cast<T>(total * inv_n);
    return res;
}

}  // namespace adae::easf
