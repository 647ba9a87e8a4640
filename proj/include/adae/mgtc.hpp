#pragma once

#include <algorithm>
#include <random>

#include "adae/common.hpp"
#include "adae/imagery.hpp"

namespace adae::mgtc {

enum class Label : uint8_t { background = 0, ignore = 1, foreground = 2 };

struct RegionLabels {
    Plane<uint8_t> labels;     // Label values
    Plane<uint8_t> blur_band;  // union of warped edge masks, dilated 1 px
    bool empty_edges = false;  // no pixel cleared the edge threshold
};

namespace detail {

// Otsu threshold over the given values (256-bin histogram on their range).
inline double otsu_threshold(const std::vector<float>& vals) {
    const auto [mn_it, mx_it] = std::minmax_element(vals.begin(), vals.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx <= mn) return mn;
    constexpr int kBins = 256;
    std::vector<size_t> hist(kBins, 0);
    for (float v : vals) {
        int b = static_cast<int>((v - mn) / (mx - mn) * kBins);
        hist[std::clamp(b, 0, kBins - 1)]++;
    }
    const double total = static_cast<double>(vals.size());
    double sum_all = 0;
    for (int b = 0; b < kBins; ++b) sum_all += b * static_cast<double>(hist[b]);
    double w0 = 0, sum0 = 0, best = -1;
    int best_bin = 0;
    for (int b = 0; b < kBins - 1; ++b) {
        w0 += static_cast<double>(hist[b]);
        if (w0 == 0) continue;
        const double w1 = total - w0;
        if (w1 == 0) break;
        sum0 += b * static_cast<double>(hist[b]);
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_bin = b;
        }
    }
    return mn + (best_bin + 0.5) * (mx - mn) / kBins;
}

inline Plane<uint8_t> dilate_1px(const Plane<uint8_t>& m) {
    Plane<uint8_t> out(m.h, m.w, 0);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            if (!m.at(y, x)) continue;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < m.h && xx >= 0 && xx < m.w) out.at(yy, xx) = 1;
                }
        }
    return out;
}

}  // namespace detail

/// Flow-warped edge localization. Depth edges (|grad D| above threshold) are
/// swept through the exposure by warping the edge mask to each timestamp;
/// the dilated union forms the blur band. Inside the band, Otsu on GT depth
/// splits near (foreground) from far (background); invalid depth -> ignore.
inline RegionLabels localize_regions(const img::DepthMap& d_gt, const img::FlowField& flow,
                                     const std::vector<double>& timestamps, float edge_thresh) {
    if (d_gt.h() != flow.h() || d_gt.w() != flow.w())
        throw ShapeMismatch("localize_regions: depth and flow resolution differ");
    if (timestamps.empty()) throw EmptySequence("localize_regions: no timestamps");
    if (!(edge_thresh > 0)) throw Error("localize_regions: edge_thresh must be > 0");
    const int H = d_gt.h(), W = d_gt.w();
    RegionLabels out;
    out.labels = Plane<uint8_t>(H, W, static_cast<uint8_t>(Label::ignore));
    out.blur_band = Plane<uint8_t>(H, W, 0);

    const img::GradientMap g = img::depth_gradient(d_gt);
    Plane<float> edge(H, W, 0.0f);
    bool any_edge = false;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (g.valid.at(y, x) && g.magnitude.at(y, x) > edge_thresh) {
                edge.at(y, x) = 1.0f;
                any_edge = true;
            }
    if (!any_edge) {
        out.empty_edges = true;
        return out;
    }

    Plane<uint8_t> band(H, W, 0);
    for (double scale : timestamps) {
        const auto warped = img::warp_bilinear(edge, flow, scale);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                if (warped.covered.at(y, x) && warped.data.at(y, x) >= 0.5f) band.at(y, x) = 1;
    }
    out.blur_band = detail::dilate_1px(band);

    std::vector<float> depths;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (out.blur_band.at(y, x) && d_gt.valid.at(y, x))
                depths.push_back(d_gt.data.at(y, x));
    if (depths.empty()) {
        out.empty_edges = true;
        return out;
    }
    const double split = detail::otsu_threshold(depths);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (!out.blur_band.at(y, x) || !d_gt.valid.at(y, x)) continue;
            out.labels.at(y, x) = d_gt.data.at(y, x) <= split
                                      ? static_cast<uint8_t>(Label::foreground)
                                      : static_cast<uint8_t>(Label::background);
        }
    return out;
}

/// PGM tri-level export: 0 = background, 128 = ignore, 255 = foreground.
inline Plane<uint8_t> labels_to_pgm(const RegionLabels& r) {
    Plane<uint8_t> out(r.labels.h, r.labels.w);
    for (size_t i = 0; i < out.size(); ++i) {
        switch (static_cast<Label>(r.labels.v[i])) {
            case Label::background: out.v[i] = 0; break;
            case Label::ignore: out.v[i] = 128; break;
            case Label::foreground: out.v[i] = 255; break;
        }
    }
    return out;
}

template <typename T>
struct ContrastiveBatch {
    std::vector<std::vector<T>> features;  // N x C, unit L2 norm
    std::vector<uint8_t> labels;           // 1 = fg, 0 = bg
    T tau = static_cast<T>(0.07);
    // provenance for backprop into the source feature map (filled by sample_batch)
    std::vector<std::pair<int, int>> positions;  // (y, x) per sample
    std::vector<double> norms;                   // pre-normalization L2 norm per sample
};

template <typename T>
struct ContrastiveResult {
    T loss = 0;
    std::vector<std::vector<T>> grad;  // dL/d(features), N x C
};

/// Supervised contrastive loss with log-sum-exp stabilization and analytic
/// gradient. Positives of i are the other samples with i's label.
template <typename T>
ContrastiveResult<T> contrastive_loss(const ContrastiveBatch<T>& batch) {
    const size_t N = batch.features.size();
    if (!(batch.tau > 0)) throw BadTau("temperature must be > 0");
    if (N < 2) throw ClassUnderflow("contrastive_loss: need N >= 2");
    const size_t C = batch.features[0].size();
    const double tau = static_cast<double>(batch.tau);

    std::vector<size_t> pos_count(N, 0);
    for (size_t i = 0; i < N; ++i)
        for (size_t j = 0; j < N; ++j)
            if (j != i && batch.labels[j] == batch.labels[i]) ++pos_count[i];
    for (size_t i = 0; i < N; ++i)
        if (pos_count[i] == 0) throw NoPositives("sample without any positive");

    // z[i][j] = f_i . f_j / tau
    std::vector<std::vector<double>> z(N, std::vector<double>(N, 0.0));
    for (size_t i = 0; i < N; ++i)
        for (size_t j = i + 1; j < N; ++j) {
            double d = 0;
            for (size_t c = 0; c < C; ++c)
                d += static_cast<double>(batch.features[i][c]) *
                     static_cast<double>(batch.features[j][c]);
            z[i][j] = z[j][i] = d / tau;
        }

    double loss = 0.0;
    // a[i][j] = dL/dz[i][j]
    std::vector<std::vector<double>> a(N, std::vector<double>(N, 0.0));
    const double inv_n = 1.0 / static_cast<double>(N);
    for (size_t i = 0; i < N; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < N; ++k)
            if (k != i) m = std::max(m, z[i][k]);
        double denom = 0.0;
        for (size_t k = 0; k < N; ++k)
            if (k != i) denom += std::exp(z[i][k] - m);
        const double lse = m + std::log(denom);
        const double inv_p = 1.0 / static_cast<double>(pos_count[i]);
        for (size_t j = 0; j < N; ++j) {
            if (j == i) continue;
            const double softmax = std::exp(z[i][j] - lse);
            a[i][j] += inv_n * softmax;  // from the shared denominator
            if (batch.labels[j] == batch.labels[i]) {
                loss -= inv_n * inv_p * (z[i][j] - lse);
                a[i][j] -= inv_n * inv_p;
            }
        }
    }

    ContrastiveResult<T> res;
    res.loss = static_cast<T>(loss);
    res.grad.assign(N, std::vector<T>(C, T{}));
    for (size_t i = 0; i < N; ++i)
        for (size_t j = 0; j < N; ++j) {
            if (j == i || a[i][j] == 0.0) continue;
            const double s = a[i][j] / tau;
            for (size_t c = 0; c < C; ++c) {
                res.grad[i][c] += static_cast<T>(s * batch.features[j][c]);
                res.grad[j][c] += static_cast<T>(s * batch.features[i][c]);
            }
        }
    return res;
}

/// Majority-vote downsample of pixel labels to a feature grid.
inline Plane<uint8_t> downsample_labels(const Plane<uint8_t>& labels, int h, int w) {
    Plane<uint8_t> out(h, w, static_cast<uint8_t>(Label::ignore));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int y0 = y * labels.h / h, y1 = std::max((y + 1) * labels.h / h, y0 + 1);
            const int x0 = x * labels.w / w, x1 = std::max((x + 1) * labels.w / w, x0 + 1);
            size_t count[3] = {0, 0, 0};
            for (int yy = y0; yy < y1 && yy < labels.h; ++yy)
                for (int xx = x0; xx < x1 && xx < labels.w; ++xx) ++count[labels.at(yy, xx)];
            // strict majority between fg and bg; ties or ignore-dominated -> ignore
            const size_t fg = count[static_cast<int>(Label::foreground)];
            const size_t bg = count[static_cast<int>(Label::background)];
            const size_t ig = count[static_cast<int>(Label::ignore)];
            if (fg > bg && fg >= ig)
                out.at(y, x) = static_cast<uint8_t>(Label::foreground);
            else if (bg > fg && bg >= ig)
                out.at(y, x) = static_cast<uint8_t>(Label::background);
        }
    return out;
}

/// Deterministic seeded sampling of up to max_per_class feature vectors per
/// class from a feature map; features are L2-normalized.
template <typename T>
ContrastiveBatch<T> sample_batch(const Tensor3<T>& features, const RegionLabels& regions,
                                 int max_per_class, uint64_t seed, T tau = static_cast<T>(0.07)) {
    if (max_per_class < 2) throw ClassUnderflow("max_per_class must be >= 2");
    const Plane<uint8_t> lab = downsample_labels(regions.labels, features.h, features.w);
    std::vector<std::pair<int, int>> fg, bg;
    for (int y = 0; y < features.h; ++y)
        for (int x = 0; x < features.w; ++x) {
            if (lab.at(y, x) == static_cast<uint8_t>(Label::foreground)) fg.emplace_back(y, x);
            if (lab.at(y, x) == static_cast<uint8_t>(Label::background)) bg.emplace_back(y, x);
        }
    if (fg.size() < 2 || bg.size() < 2)
        throw ClassUnderflow("fewer than 2 samples in a class");
    std::mt19937_64 rng(seed);
    std::shuffle(fg.begin(), fg.end(), rng);
    std::shuffle(bg.begin(), bg.end(), rng);
    fg.resize(std::min<size_t>(fg.size(), static_cast<size_t>(max_per_class)));
    bg.resize(std::min<size_t>(bg.size(), static_cast<size_t>(max_per_class)));

    ContrastiveBatch<T> batch;
    batch.tau = tau;
    auto push = [&](const std::vector<std::pair<int, int>>& pts, uint8_t label) {
        for (auto [y, x] : pts) {
            std::vector<T> f(features.c);
            double n = 0;
            for (int c = 0; c < features.c; ++c) {
                f[c] = features.at(c, y, x);
                n += static_cast<double>(f[c]) * static_cast<double>(f[c]);
            }
            n = std::sqrt(n);
            if (n < 1e-12) n = 1.0;
            for (auto& v : f) v = static_cast<T>(v / n);
            batch.features.push_back(std::move(f));
            batch.labels.push_back(label);
            batch.positions.emplace_back(y, x);
            batch.norms.push_back(n);
        }
    };
    push(fg, 1);
    push(bg, 0);
    return batch;
}

/// Scatter per-sample gradients back into a feature-map gradient buffer,
/// through the L2 normalization applied by sample_batch.
template <typename T>
void scatter_batch_grad(const ContrastiveBatch<T>& batch,
                        const std::vector<std::vector<T>>& sample_grads, Tensor3<T>& grad_map,
                        double weight) {
    const size_t N = batch.features.size();
    for (size_t i = 0; i < N; ++i) {
        const auto& f = batch.features[i];  // unit vector
        const auto& g = sample_grads[i];
        double dot = 0;
        for (size_t c = 0; c < f.size(); ++c)
            dot += static_cast<double>(g[c]) * static_cast<double>(f[c]);
        const auto [y, x] = batch.positions[i];
        for (size_t c = 0; c < f.size(); ++c) {
            const double d = (static_cast<double>(g[c]) - dot * f[c]) / batch.norms[i];
            grad_map.at(static_cast<int>(c), y, x) += static_cast<T>(weight * d);
        }
    }
}

}  // namespace adae::mgtc
