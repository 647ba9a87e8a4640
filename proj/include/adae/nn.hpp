#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>

#include "adae/common.hpp"

// Minimal differentiable layer substrate: every layer exposes forward() and
// backward(), and backward is the exact adjoint of forward. Layers cache the
// activations they need; one sample in flight per layer instance.

namespace adae::nn {

template <typename T>
struct Param {
    std::vector<T> w;
    std::vector<T> g;
    bool frozen = false;

    void resize(size_t n) {
        w.assign(n, T{});
        g.assign(n, T{});
    }
    void zero_grad() { std::fill(g.begin(), g.end(), T{}); }
};

template <typename T>
using Mat = std::vector<std::vector<T>>;  // tokens x dim

template <typename T>
void fill_normal(std::vector<T>& v, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : v) x = static_cast<T>(dist(rng));
}

// ---------------------------------------------------------------- conv2d --
// 3x3 convolution, padding 1, configurable stride.
template <typename T>
class Conv2d {
  public:
    Conv2d(int in_c, int out_c, int stride) : in_c_(in_c), out_c_(out_c), stride_(stride) {
        weight.resize(static_cast<size_t>(out_c) * in_c * 9);
        bias.resize(static_cast<size_t>(out_c));
    }

    // small positive bias keeps post-relu feature columns away from exact
    // zero on silent inputs (all-zero voxel patches)
    void init(std::mt19937_64& rng) {
        fill_normal(weight.w, rng, std::sqrt(2.0 / (in_c_ * 9)));
        std::fill(bias.w.begin(), bias.w.end(), static_cast<T>(0.01));
    }

    Tensor3<T> forward(const Tensor3<T>& x) {
        if (x.c != in_c_) throw ShapeMismatch("conv2d: channel mismatch");
        x_ = x;
        const int oh = (x.h + 2 - 3) / stride_ + 1;
        const int ow = (x.w + 2 - 3) / stride_ + 1;
        Tensor3<T> y(out_c_, oh, ow);
        for (int oc = 0; oc < out_c_; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bias.w[oc];
                    for (int ic = 0; ic < in_c_; ++ic)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const int iy = oy * stride_ + ky - 1;
                                const int ix = ox * stride_ + kx - 1;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                acc += static_cast<double>(wv(oc, ic, ky, kx)) * x.at(ic, iy, ix);
                            }
                    y.at(oc, oy, ox) = static_cast<T>(acc);
                }
        return y;
    }

    Tensor3<T> backward(const Tensor3<T>& gy) {
        Tensor3<T> gx(x_.c, x_.h, x_.w);
        for (int oc = 0; oc < out_c_; ++oc)
            for (int oy = 0; oy < gy.h; ++oy)
                for (int ox = 0; ox < gy.w; ++ox) {
                    const double g = gy.at(oc, oy, ox);
                    if (g == 0) continue;
                    bias.g[oc] += static_cast<T>(g);
                    for (int ic = 0; ic < in_c_; ++ic)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const int iy = oy * stride_ + ky - 1;
                                const int ix = ox * stride_ + kx - 1;
                                if (iy < 0 || iy >= x_.h || ix < 0 || ix >= x_.w) continue;
                                gw(oc, ic, ky, kx) += static_cast<T>(g * x_.at(ic, iy, ix));
                                gx.at(ic, iy, ix) += static_cast<T>(g * wv(oc, ic, ky, kx));
                            }
                }
        return gx;
    }

    Param<T> weight, bias;

  private:
    T& wv(int oc, int ic, int ky, int kx) {
        return weight.w[((static_cast<size_t>(oc) * in_c_ + ic) * 3 + ky) * 3 + kx];
    }
    T& gw(int oc, int ic, int ky, int kx) {
        return weight.g[((static_cast<size_t>(oc) * in_c_ + ic) * 3 + ky) * 3 + kx];
    }
    int in_c_, out_c_, stride_;
    Tensor3<T> x_;
};

// ------------------------------------------------------------------ relu --
// Subgradient 0 at x == 0.
template <typename T>
class Relu {
  public:
    Tensor3<T> forward(const Tensor3<T>& x) {
        mask_.assign(x.v.size(), 0);
        Tensor3<T> y = x;
        for (size_t i = 0; i < x.v.size(); ++i) {
            if (x.v[i] > 0)
                mask_[i] = 1;
            else
                y.v[i] = T{};
        }
        return y;
    }

    Tensor3<T> backward(const Tensor3<T>& gy) {
        Tensor3<T> gx = gy;
        for (size_t i = 0; i < gx.v.size(); ++i)
            if (!mask_[i]) gx.v[i] = T{};
        return gx;
    }

  private:
    std::vector<uint8_t> mask_;
};

// ------------------------------------------------------------- layernorm --
// Normalizes each token over its feature dimension.
template <typename T>
class LayerNorm {
  public:
    explicit LayerNorm(int dim) : dim_(dim) {
        gamma.resize(static_cast<size_t>(dim));
        beta.resize(static_cast<size_t>(dim));
        std::fill(gamma.w.begin(), gamma.w.end(), static_cast<T>(1));
    }

    Mat<T> forward(const Mat<T>& x) {
        const size_t n = x.size();
        xhat_.assign(n, std::vector<T>(dim_));
        inv_sigma_.assign(n, 0.0);
        Mat<T> y(n, std::vector<T>(dim_));
        for (size_t i = 0; i < n; ++i) {
            double mu = 0;
            for (int c = 0; c < dim_; ++c) mu += x[i][c];
            mu /= dim_;
            double var = 0;
            for (int c = 0; c < dim_; ++c) {
                const double d = x[i][c] - mu;
                var += d * d;
            }
            var /= dim_;
            const double inv = 1.0 / std::sqrt(var + 1e-6);
            inv_sigma_[i] = inv;
            for (int c = 0; c < dim_; ++c) {
                xhat_[i][c] = static_cast<T>((x[i][c] - mu) * inv);
                y[i][c] = static_cast<T>(gamma.w[c] * xhat_[i][c] + beta.w[c]);
            }
        }
        return y;
    }

    Mat<T> backward(const Mat<T>& gy) {
        const size_t n = gy.size();
        Mat<T> gx(n, std::vector<T>(dim_));
        for (size_t i = 0; i < n; ++i) {
            double m1 = 0, m2 = 0;
            for (int c = 0; c < dim_; ++c) {
                const double gh = static_cast<double>(gy[i][c]) * gamma.w[c];
                m1 += gh;
                m2 += gh * xhat_[i][c];
                gamma.g[c] += static_cast<T>(static_cast<double>(gy[i][c]) * xhat_[i][c]);
                beta.g[c] += gy[i][c];
            }
            m1 /= dim_;
            m2 /= dim_;
            for (int c = 0; c < dim_; ++c) {
                const double gh = static_cast<double>(gy[i][c]) * gamma.w[c];
                gx[i][c] = static_cast<T>(inv_sigma_[i] * (gh - m1 - xhat_[i][c] * m2));
            }
        }
        return gx;
    }

    Param<T> gamma, beta;

  private:
    int dim_;
    Mat<T> xhat_;
    std::vector<double> inv_sigma_;
};

// ---------------------------------------------------------------- linear --
template <typename T>
class Linear {
  public:
    Linear(int in_dim, int out_dim) : in_(in_dim), out_(out_dim) {
        weight.resize(static_cast<size_t>(out_dim) * in_dim);
        bias.resize(static_cast<size_t>(out_dim));
    }

    void init(std::mt19937_64& rng) {
        fill_normal(weight.w, rng, std::sqrt(1.0 / in_));
        std::fill(bias.w.begin(), bias.w.end(), T{});
    }

    void init_zero() {
        std::fill(weight.w.begin(), weight.w.end(), T{});
        std::fill(bias.w.begin(), bias.w.end(), T{});
    }

    // identity plus small noise; square layers only
    void init_identity(std::mt19937_64& rng) {
        if (in_ != out_) throw ShapeMismatch("init_identity: layer is not square");
        fill_normal(weight.w, rng, 0.02);
        for (int o = 0; o < out_; ++o)
            weight.w[static_cast<size_t>(o) * in_ + o] += T{1};
        std::fill(bias.w.begin(), bias.w.end(), T{});
    }

    Mat<T> forward(const Mat<T>& x) {
        x_ = x;
        Mat<T> y(x.size(), std::vector<T>(out_));
        for (size_t i = 0; i < x.size(); ++i)
            for (int o = 0; o < out_; ++o) {
                double acc = bias.w[o];
                for (int c = 0; c < in_; ++c)
                    acc += static_cast<double>(weight.w[static_cast<size_t>(o) * in_ + c]) *
                           x[i][c];
                y[i][o] = static_cast<T>(acc);
            }
        return y;
    }

    Mat<T> backward(const Mat<T>& gy) {
        Mat<T> gx(x_.size(), std::vector<T>(in_, T{}));
        for (size_t i = 0; i < x_.size(); ++i)
            for (int o = 0; o < out_; ++o) {
                const double g = gy[i][o];
                if (g == 0) continue;
                bias.g[o] += static_cast<T>(g);
                for (int c = 0; c < in_; ++c) {
                    weight.g[static_cast<size_t>(o) * in_ + c] += static_cast<T>(g * x_[i][c]);
                    gx[i][c] += static_cast<T>(g * weight.w[static_cast<size_t>(o) * in_ + c]);
                }
            }
        return gx;
    }

    Param<T> weight, bias;

  private:
    int in_, out_;
    Mat<T> x_;
};

// ------------------------------------------------------------- attention --
// Scaled dot-product attention core, single head. Queries attend over the
// key/value token set.
template <typename T>
class Attention {
  public:
    explicit Attention(int dim) : dim_(dim) {}

    Mat<T> forward(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v) {
        q_ = q;
        k_ = k;
        v_ = v;
        const size_t nq = q.size(), nk = k.size();
        const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
        attn_.assign(nq, std::vector<double>(nk));
        Mat<T> out(nq, std::vector<T>(dim_, T{}));
        for (size_t i = 0; i < nq; ++i) {
            double m = -std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < nk; ++j) {
                double s = 0;
                for (int c = 0; c < dim_; ++c)
                    s += static_cast<double>(q[i][c]) * k[j][c];
                attn_[i][j] = s * scale;
                m = std::max(m, attn_[i][j]);
            }
            double denom = 0;
            for (size_t j = 0; j < nk; ++j) {
                attn_[i][j] = std::exp(attn_[i][j] - m);
                denom += attn_[i][j];
            }
            for (size_t j = 0; j < nk; ++j) {
                attn_[i][j] /= denom;
                for (int c = 0; c < dim_; ++c)
                    out[i][c] += static_cast<T>(attn_[i][j] * v[j][c]);
            }
        }
        return out;
    }

    void backward(const Mat<T>& gout, Mat<T>& gq, Mat<T>& gk, Mat<T>& gv) {
        const size_t nq = q_.size(), nk = k_.size();
        const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
        gq.assign(nq, std::vector<T>(dim_, T{}));
        gk.assign(nk, std::vector<T>(dim_, T{}));
        gv.assign(nk, std::vector<T>(dim_, T{}));
        std::vector<double> ga(nk);
        for (size_t i = 0; i < nq; ++i) {
            double dot = 0;
            for (size_t j = 0; j < nk; ++j) {
                ga[j] = 0;
                for (int c = 0; c < dim_; ++c) {
                    ga[j] += static_cast<double>(gout[i][c]) * v_[j][c];
                    gv[j][c] += static_cast<T>(attn_[i][j] * gout[i][c]);
                }
                dot += ga[j] * attn_[i][j];
            }
            for (size_t j = 0; j < nk; ++j) {
                const double gs = attn_[i][j] * (ga[j] - dot) * scale;
                for (int c = 0; c < dim_; ++c) {
                    gq[i][c] += static_cast<T>(gs * k_[j][c]);
                    gk[j][c] += static_cast<T>(gs * q_[i][c]);
                }
            }
        }
    }

  private:
    int dim_;
    Mat<T> q_, k_, v_;
    std::vector<std::vector<double>> attn_;
};

// ----------------------------------------------------- bilinear upsample --
// Factor-2 bilinear upsampling; backward scatters with the same weights.
template <typename T>
class Upsample2x {
  public:
    Tensor3<T> forward(const Tensor3<T>& x) {
        in_h_ = x.h;
        in_w_ = x.w;
        in_c_ = x.c;
        Tensor3<T> y(x.c, x.h * 2, x.w * 2);
        for (int c = 0; c < x.c; ++c)
            for (int oy = 0; oy < y.h; ++oy)
                for (int ox = 0; ox < y.w; ++ox) {
                    auto [y0, y1, fy] = coord(oy, x.h);
                    auto [x0, x1, fx] = coord(ox, x.w);
                    y.at(c, oy, ox) = static_cast<T>(
                        (1 - fy) * ((1 - fx) * x.at(c, y0, x0) + fx * x.at(c, y0, x1)) +
                        fy * ((1 - fx) * x.at(c, y1, x0) + fx * x.at(c, y1, x1)));
                }
        return y;
    }

    Tensor3<T> backward(const Tensor3<T>& gy) {
        Tensor3<T> gx(in_c_, in_h_, in_w_);
        for (int c = 0; c < in_c_; ++c)
            for (int oy = 0; oy < gy.h; ++oy)
                for (int ox = 0; ox < gy.w; ++ox) {
                    auto [y0, y1, fy] = coord(oy, in_h_);
                    auto [x0, x1, fx] = coord(ox, in_w_);
                    const double g = gy.at(c, oy, ox);
                    gx.at(c, y0, x0) += static_cast<T>((1 - fy) * (1 - fx) * g);
                    gx.at(c, y0, x1) += static_cast<T>((1 - fy) * fx * g);
                    gx.at(c, y1, x0) += static_cast<T>(fy * (1 - fx) * g);
                    gx.at(c, y1, x1) += static_cast<T>(fy * fx * g);
                }
        return gx;
    }

  private:
    static std::tuple<int, int, double> coord(int o, int in_len) {
        const double s = (o + 0.5) / 2.0 - 0.5;
        const double sc = std::clamp(s, 0.0, static_cast<double>(in_len - 1));
        const int i0 = std::min(static_cast<int>(std::floor(sc)), in_len - 1);
        const int i1 = std::min(i0 + 1, in_len - 1);
        return {i0, i1, sc - i0};
    }
    int in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

// -------------------------------------------------------------- softplus --
template <typename T>
class Softplus {
  public:
    Tensor3<T> forward(const Tensor3<T>& x) {
        x_ = x;
        Tensor3<T> y = x;
        for (auto& v : y.v) {
            const double d = v;
            v = static_cast<T>(d > 30.0 ? d : std::log1p(std::exp(d)));
        }
        return y;
    }

    Tensor3<T> backward(const Tensor3<T>& gy) {
        Tensor3<T> gx = gy;
        for (size_t i = 0; i < gx.v.size(); ++i) {
            const double d = x_.v[i];
            gx.v[i] = static_cast<T>(static_cast<double>(gy.v[i]) / (1.0 + std::exp(-d)));
        }
        return gx;
    }

  private:
    Tensor3<T> x_;
};

// Token <-> tensor reshaping used by the attention adapter.
template <typename T>
Mat<T> to_tokens(const Tensor3<T>& x) {
    Mat<T> t(static_cast<size_t>(x.h) * x.w, std::vector<T>(x.c));
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx)
            for (int c = 0; c < x.c; ++c)
                t[static_cast<size_t>(y) * x.w + xx][c] = x.at(c, y, xx);
    return t;
}

template <typename T>
Tensor3<T> from_tokens(const Mat<T>& t, int c, int h, int w) {
    Tensor3<T> x(c, h, w);
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int cc = 0; cc < c; ++cc)
                x.at(cc, y, xx) = t[static_cast<size_t>(y) * w + xx][cc];
    return x;
}

}  // namespace adae::nn
