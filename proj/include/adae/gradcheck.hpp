#pragma once

// Central finite-difference audits for every differentiable component.
// Shared by the CLI `gradcheck` subcommand and the acceptance suite.

#include <random>
#include <string>
#include <vector>

#include "adae/easf.hpp"
#include "adae/fusenet.hpp"
#include "adae/mgtc.hpp"
#include "adae/nn.hpp"

namespace adae::gradcheck {

struct Suite {
    std::string name;
    bool pass = true;
    double worst = 0;
    size_t checks = 0;
};

inline bool close(double fd, double an, double tol, Suite& s) {
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-5});
    const double rel = std::abs(fd - an) / denom;
    s.worst = std::max(s.worst, rel);
    ++s.checks;
    if (rel > tol) s.pass = false;
    return rel <= tol;
}

template <typename F>
double fd_at(std::vector<double>& v, size_t i, F&& eval, double step = 1e-6) {
    const double orig = v[i];
    v[i] = orig + step;
    const double hi = eval();
    v[i] = orig - step;
    const double lo = eval();
    v[i] = orig;
    return (hi - lo) / (2 * step);
}

inline Suite check_conv(std::mt19937_64& rng, int trials) {
    Suite s{"conv2d"};
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int t = 0; t < trials; ++t) {
        const int in_c = 1 + static_cast<int>(rng() % 3);
        const int out_c = 1 + static_cast<int>(rng() % 3);
        const int stride = 1 + static_cast<int>(rng() % 2);
        nn::Conv2d<double> conv(in_c, out_c, stride);
        conv.init(rng);
        Tensor3<double> x(in_c, 3 + static_cast<int>(rng() % 4),
                          3 + static_cast<int>(rng() % 4));
        for (auto& v : x.v) v = ud(rng);
        auto y0 = conv.forward(x);
        Tensor3<double> probe(y0.c, y0.h, y0.w);
        for (auto& v : probe.v) v = ud(rng);
        auto eval = [&]() {
            auto y = conv.forward(x);
            double acc = 0;
            for (size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * probe.v[i];
            return acc;
        };
        conv.weight.zero_grad();
        conv.bias.zero_grad();
        conv.forward(x);
        auto gx = conv.backward(probe);
        for (size_t i = 0; i < x.v.size(); i += 1 + x.v.size() / 6)
            close(fd_at(x.v, i, eval), gx.v[i], 1e-4, s);
        for (size_t i = 0; i < conv.weight.w.size(); i += 1 + conv.weight.w.size() / 6)
            close(fd_at(conv.weight.w, i, eval), conv.weight.g[i], 1e-4, s);
        for (size_t i = 0; i < conv.bias.w.size(); ++i)
            close(fd_at(conv.bias.w, i, eval), conv.bias.g[i], 1e-4, s);
    }
    return s;
}

inline Suite check_linear_ln_attn(std::mt19937_64& rng, int trials) {
    Suite s{"linear/layernorm/attention"};
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int t = 0; t < trials; ++t) {
        const int dim = 2 + static_cast<int>(rng() % 4);
        const size_t ntok = 2 + rng() % 4;
        nn::Linear<double> lin(dim, dim);
        lin.init(rng);
        nn::LayerNorm<double> ln(dim);
        nn::Attention<double> att(dim);
        nn::Mat<double> x(ntok, std::vector<double>(dim)),
            kv(ntok, std::vector<double>(dim)), probe(ntok, std::vector<double>(dim));
        for (auto& row : x)
            for (auto& v : row) v = ud(rng);
        for (auto& row : kv)
            for (auto& v : row) v = ud(rng);
        for (auto& row : probe)
            for (auto& v : row) v = ud(rng);
        auto eval = [&]() {
            const auto y = att.forward(lin.forward(ln.forward(x)), kv, kv);
            double acc = 0;
            for (size_t i = 0; i < y.size(); ++i)
                for (int c = 0; c < dim; ++c) acc += y[i][c] * probe[i][c];
            return acc;
        };
        lin.weight.zero_grad();
        lin.bias.zero_grad();
        ln.gamma.zero_grad();
        ln.beta.zero_grad();
        eval();
        nn::Mat<double> gq, gk, gv;
        att.backward(probe, gq, gk, gv);
        auto gx = ln.backward(lin.backward(gq));
        for (size_t i = 0; i < ntok; ++i)
            for (int c = 0; c < dim; ++c) {
                close(fd_at(kv[i], static_cast<size_t>(c), eval), gk[i][c] + gv[i][c],
                      1e-4, s);
                close(fd_at(x[i], static_cast<size_t>(c), eval), gx[i][c], 1e-4, s);
            }
        for (size_t i = 0; i < lin.weight.w.size(); i += 1 + lin.weight.w.size() / 6)
            close(fd_at(lin.weight.w, i, eval), lin.weight.g[i], 1e-4, s);
        for (int c = 0; c < dim; ++c) {
            close(fd_at(ln.gamma.w, static_cast<size_t>(c), eval), ln.gamma.g[c], 1e-4, s);
            close(fd_at(ln.beta.w, static_cast<size_t>(c), eval), ln.beta.g[c], 1e-4, s);
        }
    }
    return s;
}

inline Suite check_upsample_softplus(std::mt19937_64& rng, int trials) {
    Suite s{"upsample/softplus/relu"};
    std::uniform_real_distribution<double> ud(-2.0, 2.0);
    for (int t = 0; t < trials; ++t) {
        nn::Upsample2x<double> up;
        nn::Softplus<double> sp;
        nn::Relu<double> relu;
        Tensor3<double> x(1 + static_cast<int>(rng() % 3), 2 + static_cast<int>(rng() % 3),
                          2 + static_cast<int>(rng() % 3));
        for (auto& v : x.v) v = ud(rng);
        auto y0 = sp.forward(relu.forward(up.forward(x)));
        Tensor3<double> probe(y0.c, y0.h, y0.w);
        for (auto& v : probe.v) v = ud(rng);
        auto eval = [&]() {
            auto y = sp.forward(relu.forward(up.forward(x)));
            double acc = 0;
            for (size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * probe.v[i];
            return acc;
        };
        eval();
        const auto gx = up.backward(relu.backward(sp.backward(probe)));
        for (size_t i = 0; i < x.v.size(); ++i) {
            if (std::abs(x.v[i]) < 1e-3) continue;  // relu kink
            close(fd_at(x.v, i, eval), gx.v[i], 1e-4, s);
        }
    }
    return s;
}

inline Suite check_spatial(std::mt19937_64& rng, int trials) {
    Suite s{"spatial_loss"};
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    std::uniform_real_distribution<float> wd(0.0f, 1.0f);
    for (int t = 0; t < trials; ++t) {
        Tensor3<double> fused(3, 2, 2), fe(3, 2, 2), ff(3, 2, 2);
        for (auto& v : fused.v) v = ud(rng) + 1.5;
        for (auto& v : fe.v) v = ud(rng) + 1.5;
        for (auto& v : ff.v) v = ud(rng) + 1.5;
        Plane<float> w(2, 2);
        for (auto& v : w.v) v = wd(rng);
        const auto res = easf::spatial_loss(fused, fe, ff, w);
        auto eval = [&]() {
            return static_cast<double>(easf::spatial_loss(fused, fe, ff, w).loss);
        };
        for (size_t i = 0; i < fused.v.size(); ++i)
            close(fd_at(fused.v, i, eval, 1e-5), res.grad_fused.v[i], 1e-4, s);
    }
    return s;
}

inline Suite check_contrastive(std::mt19937_64& rng, int trials) {
    Suite s{"contrastive_loss"};
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int t = 0; t < trials; ++t) {
        mgtc::ContrastiveBatch<double> b;
        b.tau = 0.3;
        for (int i = 0; i < 6; ++i) {
            std::vector<double> v(4);
            double n = 0;
            for (auto& x : v) {
                x = nd(rng);
                n += x * x;
            }
            n = std::sqrt(n);
            for (auto& x : v) x /= n;
            b.features.push_back(v);
            b.labels.push_back(i < 3 ? 1 : 0);
        }
        const auto res = mgtc::contrastive_loss(b);
        for (size_t i = 0; i < b.features.size(); ++i)
            for (size_t c = 0; c < 4; ++c) {
                auto eval = [&]() { return mgtc::contrastive_loss(b).loss; };
                close(fd_at(b.features[i], c, eval, 1e-5), res.grad[i][c], 1e-4, s);
            }
    }
    return s;
}

inline Suite check_depth_losses(std::mt19937_64& rng, int trials) {
    Suite s{"scale_invariant/pretrain_loss"};
    std::uniform_real_distribution<double> ud(0.5, 6.0);
    for (int t = 0; t < trials; ++t) {
        Plane<float> g(3, 3);
        for (auto& v : g.v) v = static_cast<float>(ud(rng));
        const auto gt = img::make_depth(g);
        Plane<double> pred(3, 3);
        for (auto& v : pred.v) v = ud(rng);
        const auto r = fuse::scale_invariant_loss(pred, gt);
        auto eval = [&]() { return fuse::scale_invariant_loss(pred, gt).loss; };
        for (size_t i = 0; i < pred.v.size(); ++i)
            close(fd_at(pred.v, i, eval), r.grad.v[i], 1e-4, s);

        Tensor3<double> ff(2, 2, 2), fe(2, 2, 2);
        for (auto& v : ff.v) v = ud(rng);
        for (auto& v : fe.v) v = ud(rng);
        const auto p = fuse::pretrain_loss(ff, fe);
        auto evalp = [&]() { return fuse::pretrain_loss(ff, fe).loss; };
        for (size_t i = 0; i < fe.v.size(); ++i)
            close(fd_at(fe.v, i, evalp), p.grad.v[i], 1e-4, s);
    }
    return s;
}

inline std::vector<Suite> run_all(uint64_t seed, int trials) {
    std::mt19937_64 rng(split_seed(seed, "gradcheck"));
    return {
        check_conv(rng, trials),
        check_linear_ln_attn(rng, trials),
        check_upsample_softplus(rng, trials),
        check_spatial(rng, trials),
        check_contrastive(rng, trials),
        check_depth_losses(rng, trials),
    };
}

}  // namespace adae::gradcheck
