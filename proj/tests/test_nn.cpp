#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "adae/nn.hpp"

using namespace adae;
using namespace adae::nn;

namespace {

// Scalar probe loss: random fixed projection of the output. Its gradient
// w.r.t. the output is the projection itself, which we feed to backward().

Tensor3<double> random_tensor(std::mt19937_64& rng, int c, int h, int w, double lo = -1.0,
                              double hi = 1.0) {
    std::uniform_real_distribution<double> ud(lo, hi);
    Tensor3<double> t(c, h, w);
    for (auto& v : t.v) v = ud(rng);
    return t;
}

Mat<double> random_mat(std::mt19937_64& rng, size_t n, int dim) {
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    Mat<double> m(n, std::vector<double>(dim));
    for (auto& row : m)
        for (auto& v : row) v = ud(rng);
    return m;
}

double dot(const Tensor3<double>& a, const Tensor3<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

double dot(const Mat<double>& a, const Mat<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t c = 0; c < a[i].size(); ++c) s += a[i][c] * b[i][c];
    return s;
}

void check_close(double fd, double an, double tol = 1e-6) {
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
    CHECK(std::abs(fd - an) / denom <= tol);
}

// Central difference through an arbitrary evaluation closure.
template <typename F>
double fd(std::vector<double>& storage, size_t idx, F&& eval, double step = 1e-6) {
    const double orig = storage[idx];
    storage[idx] = orig + step;
    const double hi = eval();
    storage[idx] = orig - step;
    const double lo = eval();
    storage[idx] = orig;
    return (hi - lo) / (2 * step);
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 8; ++trial) {
        const int in_c = 1 + static_cast<int>(rng() % 3);
        const int out_c = 1 + static_cast<int>(rng() % 3);
        const int stride = 1 + static_cast<int>(rng() % 2);
        const int h = 3 + static_cast<int>(rng() % 4);
        const int w = 3 + static_cast<int>(rng() % 4);
        Conv2d<double> conv(in_c, out_c, stride);
        conv.init(rng);
        Tensor3<double> x = random_tensor(rng, in_c, h, w);
        auto probe_for = [&]() {
            auto y = conv.forward(x);
            return random_tensor(rng, y.c, y.h, y.w);
        };
        const Tensor3<double> probe = probe_for();
        auto eval = [&]() { return dot(conv.forward(x), probe); };

        conv.weight.zero_grad();
        conv.bias.zero_grad();
        conv.forward(x);
        const Tensor3<double> gx = conv.backward(probe);

        for (size_t i = 0; i < x.v.size(); i += 1 + x.v.size() / 12)
            check_close(fd(x.v, i, eval), gx.v[i]);
        for (size_t i = 0; i < conv.weight.w.size(); i += 1 + conv.weight.w.size() / 12)
            check_close(fd(conv.weight.w, i, eval), conv.weight.g[i]);
        for (size_t i = 0; i < conv.bias.w.size(); ++i)
            check_close(fd(conv.bias.w, i, eval), conv.bias.g[i]);
    }
}

TEST_CASE("relu forward values and subgradient") {
    Relu<double> relu;
    Tensor3<double> x(1, 1, 3);
    x.v = {-2.0, 0.0, 3.0};
    const auto y = relu.forward(x);
    CHECK(y.v == std::vector<double>({0.0, 0.0, 3.0}));
    Tensor3<double> g(1, 1, 3);
    g.v = {5.0, 5.0, 5.0};
    const auto gx = relu.backward(g);
    CHECK(gx.v == std::vector<double>({0.0, 0.0, 5.0}));
}

TEST_CASE("layernorm output is normalized and gradients check out") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        const int dim = 3 + static_cast<int>(rng() % 6);
        const size_t n = 2 + rng() % 5;
        LayerNorm<double> ln(dim);
        std::uniform_real_distribution<double> ud(0.5, 1.5);
        for (auto& v : ln.gamma.w) v = ud(rng);
        for (auto& v : ln.beta.w) v = ud(rng) - 1.0;
        Mat<double> x = random_mat(rng, n, dim);
        const Mat<double> probe = random_mat(rng, n, dim);

        // with unit gamma / zero beta each token has zero mean, unit variance
        LayerNorm<double> plain(dim);
        const auto yp = plain.forward(x);
        for (const auto& row : yp) {
            double mu = 0, var = 0;
            for (double v : row) mu += v;
            mu /= dim;
            for (double v : row) var += (v - mu) * (v - mu);
            var /= dim;
            CHECK_THAT(mu, Catch::Matchers::WithinAbs(0.0, 1e-9));
            CHECK_THAT(var, Catch::Matchers::WithinAbs(1.0, 1e-2));
        }

        auto eval = [&]() { return dot(ln.forward(x), probe); };
        ln.gamma.zero_grad();
        ln.beta.zero_grad();
        ln.forward(x);
        const auto gx = ln.backward(probe);
        for (size_t i = 0; i < n; ++i)
            for (int c = 0; c < dim; ++c) {
                auto evalx = [&]() { return dot(ln.forward(x), probe); };
                check_close(fd(x[i], static_cast<size_t>(c), evalx), gx[i][c], 1e-5);
            }
        for (int c = 0; c < dim; ++c) {
            check_close(fd(ln.gamma.w, static_cast<size_t>(c), eval), ln.gamma.g[c], 1e-5);
            check_close(fd(ln.beta.w, static_cast<size_t>(c), eval), ln.beta.g[c], 1e-5);
        }
    }
}

TEST_CASE("linear gradients match finite differences") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 6; ++trial) {
        const int in = 2 + static_cast<int>(rng() % 5);
        const int out = 2 + static_cast<int>(rng() % 5);
        const size_t n = 1 + rng() % 6;
        Linear<double> lin(in, out);
        lin.init(rng);
        Mat<double> x = random_mat(rng, n, in);
        const Mat<double> probe = random_mat(rng, n, out);
        auto eval = [&]() { return dot(lin.forward(x), probe); };
        lin.weight.zero_grad();
        lin.bias.zero_grad();
        lin.forward(x);
        const auto gx = lin.backward(probe);
        for (size_t i = 0; i < n; ++i)
            for (int c = 0; c < in; ++c)
                check_close(fd(x[i], static_cast<size_t>(c), eval), gx[i][c]);
        for (size_t i = 0; i < lin.weight.w.size(); i += 1 + lin.weight.w.size() / 10)
            check_close(fd(lin.weight.w, i, eval), lin.weight.g[i]);
        for (size_t i = 0; i < lin.bias.w.size(); ++i)
            check_close(fd(lin.bias.w, i, eval), lin.bias.g[i]);
    }
}

TEST_CASE("attention with equal keys averages the values") {
    std::mt19937_64 rng(9);
    const int dim = 4;
    Attention<double> att(dim);
    const Mat<double> q = random_mat(rng, 3, dim);
    const Mat<double> k(5, std::vector<double>(dim, 0.3));  // identical keys
    const Mat<double> v = random_mat(rng, 5, dim);
    const auto out = att.forward(q, k, v);
    for (size_t i = 0; i < q.size(); ++i)
        for (int c = 0; c < dim; ++c) {
            double mean = 0;
            for (size_t j = 0; j < v.size(); ++j) mean += v[j][c];
            mean /= static_cast<double>(v.size());
            CHECK_THAT(out[i][c], Catch::Matchers::WithinAbs(mean, 1e-12));
        }
}

TEST_CASE("attention gradients match finite differences") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        const int dim = 2 + static_cast<int>(rng() % 4);
        const size_t nq = 1 + rng() % 4, nk = 2 + rng() % 4;
        Attention<double> att(dim);
        Mat<double> q = random_mat(rng, nq, dim), k = random_mat(rng, nk, dim),
                    v = random_mat(rng, nk, dim);
        const Mat<double> probe = random_mat(rng, nq, dim);
        auto eval = [&]() { return dot(att.forward(q, k, v), probe); };
        att.forward(q, k, v);
        Mat<double> gq, gk, gv;
        att.backward(probe, gq, gk, gv);
        for (size_t i = 0; i < nq; ++i)
            for (int c = 0; c < dim; ++c)
                check_close(fd(q[i], static_cast<size_t>(c), eval), gq[i][c], 1e-5);
        for (size_t j = 0; j < nk; ++j)
            for (int c = 0; c < dim; ++c) {
                check_close(fd(k[j], static_cast<size_t>(c), eval), gk[j][c], 1e-5);
                check_close(fd(v[j], static_cast<size_t>(c), eval), gv[j][c], 1e-5);
            }
    }
}

TEST_CASE("upsample doubles resolution and is constant-preserving") {
    Upsample2x<double> up;
    Tensor3<double> x(2, 3, 4, 0.7);
    const auto y = up.forward(x);
    REQUIRE(y.h == 6);
    REQUIRE(y.w == 8);
    for (double v : y.v) CHECK_THAT(v, Catch::Matchers::WithinAbs(0.7, 1e-12));
}

TEST_CASE("upsample backward is the exact adjoint of forward") {
    std::mt19937_64 rng(13);
    Upsample2x<double> up;
    Tensor3<double> x = random_tensor(rng, 2, 3, 5);
    const auto y = up.forward(x);
    const Tensor3<double> gy = random_tensor(rng, y.c, y.h, y.w);
    const auto gx = up.backward(gy);
    // <Ax, gy> == <x, A^T gy> for a linear operator
    Tensor3<double> x2 = random_tensor(rng, 2, 3, 5);
    const auto y2 = up.forward(x2);
    CHECK_THAT(dot(y2, gy), Catch::Matchers::WithinAbs(dot(x2, gx), 1e-9));
}

TEST_CASE("softplus is positive, monotone, and differentiates correctly") {
    std::mt19937_64 rng(17);
    Softplus<double> sp;
    Tensor3<double> x = random_tensor(rng, 1, 2, 6, -5.0, 5.0);
    x.v[0] = 40.0;  // large-input passthrough
    const auto y = sp.forward(x);
    for (double v : y.v) CHECK(v > 0.0);
    CHECK(y.v[0] == 40.0);
    const Tensor3<double> probe = random_tensor(rng, 1, 2, 6);
    auto eval = [&]() { return dot(sp.forward(x), probe); };
    sp.forward(x);
    const auto gx = sp.backward(probe);
    for (size_t i = 1; i < x.v.size(); ++i) check_close(fd(x.v, i, eval), gx.v[i], 1e-5);
}

TEST_CASE("token reshape round-trips") {
    std::mt19937_64 rng(19);
    const Tensor3<double> x = random_tensor(rng, 3, 4, 5);
    const auto t = to_tokens(x);
    REQUIRE(t.size() == 20);
    const auto back = from_tokens(t, 3, 4, 5);
    CHECK(back.v == x.v);
}
