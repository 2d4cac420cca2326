#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "plotyield/tensornet.hpp"

using namespace plotyield;

namespace {

// Independent 6-loop convolution used as the oracle for conv2d.
Tensor conv_reference(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = w.dim(0), kH = w.dim(2), kW = w.dim(3);
    const int Hout = (H + 2 * pad - kH) / stride + 1;
    const int Wout = (W + 2 * pad - kW) / stride + 1;
    Tensor out = Tensor::zeros({N, Cout, Hout, Wout});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co)
            for (int ho = 0; ho < Hout; ++ho)
                for (int wo = 0; wo < Wout; ++wo) {
                    double acc = b[co];
                    for (int ci = 0; ci < Cin; ++ci)
                        for (int kh = 0; kh < kH; ++kh)
                            for (int kw = 0; kw < kW; ++kw) {
                                int hi = ho * stride - pad + kh;
                                int wi = wo * stride - pad + kw;
                                if (hi < 0 || hi >= H || wi < 0 || wi >= W) continue;
                                acc += w.data[((static_cast<int64_t>(co) * Cin + ci) * kH + kh) * kW + kw] *
                                       x.data[((static_cast<int64_t>(n) * Cin + ci) * H + hi) * W + wi];
                            }
                    out.data[((static_cast<int64_t>(n) * Cout + co) * Hout + ho) * Wout + wo] = acc;
                }
    return out;
}

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = u(rng);
    return t;
}

// Central finite difference of a scalar function wrt one tensor element.
template <typename F>
double fd_grad(Tensor& t, int64_t i, F&& loss_fn, double h = 1e-5) {
    double orig = t[i];
    t[i] = orig + h;
    double up = loss_fn();
    t[i] = orig - h;
    double down = loss_fn();
    t[i] = orig;
    return (up - down) / (2 * h);
}

void check_close(double got, double want, double rel_tol = 1e-4) {
    double scale = std::max({std::abs(got), std::abs(want), 1e-6});
    REQUIRE(std::abs(got - want) / scale < rel_tol);
}

}  // namespace

TEST_CASE("conv2d hand examples") {
    Tensor ones = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor kernel = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor zero_bias = Tensor::zeros({1});
    Tensor out = conv2d(ones, kernel, zero_bias, 1, 0);
    REQUIRE(out.shape == std::vector<int>({1, 1, 1, 1}));
    CHECK(out[0] == 9.0);

    std::mt19937_64 rng(1);
    Tensor x = random_tensor({1, 1, 4, 5}, rng);
    Tensor identity = Tensor::full({1, 1, 1, 1}, 1.0);
    Tensor same = conv2d(x, identity, zero_bias, 1, 0);
    REQUIRE(same.shape == x.shape);
    REQUIRE(same.data == x.data);

    Tensor zero_w = Tensor::zeros({2, 1, 3, 3});
    Tensor bias({2}, {0.5, -1.5});
    Tensor constant = conv2d(x, zero_w, bias, 1, 1);
    for (int co = 0; co < 2; ++co)
        for (int i = 0; i < 4 * 5; ++i)
            REQUIRE(constant.data[static_cast<int64_t>(co) * 4 * 5 + i] == bias[co]);
}

TEST_CASE("conv2d output dims follow the floor formula") {
    Tensor x = Tensor::zeros({1, 1, 7, 9});
    Tensor w = Tensor::zeros({1, 1, 3, 3});
    Tensor b = Tensor::zeros({1});
    CHECK(conv2d(x, w, b, 2, 0).shape == std::vector<int>({1, 1, 3, 4}));
    CHECK(conv2d(x, w, b, 2, 1).shape == std::vector<int>({1, 1, 4, 5}));
    CHECK(conv2d(x, w, b, 1, 1).shape == std::vector<int>({1, 1, 7, 9}));
}

TEST_CASE("conv2d rejects inconsistent shapes") {
    Tensor x = Tensor::zeros({1, 2, 5, 5});
    Tensor w = Tensor::zeros({1, 3, 3, 3});
    Tensor b = Tensor::zeros({1});
    CHECK_THROWS_AS(conv2d(x, w, b, 1, 0), Error);
    Tensor w2 = Tensor::zeros({2, 2, 3, 3});
    CHECK_THROWS_AS(conv2d(x, w2, Tensor::zeros({3}), 1, 0), Error);
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({1, 2, 7, 7}), b, 1, 0), Error);
}

TEST_CASE("conv2d matches the naive 6-loop reference exactly") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> un(1, 2), uc(1, 4), usz(1, 9), uco(1, 3);
    std::uniform_int_distribution<int> ustride(1, 3), upad(0, 2);
    for (int trial = 0; trial < 60; ++trial) {
        int N = un(rng), Cin = uc(rng), H = usz(rng), W = usz(rng), Cout = uco(rng);
        std::uniform_int_distribution<int> uk(1, std::min(H, W));
        int k = uk(rng);
        int stride = ustride(rng), pad = upad(rng);
        Tensor x = random_tensor({N, Cin, H, W}, rng);
        Tensor w = random_tensor({Cout, Cin, k, k}, rng);
        Tensor b = random_tensor({Cout}, rng);
        Tensor fast = conv2d(x, w, b, stride, pad);
        Tensor slow = conv_reference(x, w, b, stride, pad);
        REQUIRE(fast.shape == slow.shape);
        for (int64_t i = 0; i < fast.size(); ++i) REQUIRE(fast[i] == slow[i]);
    }
}

TEST_CASE("maxpool2d examples and brute force") {
    Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor out = maxpool2d(x, 2, 2);
    REQUIRE(out.shape == std::vector<int>({1, 1, 1, 1}));
    CHECK(out[0] == 4.0);

    Tensor c = Tensor::full({1, 2, 5, 5}, 0.7);
    Tensor cp = maxpool2d(c, 2, 1);
    for (double v : cp.data) REQUIRE(v == 0.7);

    std::mt19937_64 rng(3);
    Tensor r = random_tensor({1, 1, 4, 4}, rng);
    Tensor p = maxpool2d(r, 2, 2);
    for (int ho = 0; ho < 2; ++ho)
        for (int wo = 0; wo < 2; ++wo) {
            double best = -1e300;
            for (int kh = 0; kh < 2; ++kh)
                for (int kw = 0; kw < 2; ++kw)
                    best = std::max(best, r.data[(2 * ho + kh) * 4 + (2 * wo + kw)]);
            REQUIRE(p.data[ho * 2 + wo] == best);
        }

    CHECK_THROWS_AS(maxpool2d(Tensor::zeros({1, 1, 2, 2}), 3, 1), Error);
}

TEST_CASE("maxpool ties route the gradient to the first window element") {
    Graph g;
    auto x = g.parameter(Tensor::full({1, 1, 2, 2}, 5.0));
    auto pooled = g.maxpool2d(x, 2, 2);
    auto target = g.input(Tensor::zeros({1, 1, 1, 1}));
    auto loss = g.mse(pooled, target);
    g.backward(loss);
    const Tensor& gx = g.grad(x);
    CHECK(gx[0] != 0.0);
    CHECK(gx[1] == 0.0);
    CHECK(gx[2] == 0.0);
    CHECK(gx[3] == 0.0);
}

TEST_CASE("fc, relu and mse basics") {
    Tensor x({2, 2}, {1, 2, 3, 4});
    Tensor w({3, 2}, {1, 0, 0, 1, 1, 1});
    Tensor b({3}, {0, 0, 0.5});
    Tensor y = fc(x, w, b);
    REQUIRE(y.shape == std::vector<int>({2, 3}));
    CHECK(y.data == std::vector<double>({1, 2, 3.5, 3, 4, 7.5}));

    Tensor neg({1, 2}, {-1, 3});
    Tensor r = relu(neg);
    CHECK(r.data == std::vector<double>({0, 3}));

    CHECK(mse(x, x) == 0.0);
    Tensor p({2}, {0, 2});
    Tensor t({2}, {1, 1});
    CHECK(mse(p, t) == 1.0);
    CHECK_THROWS_AS(mse(p, x), Error);
    CHECK_THROWS_AS(fc(x, w, Tensor::zeros({2})), Error);
}

TEST_CASE("adam: zero gradient leaves parameters and moments untouched") {
    Tensor w = Tensor::full({3}, 2.0);
    Tensor g = Tensor::zeros({3});
    AdamState<double> st;
    st.lr = 1e-3;
    adam_step<double>({&w}, {&g}, st);
    for (double v : w.data) CHECK(v == 2.0);
    for (double v : st.m[0].data) CHECK(v == 0.0);
    for (double v : st.v[0].data) CHECK(v == 0.0);
    CHECK(st.step_count == 1);
}

TEST_CASE("adam: one scalar step matches the hand-evaluated update") {
    Tensor w({1}, {1.0});
    Tensor g({1}, {1.0});
    AdamState<double> st;
    st.lr = 1e-3;
    adam_step<double>({&w}, {&g}, st);
    CHECK(st.m[0][0] == Catch::Approx(0.1).margin(1e-15));
    CHECK(st.v[0][0] == Catch::Approx(0.001).margin(1e-15));
    double expected = 1.0 - 1e-3 * 1.0 / (1.0 + 1e-8);  // mhat = vhat = 1 after step 1
    CHECK(w[0] == Catch::Approx(expected).margin(1e-12));
    CHECK(w[0] == Catch::Approx(0.9990).margin(1e-6));
}

TEST_CASE("graph error paths") {
    Graph g;
    CHECK_THROWS_AS(g.backward(0), Error);
    auto x = g.parameter(Tensor::zeros({2, 2}));
    CHECK_THROWS_AS(g.backward(x), Error);  // non-scalar loss
    CHECK_THROWS_AS(g.grad(x), Error);      // before backward
    CHECK_THROWS_AS(g.value(99), Error);    // unrecorded node
}

TEST_CASE("finite differences confirm conv2d gradients") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        Tensor x = random_tensor({2, 2, 5, 5}, rng);
        Tensor w = random_tensor({3, 2, 3, 3}, rng);
        Tensor b = random_tensor({3}, rng);
        Tensor target = random_tensor({2, 3, 5, 5}, rng);

        auto loss_fn = [&]() { return mse(conv2d(x, w, b, 1, 1), target); };

        Graph g;
        auto xn = g.parameter(x);
        auto wn = g.parameter(w);
        auto bn = g.parameter(b);
        auto out = g.conv2d(xn, wn, bn, 1, 1);
        auto loss = g.mse(out, g.input(target));
        g.backward(loss);
        REQUIRE(all_finite(g.grad(xn)));

        std::uniform_int_distribution<int64_t> pick_x(0, x.size() - 1);
        std::uniform_int_distribution<int64_t> pick_w(0, w.size() - 1);
        for (int probe = 0; probe < 6; ++probe) {
            int64_t ix = pick_x(rng);
            check_close(g.grad(xn)[ix], fd_grad(x, ix, loss_fn));
            int64_t iw = pick_w(rng);
            check_close(g.grad(wn)[iw], fd_grad(w, iw, loss_fn));
        }
        check_close(g.grad(bn)[0], fd_grad(b, 0, loss_fn));
    }
}

TEST_CASE("finite differences confirm maxpool, fc, relu and mse gradients") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(2000 + seed);
        Tensor x = random_tensor({1, 2, 6, 6}, rng);
        Tensor target = random_tensor({1, 2, 3, 3}, rng);
        auto pool_loss = [&]() { return mse(maxpool2d(x, 2, 2), target); };
        {
            Graph g;
            auto xn = g.parameter(x);
            auto loss = g.mse(g.maxpool2d(xn, 2, 2), g.input(target));
            g.backward(loss);
            std::uniform_int_distribution<int64_t> pick(0, x.size() - 1);
            for (int probe = 0; probe < 8; ++probe) {
                int64_t i = pick(rng);
                check_close(g.grad(xn)[i], fd_grad(x, i, pool_loss));
            }
        }

        Tensor xf = random_tensor({3, 4}, rng);
        Tensor wf = random_tensor({2, 4}, rng);
        Tensor bf = random_tensor({2}, rng);
        Tensor tf = random_tensor({3, 2}, rng);
        auto fc_loss = [&]() { return mse(relu(fc(xf, wf, bf)), tf); };
        {
            Graph g;
            auto xn = g.parameter(xf);
            auto wn = g.parameter(wf);
            auto bn = g.parameter(bf);
            auto loss = g.mse(g.relu(g.fc(xn, wn, bn)), g.input(tf));
            g.backward(loss);
            for (int64_t i = 0; i < xf.size(); ++i)
                check_close(g.grad(xn)[i], fd_grad(xf, i, fc_loss));
            for (int64_t i = 0; i < wf.size(); ++i)
                check_close(g.grad(wn)[i], fd_grad(wf, i, fc_loss));
            for (int64_t i = 0; i < bf.size(); ++i)
                check_close(g.grad(bn)[i], fd_grad(bf, i, fc_loss));
        }
    }
}

TEST_CASE("a two-layer net matches central finite differences") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(3000 + seed);
        Tensor x = random_tensor({2, 1, 6, 6}, rng);
        Tensor w1 = random_tensor({2, 1, 3, 3}, rng);
        Tensor b1 = random_tensor({2}, rng);
        Tensor w2 = random_tensor({1, 2 * 3 * 3}, rng);
        Tensor b2 = random_tensor({1}, rng);
        Tensor target = random_tensor({2, 1}, rng);

        auto loss_fn = [&]() {
            Tensor h = relu(conv2d(x, w1, b1, 1, 1));
            h = maxpool2d(h, 2, 2);
            Tensor flat({2, 2 * 3 * 3}, h.data);
            return mse(fc(flat, w2, b2), target);
        };

        Graph g;
        auto w1n = g.parameter(w1);
        auto b1n = g.parameter(b1);
        auto w2n = g.parameter(w2);
        auto b2n = g.parameter(b2);
        auto h = g.maxpool2d(g.relu(g.conv2d(g.input(x), w1n, b1n, 1, 1)), 2, 2);
        h = g.reshape(h, {2, 2 * 3 * 3});
        auto loss = g.mse(g.fc(h, w2n, b2n), g.input(target));
        g.backward(loss);
        CHECK(g.value(loss)[0] == Catch::Approx(loss_fn()).margin(1e-12));

        std::uniform_int_distribution<int64_t> pick1(0, w1.size() - 1), pick2(0, w2.size() - 1);
        for (int probe = 0; probe < 5; ++probe) {
            int64_t i1 = pick1(rng);
            check_close(g.grad(w1n)[i1], fd_grad(w1, i1, loss_fn));
            int64_t i2 = pick2(rng);
            check_close(g.grad(w2n)[i2], fd_grad(w2, i2, loss_fn));
        }
        check_close(g.grad(b1n)[0], fd_grad(b1, 0, loss_fn));
        check_close(g.grad(b2n)[0], fd_grad(b2, 0, loss_fn));
    }
}

TEST_CASE("he_uniform init is seeded and bounded") {
    std::mt19937_64 a(9), b(9);
    Tensor t1 = he_uniform<double>({4, 4}, 16, a);
    Tensor t2 = he_uniform<double>({4, 4}, 16, b);
    REQUIRE(t1.data == t2.data);
    double limit = std::sqrt(6.0 / 16.0);
    for (double v : t1.data) {
        REQUIRE(v >= -limit);
        REQUIRE(v <= limit);
    }
}
