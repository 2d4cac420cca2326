#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "plotyield/yieldnet.hpp"

using namespace plotyield;

namespace {

TensorT<double> random_map(std::vector<int> shape, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    auto t = TensorT<double>::zeros(std::move(shape));
    for (auto& v : t.data) v = u(rng);
    return t;
}

std::vector<TensorT<double>> maps_of(const TensorT<double>& m, int n) {
    return std::vector<TensorT<double>>(static_cast<size_t>(n), m);
}

Image random_plot_image(int w, int h, uint64_t seed) {
    Image img(w, h, 3);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> uv(0.0f, 1.0f);
    for (auto& v : img.data) v = uv(rng);
    return img;
}

// Forward reimplementation with plain nested loops, independent of the
// tensornet kernels, used as the oracle for predict_yield.
double naive_yrm_forward(const YieldRegressionModuleT<double>& yrm,
                         const TensorT<double>& fused) {
    const auto& params = yrm.named_parameters();
    const TensorT<double>&cw = params[0].second, &cb = params[1].second;
    const TensorT<double>&w1 = params[2].second, &b1 = params[3].second;
    const TensorT<double>&w2 = params[4].second, &b2 = params[5].second;
    const TensorT<double>&w3 = params[6].second, &b3 = params[7].second;

    const int C = fused.dim(0), H = fused.dim(1), W = fused.dim(2);
    const int CO = cw.dim(0);
    // conv 3x3 stride 1 pad 1 + relu
    std::vector<double> conv(static_cast<size_t>(CO) * H * W, 0.0);
    for (int co = 0; co < CO; ++co)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double acc = cb[co];
                for (int ci = 0; ci < C; ++ci)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            int sy = y - 1 + ky, sx = x - 1 + kx;
                            if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                            acc += cw.data[((static_cast<int64_t>(co) * C + ci) * 3 + ky) * 3 + kx] *
                                   fused.data[(static_cast<int64_t>(ci) * H + sy) * W + sx];
                        }
                conv[(static_cast<size_t>(co) * H + y) * W + x] = acc > 0 ? acc : 0.0;
            }
    // maxpool 2x2 stride 2
    const int PH = H / 2, PW = W / 2;
    std::vector<double> pooled(static_cast<size_t>(CO) * PH * PW);
    for (int co = 0; co < CO; ++co)
        for (int y = 0; y < PH; ++y)
            for (int x = 0; x < PW; ++x) {
                double best = -1e300;
                for (int ky = 0; ky < 2; ++ky)
                    for (int kx = 0; kx < 2; ++kx)
                        best = std::max(best,
                                        conv[(static_cast<size_t>(co) * H + 2 * y + ky) * W +
                                             2 * x + kx]);
                pooled[(static_cast<size_t>(co) * PH + y) * PW + x] = best;
            }
    // fc1 relu, fc2 relu, fc3
    auto dense = [](const std::vector<double>& in, const TensorT<double>& w,
                    const TensorT<double>& b, bool relu_after) {
        std::vector<double> out(static_cast<size_t>(w.dim(0)));
        for (int o = 0; o < w.dim(0); ++o) {
            double acc = b[o];
            for (int i = 0; i < w.dim(1); ++i)
                acc += w.data[static_cast<int64_t>(o) * w.dim(1) + i] * in[static_cast<size_t>(i)];
            out[static_cast<size_t>(o)] = relu_after && acc < 0 ? 0.0 : acc;
        }
        return out;
    };
    auto h1 = dense(pooled, w1, b1, true);
    auto h2 = dense(h1, w2, b2, true);
    auto h3 = dense(h2, w3, b3, false);
    return h3[0];
}

}  // namespace

TEST_CASE("fuse sums per side and concatenates channels") {
    auto zero = TensorT<double>::zeros({3, 4, 5});
    auto fused_zero = fuse(maps_of(zero, 10), maps_of(zero, 10));
    REQUIRE(fused_zero.shape == std::vector<int>({6, 4, 5}));
    for (double v : fused_zero.data) REQUIRE(v == 0.0);

    std::mt19937_64 rng(5);
    auto m = random_map({3, 4, 5}, rng);
    auto fused = fuse(maps_of(m, 10), maps_of(zero, 10));
    for (int64_t i = 0; i < m.size(); ++i)
        REQUIRE(fused.data[i] == Catch::Approx(10.0 * m.data[i]).margin(1e-12));
    for (int64_t i = m.size(); i < fused.size(); ++i) REQUIRE(fused.data[i] == 0.0);
}

TEST_CASE("fuse is invariant under within-side permutation") {
    std::mt19937_64 rng(6);
    std::vector<TensorT<double>> a, b;
    for (int i = 0; i < 10; ++i) {
        a.push_back(random_map({2, 3, 3}, rng));
        b.push_back(random_map({2, 3, 3}, rng));
    }
    auto base = fuse(a, b);
    for (int trial = 0; trial < 5; ++trial) {
        auto pa = a, pb = b;
        std::shuffle(pa.begin(), pa.end(), rng);
        std::shuffle(pb.begin(), pb.end(), rng);
        auto permuted = fuse(pa, pb);
        REQUIRE(permuted.data == base.data);  // exact equality
    }
}

TEST_CASE("fuse scales linearly") {
    std::mt19937_64 rng(7);
    std::vector<TensorT<double>> a, b;
    for (int i = 0; i < 10; ++i) {
        a.push_back(random_map({2, 3, 3}, rng));
        b.push_back(random_map({2, 3, 3}, rng));
    }
    auto base = fuse(a, b);
    const double alpha = 2.5;
    for (auto* group : {&a, &b})
        for (auto& m : *group)
            for (auto& v : m.data) v *= alpha;
    auto scaled = fuse(a, b);
    for (int64_t i = 0; i < base.size(); ++i)
        REQUIRE(scaled.data[i] == Catch::Approx(alpha * base.data[i]).margin(1e-12));
}

TEST_CASE("fuse validates group sizes and shapes") {
    auto m = TensorT<double>::zeros({2, 3, 3});
    CHECK_THROWS_AS(fuse(maps_of(m, 9), maps_of(m, 10)), Error);
    auto bad = maps_of(m, 10);
    bad[3] = TensorT<double>::zeros({2, 3, 4});
    CHECK_THROWS_AS(fuse(bad, maps_of(m, 10)), Error);
}

TEST_CASE("the reference extractor halves dimensions three times") {
    ReferenceExtractorT<double> ex(32, 11);
    Image img = random_plot_image(64, 48, 3);
    auto map = ex.extract(img);
    REQUIRE(map.shape == std::vector<int>({32, 6, 8}));
    CHECK(ex.channels() == 32);
    CHECK(ex.downsample() == 8);

    // ceil division per block for non-multiple-of-8 sizes
    Image odd = random_plot_image(50, 34, 4);
    auto odd_map = ex.extract(odd);
    REQUIRE(odd_map.shape == std::vector<int>({32, 5, 7}));

    // stateless: same input twice gives the same output
    auto again = ex.extract(img);
    REQUIRE(again.data == map.data);
}

TEST_CASE("zero images through a zero-bias regressor predict 0") {
    ReferenceExtractorT<double> ex(8, 1);
    PlotImages plot;
    for (int i = 0; i < 10; ++i) {
        plot.side_a.push_back(Image(32, 32, 3, 0.0f));
        plot.side_b.push_back(Image(32, 32, 3, 0.0f));
    }
    YieldRegressionModuleT<double> yrm(16, 4, 4, {}, 2);
    CHECK(predict_yield(plot, ex, yrm) == 0.0);
}

TEST_CASE("prediction is invariant under within-side sample permutation") {
    ReferenceExtractorT<double> ex(8, 21);
    PlotImages plot;
    for (int i = 0; i < 10; ++i) {
        plot.side_a.push_back(random_plot_image(32, 32, 100 + i));
        plot.side_b.push_back(random_plot_image(32, 32, 200 + i));
    }
    YieldRegressionModuleT<double> yrm(16, 4, 4, {}, 3);
    double base = predict_yield(plot, ex, yrm);

    std::mt19937_64 rng(13);
    PlotImages shuffled = plot;
    std::shuffle(shuffled.side_a.begin(), shuffled.side_a.end(), rng);
    std::shuffle(shuffled.side_b.begin(), shuffled.side_b.end(), rng);
    CHECK(predict_yield(shuffled, ex, yrm) == base);
}

TEST_CASE("regressor forward matches an independent naive reimplementation") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        YieldRegressorConfig cfg;
        cfg.conv_out = 6;
        cfg.fc1_width = 10;
        cfg.fc2_width = 5;
        YieldRegressionModuleT<double> yrm(4, 6, 6, cfg, 31 + trial);
        auto fused = random_map({4, 6, 6}, rng, 2.0);
        double got = yrm.forward(fused);
        double want = naive_yrm_forward(yrm, fused);
        REQUIRE(std::abs(got - want) <= 1e-10 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("training on already-fitted targets keeps the loss at zero") {
    std::mt19937_64 rng(19);
    std::vector<TensorT<double>> fused;
    YieldRegressionModuleT<double> yrm(4, 4, 4, {4, 8, 4}, 5);
    std::vector<double> targets;
    for (int i = 0; i < 6; ++i) {
        fused.push_back(random_map({4, 4, 4}, rng));
        targets.push_back(yrm.forward(fused.back()));
    }
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    auto history = train_yield_on_features(fused, targets, yrm, cfg);
    for (double l : history) CHECK(l <= 1e-12);
}

TEST_CASE("training converges on a realizable linear task") {
    // targets = k * mean(fused) + b, a function the head can approximate
    std::mt19937_64 rng(23);
    std::vector<TensorT<double>> fused;
    std::vector<double> targets;
    for (int i = 0; i < 64; ++i) {
        auto m = random_map({4, 4, 4}, rng, 1.0);
        double mean = 0;
        for (double v : m.data) mean += v;
        mean /= static_cast<double>(m.size());
        fused.push_back(std::move(m));
        targets.push_back(2.0 * mean + 1.0);
    }
    YieldRegressionModuleT<double> yrm(4, 4, 4, {8, 16, 8}, 29);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 8;
    cfg.lr = 1e-3;
    cfg.seed = 7;
    auto history = train_yield_on_features(fused, targets, yrm, cfg);
    REQUIRE(history.size() == 50);
    CHECK(history.back() < 0.1 * history.front());
}

TEST_CASE("training histories are reproducible for a fixed seed") {
    auto run = [](uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::vector<TensorT<double>> fused;
        std::vector<double> targets;
        for (int i = 0; i < 12; ++i) {
            fused.push_back(random_map({2, 4, 4}, rng));
            targets.push_back(static_cast<double>(i % 5));
        }
        YieldRegressionModuleT<double> yrm(2, 4, 4, {4, 8, 4}, 77);
        TrainConfig cfg;
        cfg.epochs = 5;
        cfg.batch_size = 8;
        cfg.lr = 1e-3;
        cfg.seed = 99;
        auto history = train_yield_on_features(fused, targets, yrm, cfg);
        std::stringstream ss;
        save_checkpoint(ss, yrm.named_parameters());
        return std::make_pair(history, ss.str());
    };
    auto [h1, p1] = run(4);
    auto [h2, p2] = run(4);
    REQUIRE(h1 == h2);        // bitwise-identical loss history
    REQUIRE(p1 == p2);        // bitwise-identical parameters
}

TEST_CASE("train_yield freezes the extractor bit-for-bit") {
    ReferenceExtractorT<double> ex(4, 51);
    std::stringstream before;
    save_checkpoint(before, ex.named_parameters());

    std::vector<PlotTrainExample<double>> dataset;
    std::mt19937_64 rng(31);
    for (int plot = 0; plot < 4; ++plot) {
        PlotTrainExample<double> exm;
        for (int i = 0; i < 10; ++i) {
            exm.images.side_a.push_back(random_plot_image(24, 24, rng()));
            exm.images.side_b.push_back(random_plot_image(24, 24, rng()));
        }
        exm.target = 2.0 + plot;
        dataset.push_back(std::move(exm));
    }
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    auto trained = train_yield(dataset, ex, cfg);
    REQUIRE(trained.epoch_loss.size() == 2);

    std::stringstream after;
    save_checkpoint(after, ex.named_parameters());
    REQUIRE(before.str() == after.str());
}

TEST_CASE("train_yield rejects an empty dataset") {
    ReferenceExtractorT<double> ex(4, 1);
    CHECK_THROWS_AS(train_yield<double>({}, ex), Error);
}

TEST_CASE("full plot-level loss gradients match finite differences") {
    std::mt19937_64 rng(37);
    std::vector<TensorT<double>> fused;
    std::vector<double> targets;
    for (int i = 0; i < 3; ++i) {
        fused.push_back(random_map({2, 4, 4}, rng));
        targets.push_back(1.0 + i);
    }
    YieldRegressionModuleT<double> yrm(2, 4, 4, {3, 6, 4}, 41);

    const int b = 3;
    TensorT<double> batch = TensorT<double>::zeros({b, 2, 4, 4});
    TensorT<double> target = TensorT<double>::zeros({b, 1});
    for (int i = 0; i < b; ++i) {
        std::copy(fused[i].data.begin(), fused[i].data.end(),
                  batch.data.begin() + i * fused[i].size());
        target.data[i] = targets[i];
    }

    GraphT<double> g;
    std::vector<GraphT<double>::NodeId> pids;
    auto out = yrm.forward_graph(g, g.input(batch), pids);
    auto loss = g.mse(out, g.input(target));
    g.backward(loss);

    auto params = yrm.parameter_ptrs();
    auto loss_fn = [&]() {
        double acc = 0;
        for (int i = 0; i < b; ++i) {
            double d = yrm.forward(fused[i]) - targets[i];
            acc += d * d;
        }
        return acc / b;
    };
    for (size_t pi = 0; pi < params.size(); ++pi) {
        std::uniform_int_distribution<int64_t> pick(0, params[pi]->size() - 1);
        for (int probe = 0; probe < 4; ++probe) {
            int64_t i = pick(rng);
            double orig = (*params[pi])[i];
            const double h = 1e-5;
            (*params[pi])[i] = orig + h;
            double up = loss_fn();
            (*params[pi])[i] = orig - h;
            double down = loss_fn();
            (*params[pi])[i] = orig;
            double fd = (up - down) / (2 * h);
            double got = g.grad(pids[pi])[i];
            double scale = std::max({std::abs(fd), std::abs(got), 1e-6});
            REQUIRE(std::abs(fd - got) / scale < 1e-4);
        }
    }
}

TEST_CASE("regressor checkpoints restore the exact model") {
    YieldRegressionModuleT<double> yrm(4, 6, 6, {6, 12, 6}, 61);
    std::mt19937_64 rng(67);
    auto fused = random_map({4, 6, 6}, rng);
    double before = yrm.forward(fused);

    auto path = std::filesystem::temp_directory_path() / "plotyield_yrm.ckpt";
    yrm.save(path.string());
    auto loaded = YieldRegressionModuleT<double>::load(path.string());
    std::filesystem::remove(path);

    // f32 storage: values round-trip within float precision
    double after = loaded.forward(fused);
    CHECK(after == Catch::Approx(before).epsilon(1e-5));
    CHECK(loaded.in_channels() == 4);
    CHECK(loaded.config().conv_out == 6);
}
