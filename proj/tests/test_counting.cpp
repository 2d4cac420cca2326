#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "plotyield/counting.hpp"
#include "plotyield/synthfield.hpp"

using namespace plotyield;

TEST_CASE("count_points thresholds on confidence") {
    PointSet empty;
    CHECK(count_points(empty, 0.5) == 0);

    PointSet ps;
    ps.points = {{1, 1, 0.9}, {2, 2, 0.4}};
    CHECK(count_points(ps, 0.5) == 1);
    CHECK(count_points(ps, 0.0) == 2);
    CHECK_THROWS_AS(count_points(ps, 1.5), Error);
}

TEST_CASE("count_points is non-increasing in the threshold") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PointSet ps;
    for (int i = 0; i < 200; ++i) ps.points.push_back({0, 0, u(rng)});
    int prev = count_points(ps, 0.0);
    for (double t = 0.05; t <= 1.0; t += 0.05) {
        int cur = count_points(ps, t);
        CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("blob_count on a black image is zero") {
    Image black(40, 30, 1, 0.0f);
    CHECK(blob_count(black, 0.5f, 1) == 0);
}

TEST_CASE("blob_count recovers disjoint synthetic seeds") {
    auto synth = gen_plot_images(7, 99);
    CHECK(blob_count(synth.image, 0.5f, 5) == 7);
}

TEST_CASE("two overlapping ellipses merge into one blob") {
    PlotImageConfig cfg;
    std::vector<SeedEllipse> seeds{{40, 40, 5, 4}, {44, 42, 5, 5}};
    Image img = render_seed_image(seeds, cfg, 1);
    CHECK(blob_count(img, 0.5f, 5) == 1);
}

TEST_CASE("min_area filters small components") {
    Image img(20, 20, 1, 0.0f);
    img.at(0, 3, 3) = 1.0f;  // single-pixel speck
    for (int y = 10; y < 14; ++y)
        for (int x = 10; x < 14; ++x) img.at(0, y, x) = 1.0f;
    CHECK(blob_count(img, 0.5f, 1) == 2);
    CHECK(blob_count(img, 0.5f, 5) == 1);
}

TEST_CASE("8-connectivity joins diagonal pixels") {
    Image img(8, 8, 1, 0.0f);
    img.at(0, 2, 2) = 1.0f;
    img.at(0, 3, 3) = 1.0f;
    CHECK(blob_count(img, 0.5f, 1) == 1);
}

TEST_CASE("blob_count is invariant under in-bounds translation") {
    auto synth = gen_plot_images(5, 123);
    const Image& img = synth.image;
    int base = blob_count(img, 0.5f, 5);

    Image shifted(img.width, img.height, img.channels, 0.08f);
    const int dx = 3, dy = 2;
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y + dy < img.height; ++y)
            for (int x = 0; x + dx < img.width; ++x)
                shifted.at(c, y + dy, x + dx) = img.at(c, y, x);
    CHECK(blob_count(shifted, 0.5f, 5) == base);
}

TEST_CASE("count_metrics matches hand-computed fixtures") {
    CountMetrics perfect = count_metrics({100, 200, 300}, {100, 200, 300});
    CHECK(perfect.mse == 0.0);
    CHECK(perfect.mae == 0.0);
    REQUIRE(perfect.mape.has_value());
    CHECK(*perfect.mape == 0.0);
    REQUIRE(perfect.r2.has_value());
    CHECK(*perfect.r2 == 1.0);

    CountMetrics m = count_metrics({100, 200}, {110, 180});
    CHECK(m.mae == 15.0);
    CHECK(m.mse == 250.0);
    REQUIRE(m.mape.has_value());
    CHECK(*m.mape == Catch::Approx(10.0).margin(1e-12));
    REQUIRE(m.residuals == std::vector<double>({10.0, -20.0}));
}

TEST_CASE("a constant predictor at the truth mean scores r2 = 0") {
    std::vector<double> truth{50, 100, 150, 200};
    std::vector<double> est(4, 125.0);
    CountMetrics m = count_metrics(truth, est);
    REQUIRE(m.r2.has_value());
    CHECK(*m.r2 == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("count_metrics error paths") {
    CHECK_THROWS_AS(count_metrics({1, 2}, {1}), Error);
    CHECK_THROWS_AS(count_metrics({1}, {1}), Error);
    CHECK_THROWS_AS(count_metrics({0, 2}, {1, 2}, true), Error);
    CHECK_NOTHROW(count_metrics({0, 2}, {1, 2}, false));
    CountMetrics no_mape = count_metrics({0, 2}, {1, 2}, false);
    CHECK_FALSE(no_mape.mape.has_value());
}

TEST_CASE("negating the residuals leaves mse, mae and mape unchanged") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(50.0, 150.0);
    std::vector<double> truth, over, under;
    for (int i = 0; i < 30; ++i) {
        double t = u(rng);
        double d = u(rng) * 0.1;
        truth.push_back(t);
        over.push_back(t + d);
        under.push_back(t - d);
    }
    CountMetrics a = count_metrics(truth, over);
    CountMetrics b = count_metrics(truth, under);
    CHECK(a.mse == Catch::Approx(b.mse).epsilon(1e-12));
    CHECK(a.mae == Catch::Approx(b.mae).epsilon(1e-12));
    CHECK(*a.mape == Catch::Approx(*b.mape).epsilon(1e-12));
}

TEST_CASE("points CSV groups rows by image id") {
    namespace fs = std::filesystem;
    fs::path path = fs::temp_directory_path() / "plotyield_points.csv";
    std::vector<PointSet> sets(2);
    sets[0].image_id = "img1";
    sets[0].points = {{1.5, 2.5, 0.9}, {3.0, 4.0, 0.8}};
    sets[1].image_id = "img2";
    sets[1].points = {{5.0, 6.0, 0.7}};
    write_points_csv(path.string(), sets);
    auto back = read_points_csv(path.string());
    fs::remove(path);

    REQUIRE(back.size() == 2);
    CHECK(back[0].image_id == "img1");
    REQUIRE(back[0].points.size() == 2);
    CHECK(back[0].points[1].confidence == Catch::Approx(0.8));
    REQUIRE(back[1].points.size() == 1);
}

TEST_CASE("points CSV tolerates interleaved image ids") {
    namespace fs = std::filesystem;
    fs::path path = fs::temp_directory_path() / "plotyield_points_interleaved.csv";
    {
        std::ofstream f(path);
        f << "image_id,x,y,confidence\n";
        f << "a,1,1,0.9\n";
        f << "b,2,2,0.8\n";
        f << "a,3,3,0.7\n";
    }
    auto sets = read_points_csv(path.string());
    fs::remove(path);
    REQUIRE(sets.size() == 2);
    CHECK(sets[0].image_id == "a");
    CHECK(sets[0].points.size() == 2);
    CHECK(sets[1].points.size() == 1);
}
