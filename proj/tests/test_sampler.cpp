#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "plotyield/sampler.hpp"

using namespace plotyield;

namespace {

PlotFrameSet make_set(const std::string& id, int len1a, int len1b, int len2a, int len2b) {
    PlotFrameSet ps;
    ps.plot_id = id;
    auto fill = [&](int row, RowSide side, int n) {
        for (int i = 0; i < n; ++i)
            ps.sequence(row, side).push_back(
                {id + "_" + std::to_string(row) + to_string(side) + "_" + std::to_string(i),
                 static_cast<int64_t>(i), "c0", CameraSide::left});
    };
    fill(1, RowSide::A, len1a);
    fill(1, RowSide::B, len1b);
    fill(2, RowSide::A, len2a);
    fill(2, RowSide::B, len2b);
    return ps;
}

}  // namespace

TEST_CASE("splitter_indices picks the middle five splitters") {
    CHECK(splitter_indices(80) == std::array<int, 5>{20, 30, 40, 50, 60});
    CHECK(splitter_indices(8) == std::array<int, 5>{2, 3, 4, 5, 6});
    CHECK(splitter_indices(3) == std::array<int, 5>{1, 1, 2, 2, 2});
    CHECK_THROWS_AS(splitter_indices(0), Error);
}

TEST_CASE("splitter_indices stays in bounds, sorted, and away from the outer splitters") {
    for (int n = 1; n <= 500; ++n) {
        auto idx = splitter_indices(n);
        for (size_t i = 0; i < idx.size(); ++i) {
            CHECK(idx[i] >= 0);
            CHECK(idx[i] <= n - 1);
            if (i) CHECK(idx[i - 1] <= idx[i]);
        }
        if (n >= 8) {
            int first_splitter = static_cast<int>(std::floor(1.0 * n / 8.0 + 0.5));
            int last_splitter = static_cast<int>(std::floor(7.0 * n / 8.0 + 0.5));
            CHECK(idx.front() > first_splitter);
            CHECK(idx.back() < last_splitter);
        }
    }
}

TEST_CASE("sample_plot takes five frames per sequence, ten per side") {
    PlotFrameSet ps = make_set("P", 80, 80, 80, 80);
    PlotSample s = sample_plot(ps);
    REQUIRE(s.side(RowSide::A).size() == 10);
    REQUIRE(s.side(RowSide::B).size() == 10);
    // row 1 then row 2, each at indices 20..60 step 10
    for (int i = 0; i < 5; ++i) {
        CHECK(s.side(RowSide::A)[i].path == "P_1A_" + std::to_string(20 + 10 * i));
        CHECK(s.side(RowSide::A)[5 + i].path == "P_2A_" + std::to_string(20 + 10 * i));
        CHECK(s.side(RowSide::B)[i].path == "P_1B_" + std::to_string(20 + 10 * i));
        CHECK(s.side(RowSide::B)[5 + i].path == "P_2B_" + std::to_string(20 + 10 * i));
    }
}

TEST_CASE("length-one sequences repeat their only frame") {
    PlotSample s = sample_plot(make_set("P", 1, 1, 1, 1));
    REQUIRE(s.side(RowSide::A).size() == 10);
    for (const auto& f : s.side(RowSide::A)) CHECK(f.timestamp_ms == 0);
}

TEST_CASE("sample_plot names the empty sequence in its error") {
    PlotFrameSet ps = make_set("P7", 4, 4, 0, 4);
    try {
        sample_plot(ps);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "empty_sequence");
        std::string msg = e.what();
        CHECK(msg.find("P7") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
        CHECK(msg.find("A") != std::string::npos);
    }
}

TEST_CASE("sample arity is 20 (10 per side) for random sequence lengths") {
    std::mt19937_64 rng(71);
    std::uniform_int_distribution<int> len(1, 500);
    for (int trial = 0; trial < 300; ++trial) {
        PlotFrameSet ps = make_set("P", len(rng), len(rng), len(rng), len(rng));
        PlotSample s = sample_plot(ps);
        REQUIRE(s.side(RowSide::A).size() == 10);
        REQUIRE(s.side(RowSide::B).size() == 10);
    }
}
