#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "plotyield/ingest.hpp"

using namespace plotyield;

namespace {

FrameRecord frame(const std::string& path, int64_t ts, const std::string& coll = "c0") {
    return {path, ts, coll, CameraSide::left};
}

PlotWindow window(const std::string& plot, int64_t start, int64_t stop,
                  const std::string& coll = "c0", int row = 1, RowSide side = RowSide::A) {
    return {plot, row, side, coll, start, stop};
}

}  // namespace

TEST_CASE("assign_frames sends frames to half-open windows") {
    std::vector<FrameRecord> frames{frame("f500", 500), frame("f1200", 1200),
                                    frame("f2000", 2000)};
    std::vector<PlotWindow> windows{window("A", 0, 1000), window("B", 1500, 2500)};

    Assignment out = assign_frames(frames, windows);
    REQUIRE(out.plots.count("A") == 1);
    REQUIRE(out.plots.count("B") == 1);
    REQUIRE(out.plots["A"].sequence(1, RowSide::A).size() == 1);
    CHECK(out.plots["A"].sequence(1, RowSide::A)[0].path == "f500");
    REQUIRE(out.plots["B"].sequence(1, RowSide::A).size() == 1);
    CHECK(out.plots["B"].sequence(1, RowSide::A)[0].path == "f2000");
    REQUIRE(out.unassigned.size() == 1);
    CHECK(out.unassigned[0].path == "f1200");
}

TEST_CASE("assign_frames with no frames yields empty sets") {
    Assignment out = assign_frames({}, {window("A", 0, 1000)});
    CHECK(out.plots.empty());
    CHECK(out.unassigned.empty());
}

TEST_CASE("a frame exactly at the stop boundary is unassigned") {
    Assignment out = assign_frames({frame("f", 1000)}, {window("A", 0, 1000)});
    CHECK(out.plots.empty());
    REQUIRE(out.unassigned.size() == 1);
}

TEST_CASE("overlapping windows in one lane are rejected with both plot names") {
    std::vector<PlotWindow> windows{window("P1", 0, 1000), window("P2", 900, 2000)};
    try {
        assign_frames({}, windows);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "window_overlap");
        std::string msg = e.what();
        CHECK(msg.find("P1") != std::string::npos);
        CHECK(msg.find("P2") != std::string::npos);
    }
}

TEST_CASE("windows overlapping across different lanes are allowed") {
    std::vector<PlotWindow> windows{window("P1", 0, 1000, "c0", 1, RowSide::A),
                                    window("P2", 0, 1000, "c0", 2, RowSide::B)};
    Assignment out = assign_frames({frame("f", 10)}, windows);
    // deterministic rule: earliest start, then plot id
    REQUIRE(out.plots.count("P1") == 1);
    CHECK(out.plots["P1"].sequence(1, RowSide::A).size() == 1);
    CHECK(out.plots.count("P2") == 0);
}

TEST_CASE("every frame lands exactly once and order does not matter") {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int64_t> ts(0, 9999);

    std::vector<PlotWindow> windows;
    for (int i = 0; i < 10; ++i) {
        int row = 1 + (i % 2);
        RowSide side = (i / 2) % 2 ? RowSide::A : RowSide::B;
        windows.push_back(window("P" + std::to_string(i), i * 1000, i * 1000 + 700,
                                 "c" + std::to_string(i % 2), row, side));
    }
    std::vector<FrameRecord> frames;
    for (int i = 0; i < 300; ++i)
        frames.push_back(frame("f" + std::to_string(i), ts(rng), "c" + std::to_string(i % 3)));

    Assignment a = assign_frames(frames, windows);
    size_t assigned = 0;
    for (const auto& [id, set] : a.plots)
        for (const auto& per_row : set.sequences)
            for (const auto& seq : per_row) {
                assigned += seq.size();
                for (size_t k = 1; k < seq.size(); ++k)
                    CHECK(seq[k - 1].timestamp_ms <= seq[k].timestamp_ms);
            }
    CHECK(assigned + a.unassigned.size() == frames.size());

    std::shuffle(frames.begin(), frames.end(), rng);
    Assignment b = assign_frames(frames, windows);
    REQUIRE(a.plots.size() == b.plots.size());
    for (const auto& [id, set] : a.plots) {
        REQUIRE(b.plots.count(id) == 1);
        for (int row = 1; row <= 2; ++row)
            for (RowSide side : {RowSide::A, RowSide::B}) {
                const auto& sa = set.sequence(row, side);
                const auto& sb = b.plots[id].sequence(row, side);
                REQUIRE(sa.size() == sb.size());
                for (size_t k = 0; k < sa.size(); ++k) CHECK(sa[k].path == sb[k].path);
            }
    }
}

TEST_CASE("normalize_yield matches the dry-matter formula") {
    CHECK(normalize_yield(2.0, 0.13, 4.0) == Catch::Approx(5.0).margin(1e-12));
    CHECK(normalize_yield(2.0, 0.0, 4.0) == Catch::Approx(2.0 / 0.87 / 4.0 * 10.0).margin(1e-12));
    CHECK(normalize_yield(2.0, 0.0, 4.0) == Catch::Approx(5.7471).margin(5e-5));
    CHECK(normalize_yield(0.0, 0.2, 4.0) == 0.0);
}

TEST_CASE("normalize_yield validates its inputs") {
    CHECK_THROWS_AS(normalize_yield(1.0, 0.1, 0.0), Error);
    CHECK_THROWS_AS(normalize_yield(-1.0, 0.1, 1.0), Error);
    CHECK_THROWS_AS(normalize_yield(1.0, 1.0, 1.0), Error);
}

TEST_CASE("normalize_yield is linear in mass and inverse in area") {
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> um(0.1, 10.0);
    std::uniform_real_distribution<double> uo(0.0, 0.5);
    for (int i = 0; i < 100; ++i) {
        double m = um(rng), moist = uo(rng), a = um(rng);
        double y = normalize_yield(m, moist, a);
        CHECK(normalize_yield(3.0 * m, moist, a) == Catch::Approx(3.0 * y).epsilon(1e-12));
        CHECK(normalize_yield(m, moist, 2.0 * a) == Catch::Approx(y / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("CSV manifests round trip through the readers") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "plotyield_ingest_csv";
    fs::create_directories(dir);

    {
        std::ofstream f(dir / "frames.csv");
        f << "frame_path,timestamp_ms,collection_id,camera_side\n";
        f << "imgs/a.png,0,c0,left\n";
        f << "imgs/b.png,42,c0,right\n";
    }
    auto frames = read_frames_csv((dir / "frames.csv").string());
    REQUIRE(frames.size() == 2);
    CHECK(frames[1].timestamp_ms == 42);
    CHECK(frames[1].camera == CameraSide::right);

    {
        std::ofstream f(dir / "windows.csv");
        f << "plot_id,row,side,collection_id,start_ms,stop_ms\n";
        f << "P1,1,A,c0,0,1000\n";
        f << "P1,2,B,c0,0,1000\n";
    }
    auto windows = read_windows_csv((dir / "windows.csv").string());
    REQUIRE(windows.size() == 2);
    CHECK(windows[1].row == 2);
    CHECK(windows[1].side == RowSide::B);

    {
        std::ofstream f(dir / "yields.csv");
        f << "plot_id,range,pass,mass_kg,moisture_pct,area_m2\n";
        f << "P1,3,7,2.0,13,4.0\n";
    }
    auto yields = read_yields_csv((dir / "yields.csv").string());
    REQUIRE(yields.size() == 1);
    CHECK(yields[0].range == 3);
    CHECK(yields[0].pass == 7);
    CHECK(yields[0].moisture == Catch::Approx(0.13));
    CHECK(yields[0].yield_tha == Catch::Approx(5.0).margin(1e-12));

    fs::remove_all(dir);
}

TEST_CASE("missing CSV columns are reported by name") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "plotyield_ingest_badcsv";
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "frames.csv");
        f << "frame_path,timestamp\n";
        f << "a.png,0\n";
    }
    try {
        read_frames_csv((dir / "frames.csv").string());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "csv_missing_column");
        CHECK(std::string(e.what()).find("timestamp_ms") != std::string::npos);
    }
    fs::remove_all(dir);
}
