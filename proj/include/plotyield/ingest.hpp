#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "plotyield/csv.hpp"
#include "plotyield/error.hpp"

namespace plotyield {

enum class CameraSide { left, right };
enum class RowSide { A, B };

inline std::string to_string(CameraSide s) { return s == CameraSide::left ? "left" : "right"; }
inline std::string to_string(RowSide s) { return s == RowSide::A ? "A" : "B"; }

inline CameraSide camera_side_from_string(const std::string& s) {
    if (s == "left") return CameraSide::left;
    if (s == "right") return CameraSide::right;
    fail("camera_side", "camera_side must be 'left' or 'right', got '" + s + "'");
}

inline RowSide row_side_from_string(const std::string& s) {
    if (s == "A") return RowSide::A;
    if (s == "B") return RowSide::B;
    fail("row_side", "side must be 'A' or 'B', got '" + s + "'");
}

struct FrameRecord {
    std::string path;
    int64_t timestamp_ms = 0;
    std::string collection_id;
    CameraSide camera = CameraSide::left;
};

struct PlotWindow {
    std::string plot_id;
    int row = 1;  // 1 or 2
    RowSide side = RowSide::A;
    std::string collection_id;
    int64_t start_ms = 0;
    int64_t stop_ms = 0;
};

// Frames of one plot, grouped by (row, side) and sorted by timestamp.
struct PlotFrameSet {
    std::string plot_id;
    std::array<std::array<std::vector<FrameRecord>, 2>, 2> sequences;  // [row-1][side]

    std::vector<FrameRecord>& sequence(int row, RowSide side) {
        return sequences[row - 1][static_cast<int>(side)];
    }
    const std::vector<FrameRecord>& sequence(int row, RowSide side) const {
        return sequences[row - 1][static_cast<int>(side)];
    }
};

struct Assignment {
    std::map<std::string, PlotFrameSet> plots;
    std::vector<FrameRecord> unassigned;
};

namespace detail {

inline bool frame_order(const FrameRecord& a, const FrameRecord& b) {
    if (a.timestamp_ms != b.timestamp_ms) return a.timestamp_ms < b.timestamp_ms;
    return a.path < b.path;
}

}  // namespace detail

// Assigns each frame to the plot window covering its timestamp (same
// collection, half-open [start, stop)). Windows sharing a (collection, row,
// side) must not overlap. If windows of different rows/sides of one collection
// overlap, the earliest-starting window wins (ties by plot id, row, side), so
// every frame lands in exactly one place. Output is independent of the input
// frame order.
inline Assignment assign_frames(const std::vector<FrameRecord>& frames,
                                const std::vector<PlotWindow>& windows) {
    for (const auto& w : windows)
        require(w.start_ms < w.stop_ms, "window_range",
                "window for plot '" + w.plot_id + "' has start >= stop");

    // overlap validation per (collection, row, side)
    std::map<std::tuple<std::string, int, int>, std::vector<const PlotWindow*>> lanes;
    for (const auto& w : windows)
        lanes[{w.collection_id, w.row, static_cast<int>(w.side)}].push_back(&w);
    for (auto& [key, lane] : lanes) {
        std::sort(lane.begin(), lane.end(), [](const PlotWindow* a, const PlotWindow* b) {
            return a->start_ms < b->start_ms;
        });
        for (size_t i = 1; i < lane.size(); ++i) {
            if (lane[i]->start_ms < lane[i - 1]->stop_ms)
                fail("window_overlap",
                     "overlapping windows in collection '" + lane[i]->collection_id +
                         "' row " + std::to_string(lane[i]->row) + " side " +
                         to_string(lane[i]->side) + ": plots '" + lane[i - 1]->plot_id +
                         "' and '" + lane[i]->plot_id + "'");
        }
    }

    std::map<std::string, std::vector<const PlotWindow*>> by_collection;
    for (const auto& w : windows) by_collection[w.collection_id].push_back(&w);

    Assignment out;
    for (const auto& f : frames) {
        const PlotWindow* best = nullptr;
        auto it = by_collection.find(f.collection_id);
        if (it != by_collection.end()) {
            for (const PlotWindow* w : it->second) {
                if (f.timestamp_ms < w->start_ms || f.timestamp_ms >= w->stop_ms) continue;
                if (!best ||
                    std::tie(w->start_ms, w->plot_id, w->row, w->side) <
                        std::tie(best->start_ms, best->plot_id, best->row, best->side))
                    best = w;
            }
        }
        if (!best) {
            out.unassigned.push_back(f);
            continue;
        }
        auto& set = out.plots[best->plot_id];
        set.plot_id = best->plot_id;
        set.sequence(best->row, best->side).push_back(f);
    }

    for (auto& [id, set] : out.plots)
        for (auto& per_row : set.sequences)
            for (auto& seq : per_row) std::sort(seq.begin(), seq.end(), detail::frame_order);
    std::sort(out.unassigned.begin(), out.unassigned.end(), detail::frame_order);
    return out;
}

// Moisture-normalized yield in t/ha: dry-matter-equivalent mass at the 13%
// moisture basis, divided by plot area, kg/m^2 -> t/ha is a factor of 10.
inline double normalize_yield(double mass_kg, double moisture, double area_m2) {
    require(mass_kg >= 0, "yield_mass", "harvested mass must be >= 0");
    require(moisture >= 0 && moisture < 1, "yield_moisture", "moisture must be in [0, 1)");
    require(area_m2 > 0, "yield_area", "plot area must be positive");
    constexpr double kMoistureBasis = 0.13;
    return mass_kg * (1.0 - moisture) / (1.0 - kMoistureBasis) / area_m2 * 10.0;
}

struct PlotYieldRecord {
    std::string plot_id;
    int range = 0;
    int pass = 0;
    double mass_kg = 0;
    double moisture = 0;  // fraction
    double area_m2 = 0;
    double yield_tha = 0;
    double estimated_tsc = 0;
    double estimated_yield_tha = 0;
    double adjusted_yield_tha = 0;
    double adjusted_tsc = 0;
    double adjusted_estimated_yield_tha = 0;
};

// frames.csv: frame_path,timestamp_ms,collection_id,camera_side
inline std::vector<FrameRecord> read_frames_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int c_path = t.column("frame_path");
    int c_ts = t.column("timestamp_ms");
    int c_coll = t.column("collection_id");
    int c_side = t.column("camera_side");
    std::vector<FrameRecord> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        FrameRecord f;
        f.path = r[c_path];
        require(!f.path.empty(), "frame_path", "frame_path must be nonempty");
        f.timestamp_ms = parse_int(r[c_ts], "timestamp_ms");
        require(f.timestamp_ms >= 0, "frame_timestamp", "timestamp_ms must be >= 0");
        f.collection_id = r[c_coll];
        f.camera = camera_side_from_string(r[c_side]);
        out.push_back(std::move(f));
    }
    return out;
}

// windows.csv: plot_id,row,side,collection_id,start_ms,stop_ms
inline std::vector<PlotWindow> read_windows_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int c_plot = t.column("plot_id");
    int c_row = t.column("row");
    int c_side = t.column("side");
    int c_coll = t.column("collection_id");
    int c_start = t.column("start_ms");
    int c_stop = t.column("stop_ms");
    std::vector<PlotWindow> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        PlotWindow w;
        w.plot_id = r[c_plot];
        w.row = static_cast<int>(parse_int(r[c_row], "row"));
        require(w.row == 1 || w.row == 2, "window_row", "row must be 1 or 2");
        w.side = row_side_from_string(r[c_side]);
        w.collection_id = r[c_coll];
        w.start_ms = parse_int(r[c_start], "start_ms");
        w.stop_ms = parse_int(r[c_stop], "stop_ms");
        out.push_back(std::move(w));
    }
    return out;
}

// yields.csv: plot_id,range,pass,mass_kg,moisture_pct,area_m2
inline std::vector<PlotYieldRecord> read_yields_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int c_plot = t.column("plot_id");
    int c_range = t.column("range");
    int c_pass = t.column("pass");
    int c_mass = t.column("mass_kg");
    int c_moist = t.column("moisture_pct");
    int c_area = t.column("area_m2");
    std::vector<PlotYieldRecord> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        PlotYieldRecord y;
        y.plot_id = r[c_plot];
        y.range = static_cast<int>(parse_int(r[c_range], "range"));
        y.pass = static_cast<int>(parse_int(r[c_pass], "pass"));
        y.mass_kg = parse_double(r[c_mass], "mass_kg");
        y.moisture = parse_double(r[c_moist], "moisture_pct") / 100.0;
        y.area_m2 = parse_double(r[c_area], "area_m2");
        y.yield_tha = normalize_yield(y.mass_kg, y.moisture, y.area_m2);
        out.push_back(std::move(y));
    }
    return out;
}

}  // namespace plotyield
