#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "plotyield/error.hpp"
#include "plotyield/ingest.hpp"

namespace plotyield {

// A plot's 20 representative frames, 10 per row side.
struct PlotSample {
    std::string plot_id;
    std::array<std::vector<FrameRecord>, 2> sides;  // [A, B], row 1 frames then row 2

    const std::vector<FrameRecord>& side(RowSide s) const {
        return sides[static_cast<int>(s)];
    }
};

// Positions of the five middle splitters of a sequence divided into eight
// sections by seven splitters: round(k*n/8) for k in 2..6, clamped to valid
// indices. Duplicates are kept so the result always has five entries.
inline std::array<int, 5> splitter_indices(int n) {
    require(n >= 1, "splitter_empty", "splitter_indices requires a nonempty sequence");
    std::array<int, 5> out{};
    for (int k = 2; k <= 6; ++k) {
        double pos = static_cast<double>(k) * n / 8.0;
        int idx = static_cast<int>(std::floor(pos + 0.5));  // round-half-up
        if (idx < 0) idx = 0;
        if (idx > n - 1) idx = n - 1;
        out[k - 2] = idx;
    }
    return out;
}

// Five frames from each of the four (row, side) sequences; side A is row 1
// followed by row 2, likewise side B.
inline PlotSample sample_plot(const PlotFrameSet& ps) {
    PlotSample sample;
    sample.plot_id = ps.plot_id;
    for (RowSide side : {RowSide::A, RowSide::B}) {
        auto& out = sample.sides[static_cast<int>(side)];
        for (int row = 1; row <= 2; ++row) {
            const auto& seq = ps.sequence(row, side);
            if (seq.empty())
                fail("empty_sequence", "plot '" + ps.plot_id + "' row " + std::to_string(row) +
                                           " side " + to_string(side) + " has no frames");
            for (int idx : splitter_indices(static_cast<int>(seq.size())))
                out.push_back(seq[idx]);
        }
    }
    return sample;
}

// Sample manifest rows: plot_id,side,slot,frame_path with slot 0..9 per side.
inline void write_sample_manifest_csv(const std::string& path,
                                      const std::vector<PlotSample>& samples) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : samples) {
        for (RowSide side : {RowSide::A, RowSide::B}) {
            const auto& frames = s.side(side);
            for (size_t slot = 0; slot < frames.size(); ++slot)
                rows.push_back({s.plot_id, to_string(side), std::to_string(slot),
                                frames[slot].path});
        }
    }
    write_csv(path, {"plot_id", "side", "slot", "frame_path"}, rows);
}

struct SampleManifestRow {
    std::string plot_id;
    RowSide side = RowSide::A;
    int slot = 0;
    std::string frame_path;
};

inline std::vector<SampleManifestRow> read_sample_manifest_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int c_plot = t.column("plot_id");
    int c_side = t.column("side");
    int c_slot = t.column("slot");
    int c_path = t.column("frame_path");
    std::vector<SampleManifestRow> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        SampleManifestRow row;
        row.plot_id = r[c_plot];
        row.side = row_side_from_string(r[c_side]);
        row.slot = static_cast<int>(parse_int(r[c_slot], "slot"));
        row.frame_path = r[c_path];
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace plotyield
