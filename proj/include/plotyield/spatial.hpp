#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "plotyield/csv.hpp"
#include "plotyield/error.hpp"

namespace plotyield {

struct PlotCell {
    std::string plot_id;
    int range = 0;
    int pass = 0;
    double value = 0;
};

// Plots on the (range, pass) field grid; cells may be missing.
class FieldGrid {
public:
    void add(PlotCell cell) {
        auto key = std::make_pair(cell.range, cell.pass);
        if (index_.count(key))
            fail("grid_duplicate", "duplicate grid cell at range " + std::to_string(cell.range) +
                                       ", pass " + std::to_string(cell.pass));
        index_[key] = cells_.size();
        cells_.push_back(std::move(cell));
    }

    const PlotCell* at(int range, int pass) const {
        auto it = index_.find({range, pass});
        return it == index_.end() ? nullptr : &cells_[it->second];
    }

    const std::vector<PlotCell>& cells() const { return cells_; }
    size_t size() const { return cells_.size(); }

private:
    std::vector<PlotCell> cells_;
    std::map<std::pair<int, int>, size_t> index_;
};

// Neighborhood offsets of the moving grid. The default is the 5x5 window with
// the four corners and the center removed (20 offsets).
struct GridMask {
    std::vector<std::pair<int, int>> offsets;  // (d_range, d_pass)

    static GridMask default_mask() {
        GridMask m;
        for (int dr = -2; dr <= 2; ++dr)
            for (int dp = -2; dp <= 2; ++dp) {
                if (dr == 0 && dp == 0) continue;
                if (std::abs(dr) == 2 && std::abs(dp) == 2) continue;
                m.offsets.emplace_back(dr, dp);
            }
        return m;
    }

    void validate() const {
        require(!offsets.empty(), "mask_empty", "grid mask has no offsets");
        for (auto [dr, dp] : offsets)
            require(dr != 0 || dp != 0, "mask_center", "grid mask must exclude (0,0)");
    }
};

// Mean phenotype over the mask neighbors that exist in the grid; offsets that
// fall outside the field or on missing plots are dropped.
inline double moving_mean(const FieldGrid& grid, const GridMask& mask, int range, int pass) {
    mask.validate();
    require(grid.at(range, pass) != nullptr, "grid_missing_plot",
            "no plot at range " + std::to_string(range) + ", pass " + std::to_string(pass));
    double sum = 0;
    int n = 0;
    for (auto [dr, dp] : mask.offsets) {
        const PlotCell* c = grid.at(range + dr, pass + dp);
        if (!c) continue;
        sum += c->value;
        ++n;
    }
    if (n == 0)
        fail("moving_mean_empty", "no mask cell lands on an existing plot for range " +
                                      std::to_string(range) + ", pass " + std::to_string(pass));
    return sum / n;
}

struct AdjustmentResult {
    std::vector<std::string> plot_ids;
    std::vector<double> observed;
    std::vector<double> moving_means;
    std::vector<double> adjusted;
    double coefficient_b = 0;
    double grand_mean_x = 0;
    bool zero_variance = false;  // all moving means equal; adjustment is the identity
};

// Moving-grid adjustment: p_adj = p_obs - b * (x_i - x_bar) with b the OLS
// slope of the observed values on their moving means.
inline AdjustmentResult adjust(const FieldGrid& grid, const GridMask& mask = GridMask::default_mask()) {
    require(grid.size() >= 3, "too_few_plots", "adjustment needs at least 3 plots");

    AdjustmentResult res;
    res.plot_ids.reserve(grid.size());
    for (const auto& cell : grid.cells()) {
        res.plot_ids.push_back(cell.plot_id);
        res.observed.push_back(cell.value);
        res.moving_means.push_back(moving_mean(grid, mask, cell.range, cell.pass));
    }

    const double n = static_cast<double>(grid.size());
    double x_bar = 0, p_bar = 0;
    for (size_t i = 0; i < res.observed.size(); ++i) {
        x_bar += res.moving_means[i];
        p_bar += res.observed[i];
    }
    x_bar /= n;
    p_bar /= n;

    double sxx = 0, sxp = 0;
    for (size_t i = 0; i < res.observed.size(); ++i) {
        double dx = res.moving_means[i] - x_bar;
        sxx += dx * dx;
        sxp += dx * (res.observed[i] - p_bar);
    }

    res.grand_mean_x = x_bar;
    // relative tolerance so float-identical inputs count as constant
    const double eps = 1e-12 * (std::abs(x_bar) + 1.0);
    if (sxx <= n * eps * eps) {
        res.zero_variance = true;
        res.coefficient_b = 0.0;
    } else {
        res.coefficient_b = sxp / sxx;
    }

    res.adjusted.reserve(res.observed.size());
    for (size_t i = 0; i < res.observed.size(); ++i)
        res.adjusted.push_back(res.observed[i] -
                               res.coefficient_b * (res.moving_means[i] - x_bar));
    return res;
}

// grid CSV: plot_id,range,pass,value
inline FieldGrid read_grid_csv(const std::string& path, const std::string& value_column = "value") {
    CsvTable t = read_csv(path);
    int c_plot = t.column("plot_id");
    int c_range = t.column("range");
    int c_pass = t.column("pass");
    int c_val = t.column(value_column);
    FieldGrid grid;
    for (const auto& r : t.rows) {
        PlotCell cell;
        cell.plot_id = r[c_plot];
        cell.range = static_cast<int>(parse_int(r[c_range], "range"));
        cell.pass = static_cast<int>(parse_int(r[c_pass], "pass"));
        cell.value = parse_double(r[c_val], value_column);
        grid.add(std::move(cell));
    }
    return grid;
}

inline void write_adjusted_csv(const std::string& path, const FieldGrid& grid,
                               const AdjustmentResult& res) {
    std::vector<std::vector<std::string>> rows;
    char buf[64];
    for (size_t i = 0; i < grid.cells().size(); ++i) {
        const auto& cell = grid.cells()[i];
        std::vector<std::string> row{cell.plot_id, std::to_string(cell.range),
                                     std::to_string(cell.pass)};
        std::snprintf(buf, sizeof buf, "%.9g", cell.value);
        row.push_back(buf);
        std::snprintf(buf, sizeof buf, "%.9g", res.adjusted[i]);
        row.push_back(buf);
        std::snprintf(buf, sizeof buf, "%.9g", res.moving_means[i]);
        row.push_back(buf);
        rows.push_back(std::move(row));
    }
    write_csv(path, {"plot_id", "range", "pass", "value", "adjusted", "moving_mean"}, rows);
}

}  // namespace plotyield
