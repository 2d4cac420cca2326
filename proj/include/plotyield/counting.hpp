#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plotyield/csv.hpp"
#include "plotyield/error.hpp"
#include "plotyield/image.hpp"

namespace plotyield {

struct SeedPoint {
    double x = 0;
    double y = 0;
    double confidence = 1.0;
};

struct PointSet {
    std::string image_id;
    std::vector<SeedPoint> points;
};

inline int count_points(const PointSet& ps, double threshold) {
    require(threshold >= 0.0 && threshold <= 1.0, "count_threshold",
            "confidence threshold must be in [0, 1]");
    int n = 0;
    for (const auto& p : ps.points)
        if (p.confidence >= threshold) ++n;
    return n;
}

struct Blob {
    int area = 0;
    double cx = 0;  // centroid
    double cy = 0;
};

// 8-connected components of above-threshold pixels (luma for color images),
// kept when area >= min_area. Blobs are ordered by their first pixel in
// row-major scan order.
inline std::vector<Blob> find_blobs(const Image& img, float intensity_threshold,
                                    int min_area = 1) {
    require(img.channels == 1 || img.channels == 3, "blob_channels",
            "blob detection expects a grayscale or 3-channel image");
    const int w = img.width, h = img.height;
    std::vector<uint8_t> mask(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            mask[static_cast<size_t>(y) * w + x] = luma(img, y, x) >= intensity_threshold;

    std::vector<Blob> blobs;
    std::vector<int> stack;
    for (int y0 = 0; y0 < h; ++y0)
        for (int x0 = 0; x0 < w; ++x0) {
            if (!mask[static_cast<size_t>(y0) * w + x0]) continue;
            Blob blob;
            double sx = 0, sy = 0;
            stack.push_back(y0 * w + x0);
            mask[static_cast<size_t>(y0) * w + x0] = 0;
            while (!stack.empty()) {
                int idx = stack.back();
                stack.pop_back();
                int y = idx / w, x = idx % w;
                ++blob.area;
                sx += x;
                sy += y;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = x + dx, ny = y + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        size_t ni = static_cast<size_t>(ny) * w + nx;
                        if (mask[ni]) {
                            mask[ni] = 0;
                            stack.push_back(ny * w + nx);
                        }
                    }
            }
            if (blob.area >= min_area) {
                blob.cx = sx / blob.area;
                blob.cy = sy / blob.area;
                blobs.push_back(blob);
            }
        }
    return blobs;
}

inline int blob_count(const Image& img, float intensity_threshold, int min_area = 1) {
    return static_cast<int>(find_blobs(img, intensity_threshold, min_area).size());
}

struct CountMetrics {
    double mse = 0;
    double mae = 0;
    std::optional<double> mape;  // percent; absent when not requested
    std::optional<double> r2;    // absent when the truth has zero variance
    std::vector<double> residuals;  // estimated - truth
};

inline CountMetrics count_metrics(const std::vector<double>& truth,
                                  const std::vector<double>& est, bool with_mape = true) {
    require(truth.size() == est.size(), "metrics_length",
            "truth and estimate lists must have equal length");
    require(truth.size() >= 2, "metrics_length", "metrics need at least two samples");

    CountMetrics m;
    m.residuals.reserve(truth.size());
    double sq = 0, ab = 0, pc = 0, tsum = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        double r = est[i] - truth[i];
        m.residuals.push_back(r);
        sq += r * r;
        ab += std::abs(r);
        tsum += truth[i];
        if (with_mape) {
            if (truth[i] == 0.0)
                fail("mape_zero_truth", "MAPE is undefined for a zero truth value");
            pc += std::abs(r) / std::abs(truth[i]);
        }
    }
    const double n = static_cast<double>(truth.size());
    m.mse = sq / n;
    m.mae = ab / n;
    if (with_mape) m.mape = 100.0 * pc / n;

    const double tmean = tsum / n;
    double ss_tot = 0;
    for (double t : truth) ss_tot += (t - tmean) * (t - tmean);
    if (sq == 0.0)
        m.r2 = 1.0;
    else if (ss_tot > 0.0)
        m.r2 = 1.0 - sq / ss_tot;
    return m;
}

// points.csv: image_id,x,y,confidence. Rows for one image need not be
// adjacent; sets come back in first-seen order.
inline std::vector<PointSet> read_points_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int c_id = t.column("image_id");
    int c_x = t.column("x");
    int c_y = t.column("y");
    int c_conf = t.column("confidence");
    std::vector<PointSet> out;
    std::map<std::string, size_t> index;
    for (const auto& r : t.rows) {
        const std::string& id = r[c_id];
        auto it = index.find(id);
        if (it == index.end()) {
            it = index.emplace(id, out.size()).first;
            out.push_back(PointSet{id, {}});
        }
        SeedPoint p;
        p.x = parse_double(r[c_x], "x");
        p.y = parse_double(r[c_y], "y");
        p.confidence = parse_double(r[c_conf], "confidence");
        require(p.confidence >= 0.0 && p.confidence <= 1.0, "confidence_range",
                "confidence must be in [0, 1]");
        out[it->second].points.push_back(p);
    }
    return out;
}

inline void write_points_csv(const std::string& path, const std::vector<PointSet>& sets) {
    std::vector<std::vector<std::string>> rows;
    char buf[64];
    for (const auto& ps : sets)
        for (const auto& p : ps.points) {
            std::snprintf(buf, sizeof buf, "%.3f", p.x);
            std::string xs = buf;
            std::snprintf(buf, sizeof buf, "%.3f", p.y);
            std::string ys = buf;
            std::snprintf(buf, sizeof buf, "%.4f", p.confidence);
            rows.push_back({ps.image_id, xs, ys, buf});
        }
    write_csv(path, {"image_id", "x", "y", "confidence"}, rows);
}

}  // namespace plotyield
