#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "plotyield/camera.hpp"
#include "plotyield/counting.hpp"
#include "plotyield/error.hpp"
#include "plotyield/image.hpp"
#include "plotyield/image_io.hpp"
#include "plotyield/ingest.hpp"
#include "plotyield/spatial.hpp"

namespace plotyield {

// ---------------------------------------------------------------------------
// Synthetic plot images: bright seed ellipses over a textured dark background,
// with the placed positions returned as ground truth.
// ---------------------------------------------------------------------------

struct PlotImageConfig {
    int width = 128;
    int height = 128;
    double radius_min = 3.0;
    double radius_max = 5.0;
    float background_base = 0.10f;
    float background_texture = 0.06f;
    float seed_intensity = 0.92f;
    bool non_overlapping = true;
    int max_attempts = 2000;
};

struct SeedEllipse {
    double cx = 0, cy = 0;
    double rx = 3, ry = 3;
};

struct SyntheticPlotImage {
    Image image;
    PointSet points;
};

// Renders axis-aligned ellipses at the given positions; the background
// texture stream is driven by texture_seed only.
inline Image render_seed_image(const std::vector<SeedEllipse>& seeds,
                               const PlotImageConfig& cfg, uint64_t texture_seed) {
    Image img(cfg.width, cfg.height, 3);
    std::mt19937_64 rng(texture_seed);
    std::uniform_real_distribution<float> tex(0.0f, cfg.background_texture);
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
            float t = tex(rng);
            img.at(0, y, x) = cfg.background_base * 0.6f + t;
            img.at(1, y, x) = cfg.background_base + t;
            img.at(2, y, x) = cfg.background_base * 0.5f + t * 0.5f;
        }
    for (const auto& s : seeds) {
        int x0 = std::max(0, static_cast<int>(std::floor(s.cx - s.rx)));
        int x1 = std::min(cfg.width - 1, static_cast<int>(std::ceil(s.cx + s.rx)));
        int y0 = std::max(0, static_cast<int>(std::floor(s.cy - s.ry)));
        int y1 = std::min(cfg.height - 1, static_cast<int>(std::ceil(s.cy + s.ry)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double dx = (x - s.cx) / s.rx;
                double dy = (y - s.cy) / s.ry;
                if (dx * dx + dy * dy > 1.0) continue;
                img.at(0, y, x) = cfg.seed_intensity;
                img.at(1, y, x) = cfg.seed_intensity;
                img.at(2, y, x) = cfg.seed_intensity * 0.55f;
            }
    }
    return img;
}

inline SyntheticPlotImage gen_plot_images(int seed_count, uint64_t rng_seed,
                                          const PlotImageConfig& cfg = {}) {
    require(seed_count >= 0, "synth_count", "seed count must be >= 0");
    std::mt19937_64 rng(rng_seed);
    const double margin = cfg.radius_max + 1.0;
    require(cfg.width > 2 * margin && cfg.height > 2 * margin, "synth_size",
            "image too small for the configured seed radius");
    std::uniform_real_distribution<double> ux(margin, cfg.width - 1 - margin);
    std::uniform_real_distribution<double> uy(margin, cfg.height - 1 - margin);
    std::uniform_real_distribution<double> ur(cfg.radius_min, cfg.radius_max);

    // disjoint 8-connected components need a > sqrt(2) px gap between rims
    const double min_dist = 2.0 * cfg.radius_max + 3.0;
    std::vector<SeedEllipse> seeds;
    for (int i = 0; i < seed_count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
            SeedEllipse s;
            s.cx = ux(rng);
            s.cy = uy(rng);
            s.rx = ur(rng);
            s.ry = ur(rng);
            if (cfg.non_overlapping) {
                bool clash = false;
                for (const auto& o : seeds) {
                    double d = std::hypot(s.cx - o.cx, s.cy - o.cy);
                    if (d < min_dist) {
                        clash = true;
                        break;
                    }
                }
                if (clash) continue;
            }
            seeds.push_back(s);
            placed = true;
            break;
        }
        if (!placed)
            fail("synth_packing", "could not place " + std::to_string(seed_count) +
                                      " non-overlapping seeds in the image");
    }

    SyntheticPlotImage out;
    out.image = render_seed_image(seeds, cfg, rng_seed ^ 0x7e39a1ull);
    for (const auto& s : seeds)
        out.points.points.push_back({s.cx, s.cy, 1.0});
    return out;
}

// ---------------------------------------------------------------------------
// Fisheye frames: seeds are placed at pinhole pixel targets inside the
// crop-safe central box and drawn at their equidistant fisheye projections,
// so the pipeline's undistort + crop stage restores them to the targets.
// ---------------------------------------------------------------------------

inline CameraIntrinsics synth_intrinsics(int width, int height) {
    CameraIntrinsics intr;
    intr.width = width;
    intr.height = height;
    intr.fx = intr.fy = 0.45 * width;
    intr.px = (width - 1) / 2.0;
    intr.py = (height - 1) / 2.0;
    return intr;
}

struct FisheyeFrame {
    Image image;
    std::vector<Vec2> pinhole_targets;  // full-frame pinhole coordinates
};

inline FisheyeFrame gen_fisheye_frame(int seed_count, uint64_t rng_seed,
                                      const PlotImageConfig& cfg, const CameraIntrinsics& intr,
                                      int crop_w, int crop_h) {
    require(seed_count >= 0, "synth_count", "seed count must be >= 0");
    const double cx = (intr.width - 1) / 2.0;
    const double cy = (intr.height - 1) / 2.0;
    const double margin = cfg.radius_max + 2.0;
    const double half_x = crop_w / 2.0 - margin;
    const double half_y = crop_h / 2.0 - margin;
    require(half_x > 0 && half_y > 0, "synth_size", "crop too small for the seed radius");

    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> ux(cx - half_x, cx + half_x);
    std::uniform_real_distribution<double> uy(cy - half_y, cy + half_y);
    std::uniform_real_distribution<double> ur(cfg.radius_min, cfg.radius_max);
    // extra slack: the fisheye map contracts radially by up to ~10% here
    const double min_dist = (2.0 * cfg.radius_max + 3.0) * 1.25;

    FisheyeFrame out;
    std::vector<SeedEllipse> drawn;
    for (int i = 0; i < seed_count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
            Vec2 target{ux(rng), uy(rng)};
            bool clash = false;
            for (const auto& t : out.pinhole_targets)
                if (std::hypot(target.x - t.x, target.y - t.y) < min_dist) {
                    clash = true;
                    break;
                }
            if (clash) continue;
            Vec3 ray{(target.x - cx) / intr.fx, (target.y - cy) / intr.fy, 1.0};
            Vec2 fish = project_fisheye(ray, intr);
            drawn.push_back({fish.x, fish.y, ur(rng), ur(rng)});
            out.pinhole_targets.push_back(target);
            placed = true;
            break;
        }
        if (!placed)
            fail("synth_packing", "could not place " + std::to_string(seed_count) +
                                      " separated seeds in the frame");
    }
    out.image = render_seed_image(drawn, cfg, rng_seed ^ 0x7e39a1ull);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic field grids with known latent decomposition.
// ---------------------------------------------------------------------------

struct TrendSpec {
    double linear_range = 0;
    double linear_pass = 0;
    double quad_range = 0;
    double quad_pass = 0;
};

struct SyntheticField {
    FieldGrid grid;
    // latent components per cell, aligned with grid.cells()
    std::vector<double> genotype;
    std::vector<double> trend;
    std::vector<double> noise;
    double base = 0;
};

// p_obs = base + genotype + trend + noise, with the trend evaluated on
// centered grid coordinates. All latent components are returned so tests can
// check against the generator's own truth.
inline SyntheticField gen_field(int n_range, int n_pass, const TrendSpec& trend,
                                double genotype_sd, double noise_sd, uint64_t seed,
                                double base = 4.0) {
    require(n_range >= 1 && n_pass >= 1, "synth_field", "field dimensions must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g_dist(0.0, genotype_sd > 0 ? genotype_sd : 1e-300);
    std::normal_distribution<double> n_dist(0.0, noise_sd > 0 ? noise_sd : 1e-300);

    SyntheticField f;
    f.base = base;
    const double cr = (n_range - 1) / 2.0;
    const double cp = (n_pass - 1) / 2.0;
    char id[32];
    for (int r = 0; r < n_range; ++r)
        for (int p = 0; p < n_pass; ++p) {
            double g = genotype_sd > 0 ? g_dist(rng) : 0.0;
            double e = noise_sd > 0 ? n_dist(rng) : 0.0;
            double t = trend.linear_range * (r - cr) + trend.linear_pass * (p - cp) +
                       trend.quad_range * (r - cr) * (r - cr) +
                       trend.quad_pass * (p - cp) * (p - cp);
            std::snprintf(id, sizeof id, "r%02dp%02d", r, p);
            PlotCell cell;
            cell.plot_id = id;
            cell.range = r;
            cell.pass = p;
            cell.value = base + g + t + e;
            f.grid.add(std::move(cell));
            f.genotype.push_back(g);
            f.trend.push_back(t);
            f.noise.push_back(e);
        }
    return f;
}

// ---------------------------------------------------------------------------
// Full synthetic dataset on disk: frame images plus the frames/windows/yields
// manifests the ingest stage consumes.
// ---------------------------------------------------------------------------

namespace detail {

inline PlotImageConfig synth_frame_image_defaults() {
    PlotImageConfig c;
    c.radius_min = 3.0;
    c.radius_max = 4.0;
    return c;
}

}  // namespace detail

struct SynthDatasetConfig {
    int n_range = 6;
    int n_pass = 6;
    int frames_per_sequence = 8;
    PlotImageConfig image = detail::synth_frame_image_defaults();
    bool fisheye_frames = true;
    int crop_width = 104;
    int crop_height = 104;
    TrendSpec trend{0.08, 0.05, 0.0, 0.0};
    double genotype_sd = 0.6;
    double noise_sd = 0.15;
    double base_yield = 4.0;
    double seeds_per_tha = 3.0;  // latent per-frame seed count = round(this * yield)
    double area_m2 = 4.0;
    uint64_t seed = 0;
};

struct SynthDataset {
    SyntheticField field;
    std::vector<int> frame_seed_counts;  // latent per plot, aligned with field cells
    std::string frames_csv, windows_csv, yields_csv, frames_dir;
};

namespace detail {

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2);
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    return x;
}

}  // namespace detail

inline SynthDataset write_synth_dataset(const std::string& dir, const SynthDatasetConfig& cfg) {
    namespace fs = std::filesystem;
    require(cfg.frames_per_sequence >= 1 && cfg.frames_per_sequence <= 80, "synth_frames",
            "frames_per_sequence must be in 1..80");
    fs::create_directories(dir);
    fs::create_directories(fs::path(dir) / "frames");

    SynthDataset out;
    out.field = gen_field(cfg.n_range, cfg.n_pass, cfg.trend, cfg.genotype_sd, cfg.noise_sd,
                          cfg.seed, cfg.base_yield);
    out.frames_dir = (fs::path(dir) / "frames").string();
    out.frames_csv = (fs::path(dir) / "frames.csv").string();
    out.windows_csv = (fs::path(dir) / "windows.csv").string();
    out.yields_csv = (fs::path(dir) / "yields.csv").string();

    std::vector<std::vector<std::string>> frame_rows, window_rows, yield_rows;
    char buf[96];
    const int64_t window_len = 800;
    const int64_t window_step = 1000;
    const int64_t frame_step = window_len / cfg.frames_per_sequence;

    for (size_t ci = 0; ci < out.field.grid.cells().size(); ++ci) {
        const PlotCell& cell = out.field.grid.cells()[ci];
        double yield = std::max(0.05, cell.value);
        int count = static_cast<int>(std::lround(cfg.seeds_per_tha * yield));
        out.frame_seed_counts.push_back(count);

        // mass back-computed so the yields.csv round-trips to cell.value
        double mass = yield * cfg.area_m2 / 10.0;  // at the 13% moisture basis
        std::snprintf(buf, sizeof buf, "%.9g", mass);
        yield_rows.push_back({cell.plot_id, std::to_string(cell.range),
                              std::to_string(cell.pass), buf, "13",
                              std::to_string(cfg.area_m2)});

        for (int row = 1; row <= 2; ++row)
            for (RowSide side : {RowSide::A, RowSide::B}) {
                std::string collection = "c_p" + std::to_string(cell.pass) + "_r" +
                                         std::to_string(row) + to_string(side);
                int64_t start = cell.range * window_step;
                window_rows.push_back({cell.plot_id, std::to_string(row), to_string(side),
                                       collection, std::to_string(start),
                                       std::to_string(start + window_len)});
                for (int k = 0; k < cfg.frames_per_sequence; ++k) {
                    uint64_t frame_seed = detail::mix_seed(
                        cfg.seed, (((ci * 2 + row - 1) * 2 + static_cast<int>(side)) << 8) | k);
                    Image frame;
                    if (cfg.fisheye_frames) {
                        CameraIntrinsics intr =
                            synth_intrinsics(cfg.image.width, cfg.image.height);
                        frame = gen_fisheye_frame(count, frame_seed, cfg.image, intr,
                                                  cfg.crop_width, cfg.crop_height)
                                    .image;
                    } else {
                        frame = gen_plot_images(count, frame_seed, cfg.image).image;
                    }
                    std::snprintf(buf, sizeof buf, "%s_r%d%s_%02d.png", cell.plot_id.c_str(),
                                  row, to_string(side).c_str(), k);
                    fs::path img_path = fs::path(out.frames_dir) / buf;
                    write_png(img_path.string(), frame);
                    frame_rows.push_back({img_path.string(),
                                          std::to_string(start + k * frame_step), collection,
                                          side == RowSide::A ? "left" : "right"});
                }
            }
    }

    write_csv(out.frames_csv, {"frame_path", "timestamp_ms", "collection_id", "camera_side"},
              frame_rows);
    write_csv(out.windows_csv, {"plot_id", "row", "side", "collection_id", "start_ms", "stop_ms"},
              window_rows);
    write_csv(out.yields_csv, {"plot_id", "range", "pass", "mass_kg", "moisture_pct", "area_m2"},
              yield_rows);
    return out;
}

}  // namespace plotyield
