#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plotyield/augment.hpp"
#include "plotyield/camera.hpp"
#include "plotyield/config.hpp"
#include "plotyield/counting.hpp"
#include "plotyield/csv.hpp"
#include "plotyield/error.hpp"
#include "plotyield/image_io.hpp"
#include "plotyield/ingest.hpp"
#include "plotyield/parallel.hpp"
#include "plotyield/ranking.hpp"
#include "plotyield/sampler.hpp"
#include "plotyield/spatial.hpp"
#include "plotyield/svgplot.hpp"
#include "plotyield/synthfield.hpp"
#include "plotyield/tensornet.hpp"
#include "plotyield/version.hpp"
#include "plotyield/yieldnet.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace plotyield;

namespace {

// ---------------------------------------------------------------------------
// Shared option plumbing
// ---------------------------------------------------------------------------

struct CommonOpts {
    std::string config_path;
    uint64_t seed = 0;
    int threads = 1;

    Config config() const {
        if (config_path.empty()) return Config::parse("", "<empty>");
        return Config::parse_file(config_path);
    }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "TOML-style config file");
    cmd->add_option("--seed", opts.seed, "seed for all randomness in this stage");
    cmd->add_option("--threads", opts.threads, "worker threads (1 = fully sequential)")
        ->check(CLI::Range(1, 256));
}

CameraIntrinsics intrinsics_from(const Config& cfg) {
    CameraIntrinsics intr;
    intr.fx = cfg.get_double("camera", "fx", intr.fx);
    intr.fy = cfg.get_double("camera", "fy", intr.fy);
    intr.px = cfg.get_double("camera", "px", intr.px);
    intr.py = cfg.get_double("camera", "py", intr.py);
    intr.k1 = cfg.get_double("camera", "k1", intr.k1);
    intr.k2 = cfg.get_double("camera", "k2", intr.k2);
    intr.k3 = cfg.get_double("camera", "k3", intr.k3);
    intr.k4 = cfg.get_double("camera", "k4", intr.k4);
    intr.width = static_cast<int>(cfg.get_int("camera", "width", intr.width));
    intr.height = static_cast<int>(cfg.get_int("camera", "height", intr.height));
    intr.validate();
    return intr;
}

UndistortConfig undistort_from(const Config& cfg) {
    UndistortConfig u;
    u.focal = cfg.get_double("undistort", "focal", 0.0);
    u.out_width = static_cast<int>(cfg.get_int("undistort", "out_width", 0));
    u.out_height = static_cast<int>(cfg.get_int("undistort", "out_height", 0));
    u.crop_width = static_cast<int>(cfg.get_int("undistort", "crop_width", 1000));
    u.crop_height = static_cast<int>(cfg.get_int("undistort", "crop_height", 1000));
    return u;
}

SensorEffectRanges ranges_from(const Config& cfg) {
    SensorEffectRanges r;
    r.noise_sigma_max = cfg.get_double("augment", "noise_sigma_max", r.noise_sigma_max);
    r.blur_sigma_max = cfg.get_double("augment", "blur_sigma_max", r.blur_sigma_max);
    r.ca_shift_max = cfg.get_double("augment", "ca_shift_max", r.ca_shift_max);
    r.ca_scale_min = cfg.get_double("augment", "ca_scale_min", r.ca_scale_min);
    r.ca_scale_max = cfg.get_double("augment", "ca_scale_max", r.ca_scale_max);
    r.gain_min = cfg.get_double("augment", "gain_min", r.gain_min);
    r.gain_max = cfg.get_double("augment", "gain_max", r.gain_max);
    return r;
}

TrainConfig train_from(const Config& cfg, uint64_t seed) {
    TrainConfig t;
    t.batch_size = static_cast<int>(cfg.get_int("train", "batch_size", 8));
    t.epochs = static_cast<int>(cfg.get_int("train", "epochs", 50));
    t.lr = cfg.get_double("train", "lr", 1e-4);
    t.shuffle = cfg.get_bool("train", "shuffle", true);
    t.seed = seed;
    return t;
}

SynthDatasetConfig synth_from(const Config& cfg, uint64_t seed) {
    SynthDatasetConfig s;
    s.n_range = static_cast<int>(cfg.get_int("synth", "n_range", s.n_range));
    s.n_pass = static_cast<int>(cfg.get_int("synth", "n_pass", s.n_pass));
    s.frames_per_sequence =
        static_cast<int>(cfg.get_int("synth", "frames_per_sequence", s.frames_per_sequence));
    s.image.width = static_cast<int>(cfg.get_int("synth", "image_width", s.image.width));
    s.image.height = static_cast<int>(cfg.get_int("synth", "image_height", s.image.height));
    s.crop_width = static_cast<int>(cfg.get_int("synth", "crop_width", s.crop_width));
    s.crop_height = static_cast<int>(cfg.get_int("synth", "crop_height", s.crop_height));
    s.fisheye_frames = cfg.get_bool("synth", "fisheye_frames", s.fisheye_frames);
    s.trend.linear_range = cfg.get_double("synth", "trend_linear_range", s.trend.linear_range);
    s.trend.linear_pass = cfg.get_double("synth", "trend_linear_pass", s.trend.linear_pass);
    s.trend.quad_range = cfg.get_double("synth", "trend_quad_range", s.trend.quad_range);
    s.trend.quad_pass = cfg.get_double("synth", "trend_quad_pass", s.trend.quad_pass);
    s.genotype_sd = cfg.get_double("synth", "genotype_sd", s.genotype_sd);
    s.noise_sd = cfg.get_double("synth", "noise_sd", s.noise_sd);
    s.base_yield = cfg.get_double("synth", "base_yield", s.base_yield);
    s.seeds_per_tha = cfg.get_double("synth", "seeds_per_tha", s.seeds_per_tha);
    s.seed = seed;
    return s;
}

std::vector<double> thresholds_from(const Config& cfg) {
    return cfg.get_array("rank", "thresholds", {0.1, 0.2, 0.3});
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

Image load_image_any(const std::string& path) {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".fimg") return read_fimg(path);
    return read_png(path);
}

void save_image_any(const std::string& path, const Image& img) {
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".fimg")
        write_fimg(path, img);
    else
        write_png(path, img);
}

std::vector<std::string> list_images(const std::string& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        if (ext == ".png" || ext == ".fimg") out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) fail("io_open", "cannot open JSON file for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) fail("io_write", "failed writing JSON file: " + path);
}

// sample manifest rows grouped into per-plot 10+10 image path lists
struct ManifestPlot {
    std::vector<std::string> side_a, side_b;
};

std::map<std::string, ManifestPlot> group_manifest(const std::vector<SampleManifestRow>& rows) {
    std::map<std::string, std::map<std::pair<int, int>, std::string>> slots;
    for (const auto& r : rows) {
        auto key = std::make_pair(static_cast<int>(r.side), r.slot);
        auto& plot_slots = slots[r.plot_id];
        require(plot_slots.count(key) == 0, "manifest_dup",
                "duplicate manifest slot for plot '" + r.plot_id + "'");
        plot_slots[key] = r.frame_path;
    }
    std::map<std::string, ManifestPlot> out;
    for (auto& [plot, plot_slots] : slots) {
        ManifestPlot mp;
        for (int side = 0; side < 2; ++side)
            for (int slot = 0; slot < kMapsPerSide; ++slot) {
                auto it = plot_slots.find({side, slot});
                require(it != plot_slots.end(), "manifest_slots",
                        "plot '" + plot + "' is missing sampled slot " + std::to_string(slot) +
                            " on side " + (side == 0 ? "A" : "B"));
                (side == 0 ? mp.side_a : mp.side_b).push_back(it->second);
            }
        require(plot_slots.size() == 2 * kMapsPerSide, "manifest_slots",
                "plot '" + plot + "' has extra manifest rows");
        out[plot] = std::move(mp);
    }
    return out;
}

std::string feature_path_for(const std::string& features_dir, const std::string& frame_path) {
    return (fs::path(features_dir) / (fs::path(frame_path).stem().string() + ".fimg")).string();
}

// ---------------------------------------------------------------------------
// undistort
// ---------------------------------------------------------------------------

struct UndistortArgs {
    CommonOpts common;
    std::vector<std::string> inputs;
    std::string images_dir;
    std::string out_dir;
    bool identity_check = false;
    bool no_crop = false;
};

int run_undistort(const UndistortArgs& a) {
    Config cfg = a.common.config();
    CameraIntrinsics intr = intrinsics_from(cfg);
    UndistortConfig ucfg = undistort_from(cfg);

    if (a.identity_check) {
        Vec2 p = project_fisheye({0, 0, 1}, intr);
        double offset = std::hypot(p.x - intr.px, p.y - intr.py);
        std::printf("identity-check offset %.9f\n", offset);
        return offset == 0.0 ? 0 : 1;
    }

    std::vector<std::string> inputs = a.inputs;
    if (!a.images_dir.empty()) {
        auto listed = list_images(a.images_dir);
        inputs.insert(inputs.end(), listed.begin(), listed.end());
    }
    require(!inputs.empty(), "no_input", "no input images given (use --input or --images-dir)");
    require(!a.out_dir.empty(), "no_output", "--out-dir is required");
    fs::create_directories(a.out_dir);

    std::vector<int64_t> fallbacks(inputs.size(), 0);
    parallel_for_index(static_cast<int64_t>(inputs.size()), a.common.threads, [&](int64_t i) {
        Image img = load_image_any(inputs[static_cast<size_t>(i)]);
        UndistortResult res = undistort(img, intr, ucfg, 1);
        Image out = a.no_crop ? res.image
                              : center_crop(res.image, ucfg.crop_width, ucfg.crop_height);
        fallbacks[static_cast<size_t>(i)] = res.fallback_pixels;
        fs::path dest = fs::path(a.out_dir) / fs::path(inputs[static_cast<size_t>(i)]).filename();
        save_image_any(dest.string(), out);
    });
    int64_t total_fallback = 0;
    for (int64_t f : fallbacks) total_fallback += f;
    std::printf("undistorted %zu images (fallback pixels: %lld)\n", inputs.size(),
                static_cast<long long>(total_fallback));
    return 0;
}

// ---------------------------------------------------------------------------
// assign / sample
// ---------------------------------------------------------------------------

struct AssignArgs {
    CommonOpts common;
    std::string frames_csv, windows_csv, out_dir;
};

int run_assign(const AssignArgs& a) {
    auto frames = read_frames_csv(a.frames_csv);
    auto windows = read_windows_csv(a.windows_csv);
    Assignment assignment = assign_frames(frames, windows);
    fs::create_directories(a.out_dir);

    std::vector<std::vector<std::string>> rows;
    for (const auto& [plot, set] : assignment.plots)
        for (int row = 1; row <= 2; ++row)
            for (RowSide side : {RowSide::A, RowSide::B})
                for (const auto& f : set.sequence(row, side))
                    rows.push_back({plot, std::to_string(row), to_string(side), f.path,
                                    std::to_string(f.timestamp_ms)});
    write_csv((fs::path(a.out_dir) / "assignments.csv").string(),
              {"plot_id", "row", "side", "frame_path", "timestamp_ms"}, rows);

    std::vector<std::vector<std::string>> unassigned;
    for (const auto& f : assignment.unassigned)
        unassigned.push_back({f.path, std::to_string(f.timestamp_ms), f.collection_id,
                              to_string(f.camera)});
    write_csv((fs::path(a.out_dir) / "unassigned.csv").string(),
              {"frame_path", "timestamp_ms", "collection_id", "camera_side"}, unassigned);

    std::printf("assigned %zu frames to %zu plots (%zu unassigned)\n",
                frames.size() - assignment.unassigned.size(), assignment.plots.size(),
                assignment.unassigned.size());
    return 0;
}

struct SampleArgs {
    CommonOpts common;
    std::string frames_csv, windows_csv, out_csv;
};

int run_sample(const SampleArgs& a) {
    auto frames = read_frames_csv(a.frames_csv);
    auto windows = read_windows_csv(a.windows_csv);
    Assignment assignment = assign_frames(frames, windows);
    std::vector<PlotSample> samples;
    for (const auto& [plot, set] : assignment.plots) samples.push_back(sample_plot(set));
    write_sample_manifest_csv(a.out_csv, samples);
    std::printf("sampled %zu plots (20 frames each) -> %s\n", samples.size(), a.out_csv.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

struct AugmentArgs {
    CommonOpts common;
    std::string manifest, images_dir, out_dir;
};

json params_to_json(const SensorEffectParams& p) {
    json j;
    j["seed"] = p.seed;
    j["noise_sigma"] = p.noise_sigma;
    j["blur_sigma"] = p.blur_sigma;
    j["gain"] = p.gain;
    j["chromatic_aberration"] = json::array();
    for (const auto& ca : p.ca)
        j["chromatic_aberration"].push_back({{"dx", ca.dx}, {"dy", ca.dy}, {"scale", ca.scale}});
    return j;
}

int run_augment(const AugmentArgs& a) {
    Config cfg = a.common.config();
    SensorEffectRanges ranges = ranges_from(cfg);

    std::vector<std::string> inputs;
    if (!a.manifest.empty()) {
        std::set<std::string> uniq;
        for (const auto& row : read_sample_manifest_csv(a.manifest)) uniq.insert(row.frame_path);
        inputs.assign(uniq.begin(), uniq.end());
    } else if (!a.images_dir.empty()) {
        inputs = list_images(a.images_dir);
    }
    require(!inputs.empty(), "no_input", "no input images (use --manifest or --images-dir)");
    if (!a.out_dir.empty()) fs::create_directories(a.out_dir);

    parallel_for_index(static_cast<int64_t>(inputs.size()), a.common.threads, [&](int64_t i) {
        const std::string& path = inputs[static_cast<size_t>(i)];
        Image img = load_image_any(path);
        uint64_t img_seed = detail::mix_seed(a.common.seed, static_cast<uint64_t>(i));
        SensorEffectParams p = sample_params(img_seed, ranges);
        Image aug = apply_effects(img, p);

        fs::path src(path);
        fs::path dir = a.out_dir.empty() ? src.parent_path() : fs::path(a.out_dir);
        std::string stem = src.stem().string() + "_aug";
        save_image_any((dir / (stem + src.extension().string())).string(), aug);
        write_json((dir / (stem + ".json")).string(), params_to_json(p));
    });
    std::printf("augmented %zu images (one variant each)\n", inputs.size());
    return 0;
}

// ---------------------------------------------------------------------------
// train-yield / predict
// ---------------------------------------------------------------------------

struct TrainArgs {
    CommonOpts common;
    std::string samples_csv, yields_csv, out_ckpt, features_dir, history_csv;
    std::string precision = "double";
};

template <typename T>
TensorT<T> fused_for_plot(const ManifestPlot& mp, const FeatureExtractorT<T>* extractor,
                          const std::string& features_dir, const std::string& export_dir = "") {
    std::vector<TensorT<T>> a, b;
    for (const auto* side : {&mp.side_a, &mp.side_b}) {
        auto& out = side == &mp.side_a ? a : b;
        for (const auto& path : *side) {
            if (!features_dir.empty()) {
                out.push_back(load_feature_map<T>(feature_path_for(features_dir, path)));
            } else {
                TensorT<T> map = extractor->extract(load_image_any(path));
                if (!export_dir.empty())
                    save_feature_map(feature_path_for(export_dir, path), map);
                out.push_back(std::move(map));
            }
        }
    }
    return fuse(a, b);
}

template <typename T>
int run_train_typed(const TrainArgs& a) {
    Config cfg = a.common.config();
    TrainConfig tcfg = train_from(cfg, a.common.seed);
    const int channels = static_cast<int>(cfg.get_int("train", "channels", 32));
    YieldRegressorConfig ycfg;
    ycfg.conv_out = static_cast<int>(cfg.get_int("train", "conv_out", ycfg.conv_out));
    ycfg.fc1_width = static_cast<int>(cfg.get_int("train", "fc1", ycfg.fc1_width));
    ycfg.fc2_width = static_cast<int>(cfg.get_int("train", "fc2", ycfg.fc2_width));

    auto plots = group_manifest(read_sample_manifest_csv(a.samples_csv));
    std::map<std::string, double> targets;
    for (const auto& y : read_yields_csv(a.yields_csv)) targets[y.plot_id] = y.yield_tha;

    std::unique_ptr<ReferenceExtractorT<T>> extractor;
    if (a.features_dir.empty())
        extractor = std::make_unique<ReferenceExtractorT<T>>(
            channels, detail::mix_seed(a.common.seed, 0xe87ull));

    std::vector<std::string> plot_ids;
    std::vector<const ManifestPlot*> plot_rows;
    for (const auto& [plot, mp] : plots) {
        require(targets.count(plot) > 0, "missing_yield",
                "no ground-truth yield for plot '" + plot + "'");
        plot_ids.push_back(plot);
        plot_rows.push_back(&mp);
    }
    require(!plot_ids.empty(), "empty_dataset", "the sample manifest lists no plots");

    std::vector<TensorT<T>> fused(plot_ids.size());
    parallel_for_index(static_cast<int64_t>(plot_ids.size()), a.common.threads, [&](int64_t i) {
        fused[static_cast<size_t>(i)] =
            fused_for_plot<T>(*plot_rows[static_cast<size_t>(i)], extractor.get(), a.features_dir);
    });
    std::vector<T> target_vec;
    for (const auto& id : plot_ids) target_vec.push_back(static_cast<T>(targets[id]));

    const auto& shape = fused.front().shape;
    YieldRegressionModuleT<T> yrm(shape[0], shape[1], shape[2], ycfg,
                                  detail::mix_seed(a.common.seed, 0x42ull));
    auto history = train_yield_on_features(fused, target_vec, yrm, tcfg);

    std::vector<std::pair<std::string, TensorT<T>>> tensors;
    if (extractor)
        for (const auto& [name, t] : extractor->named_parameters())
            tensors.emplace_back("ext." + name, t);
    for (const auto& [name, t] : yrm.named_parameters()) tensors.emplace_back(name, t);
    TensorT<T> meta({6}, {static_cast<T>(shape[0]), static_cast<T>(shape[1]),
                          static_cast<T>(shape[2]), static_cast<T>(ycfg.conv_out),
                          static_cast<T>(ycfg.fc1_width), static_cast<T>(ycfg.fc2_width)});
    tensors.emplace_back("yrm.meta", std::move(meta));
    save_checkpoint(a.out_ckpt, tensors);

    if (!a.history_csv.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (size_t e = 0; e < history.size(); ++e)
            rows.push_back({std::to_string(e + 1), format_double(history[e])});
        write_csv(a.history_csv, {"epoch", "mse"}, rows);
    }
    std::printf("trained on %zu plots for %zu epochs: first-epoch mse %.6g, final mse %.6g\n",
                plot_ids.size(), history.size(), history.front(), history.back());
    return 0;
}

int run_train(const TrainArgs& a) {
    if (a.precision == "float") return run_train_typed<float>(a);
    if (a.precision == "double") return run_train_typed<double>(a);
    fail("config_precision", "--precision must be 'float' or 'double'");
}

struct PredictArgs {
    CommonOpts common;
    std::string model_ckpt, samples_csv, out_csv, features_dir, export_features;
};

int run_predict(const PredictArgs& a) {
    auto tensors = load_checkpoint<double>(a.model_ckpt);
    std::vector<std::pair<std::string, Tensor>> ext_tensors, yrm_tensors;
    for (auto& [name, t] : tensors) {
        if (name.rfind("ext.", 0) == 0)
            ext_tensors.emplace_back(name.substr(4), std::move(t));
        else
            yrm_tensors.emplace_back(name, std::move(t));
    }
    auto yrm = YieldRegressionModule::from_tensors(yrm_tensors);
    std::unique_ptr<ReferenceExtractor> extractor;
    if (!ext_tensors.empty())
        extractor = std::make_unique<ReferenceExtractor>(
            ReferenceExtractor::from_tensors(ext_tensors));
    require(extractor != nullptr || !a.features_dir.empty(), "no_extractor",
            "checkpoint has no extractor weights; supply --features-dir");

    auto plots = group_manifest(read_sample_manifest_csv(a.samples_csv));
    std::vector<std::string> ids;
    std::vector<const ManifestPlot*> rows;
    for (const auto& [plot, mp] : plots) {
        ids.push_back(plot);
        rows.push_back(&mp);
    }
    if (!a.export_features.empty()) fs::create_directories(a.export_features);
    std::vector<double> preds(ids.size(), 0.0);
    parallel_for_index(static_cast<int64_t>(ids.size()), a.common.threads, [&](int64_t i) {
        auto fused = fused_for_plot<double>(*rows[static_cast<size_t>(i)], extractor.get(),
                                            a.features_dir, a.export_features);
        preds[static_cast<size_t>(i)] = predict_yield_from_fused(fused, yrm);
    });

    std::vector<std::vector<std::string>> out_rows;
    for (size_t i = 0; i < ids.size(); ++i)
        out_rows.push_back({ids[i], format_double(preds[i])});
    write_csv(a.out_csv, {"plot_id", "estimated_yield_tha"}, out_rows);
    std::printf("predicted %zu plots -> %s\n", ids.size(), a.out_csv.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// count
// ---------------------------------------------------------------------------

struct CountArgs {
    CommonOpts common;
    std::string points_csv, manifest, images_dir;
    std::string out_csv, tsc_csv, yields_csv;
    std::string truth_csv, est_csv, report_json, svg_path;
    bool metrics = false;
    double threshold = -1.0;
};

std::map<std::string, double> read_values_csv(const std::string& path,
                                              const std::string& id_col,
                                              const std::string& value_col) {
    CsvTable t = read_csv(path);
    int ci = t.column(id_col);
    int cv = t.column(value_col);
    std::map<std::string, double> out;
    for (const auto& r : t.rows) {
        require(out.count(r[ci]) == 0, "duplicate_id", "duplicate id '" + r[ci] + "' in " + path);
        out[r[ci]] = parse_double(r[cv], value_col);
    }
    return out;
}

int run_count_metrics(const CountArgs& a) {
    auto truth = read_values_csv(a.truth_csv, "id", "value");
    auto est = read_values_csv(a.est_csv, "id", "value");
    require(truth.size() == est.size(), "metrics_length",
            "truth and estimate files list different ids");
    std::vector<double> tv, ev;
    for (const auto& [id, t] : truth) {
        auto it = est.find(id);
        require(it != est.end(), "metrics_length", "estimate file is missing id '" + id + "'");
        tv.push_back(t);
        ev.push_back(it->second);
    }
    bool want_mape = true;
    for (double t : tv)
        if (t == 0.0) want_mape = false;  // MAPE undefined; report without it
    CountMetrics m = count_metrics(tv, ev, want_mape);

    json j;
    j["n"] = tv.size();
    j["mse"] = m.mse;
    j["mae"] = m.mae;
    if (m.mape) j["mape_percent"] = *m.mape;
    if (m.r2) j["r2"] = *m.r2;
    j["residuals"] = m.residuals;
    if (!a.report_json.empty()) write_json(a.report_json, j);
    if (!a.svg_path.empty()) write_scatter_residual_svg(a.svg_path, tv, ev);

    std::printf("n    %zu\nmse  %.6g\nmae  %.6g\n", tv.size(), m.mse, m.mae);
    if (m.mape) std::printf("mape %.6g%%\n", *m.mape);
    if (m.r2) std::printf("r2   %.6g\n", *m.r2);
    return 0;
}

int run_count(const CountArgs& a) {
    if (a.metrics) return run_count_metrics(a);
    Config cfg = a.common.config();

    std::map<std::string, int> counts;  // image path/id -> count
    if (!a.points_csv.empty()) {
        double thr = a.threshold >= 0 ? a.threshold : cfg.get_double("count", "threshold", 0.5);
        for (const auto& ps : read_points_csv(a.points_csv))
            counts[ps.image_id] = count_points(ps, thr);
    } else {
        float blob_thr = static_cast<float>(a.threshold >= 0
                                                ? a.threshold
                                                : cfg.get_double("count", "blob_threshold", 0.5));
        int min_area = static_cast<int>(cfg.get_int("count", "min_area", 5));
        std::vector<std::string> inputs;
        if (!a.manifest.empty()) {
            std::set<std::string> uniq;
            for (const auto& row : read_sample_manifest_csv(a.manifest))
                uniq.insert(row.frame_path);
            inputs.assign(uniq.begin(), uniq.end());
        } else if (!a.images_dir.empty()) {
            inputs = list_images(a.images_dir);
        }
        require(!inputs.empty(), "no_input",
                "no inputs (use --points, --manifest or --images-dir)");
        std::vector<int> per_image(inputs.size(), 0);
        parallel_for_index(static_cast<int64_t>(inputs.size()), a.common.threads, [&](int64_t i) {
            per_image[static_cast<size_t>(i)] =
                blob_count(load_image_any(inputs[static_cast<size_t>(i)]), blob_thr, min_area);
        });
        for (size_t i = 0; i < inputs.size(); ++i) counts[inputs[i]] = per_image[i];
    }

    if (!a.out_csv.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& [id, c] : counts) rows.push_back({id, std::to_string(c)});
        write_csv(a.out_csv, {"image_id", "count"}, rows);
    }

    // per-plot TSC: sum of the per-image counts over each plot's 20 samples
    if (!a.tsc_csv.empty()) {
        require(!a.manifest.empty(), "no_input", "--tsc requires --manifest");
        require(!a.yields_csv.empty(), "no_input",
                "--tsc requires --yields for the (range, pass) grid positions");
        auto plots = group_manifest(read_sample_manifest_csv(a.manifest));
        std::map<std::string, std::pair<int, int>> grid_pos;
        for (const auto& y : read_yields_csv(a.yields_csv))
            grid_pos[y.plot_id] = {y.range, y.pass};
        std::vector<std::vector<std::string>> rows;
        for (const auto& [plot, mp] : plots) {
            int64_t tsc = 0;
            for (const auto* side : {&mp.side_a, &mp.side_b})
                for (const auto& path : *side) {
                    auto it = counts.find(path);
                    require(it != counts.end(), "missing_count",
                            "no count available for frame '" + path + "'");
                    tsc += it->second;
                }
            auto pos = grid_pos.find(plot);
            require(pos != grid_pos.end(), "missing_yield",
                    "plot '" + plot + "' is not present in the yields file");
            rows.push_back({plot, std::to_string(pos->second.first),
                            std::to_string(pos->second.second), std::to_string(tsc)});
        }
        write_csv(a.tsc_csv, {"plot_id", "range", "pass", "value"}, rows);
    }

    std::printf("counted %zu images\n", counts.size());
    return 0;
}

// ---------------------------------------------------------------------------
// adjust
// ---------------------------------------------------------------------------

struct AdjustArgs {
    CommonOpts common;
    std::string grid_csv, out_csv, summary_json;
    std::string value_column = "value";
};

int run_adjust(const AdjustArgs& a) {
    FieldGrid grid = read_grid_csv(a.grid_csv, a.value_column);
    AdjustmentResult res = adjust(grid);
    write_adjusted_csv(a.out_csv, grid, res);
    if (!a.summary_json.empty()) {
        json j;
        j["coefficient_b"] = res.coefficient_b;
        j["grand_mean_x"] = res.grand_mean_x;
        j["zero_variance"] = res.zero_variance;
        j["plots"] = res.plot_ids.size();
        write_json(a.summary_json, j);
    }
    std::printf("adjusted %zu plots: b=%.6g, x_bar=%.6g%s\n", res.plot_ids.size(),
                res.coefficient_b, res.grand_mean_x,
                res.zero_variance ? " (zero variance: identity adjustment)" : "");
    return 0;
}

// ---------------------------------------------------------------------------
// rank
// ---------------------------------------------------------------------------

struct RankArgs {
    CommonOpts common;
    std::string confusion_spec;
    std::string truth_csv, pred_csv;
    std::string truth_column = "value", pred_column = "value";
    std::string thresholds_spec;
    std::string report_json, venn_dir;
};

ConfusionCounts parse_confusion(const std::string& spec) {
    ConfusionCounts c;
    bool seen[4] = {false, false, false, false};
    std::istringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        size_t eq = item.find('=');
        require(eq != std::string::npos, "confusion_spec",
                "expected tp=..,tn=..,fp=..,fn=.. but got '" + spec + "'");
        std::string key = item.substr(0, eq);
        int64_t v = parse_int(item.substr(eq + 1), key);
        if (key == "tp") c.tp = v, seen[0] = true;
        else if (key == "tn") c.tn = v, seen[1] = true;
        else if (key == "fp") c.fp = v, seen[2] = true;
        else if (key == "fn") c.fn = v, seen[3] = true;
        else fail("confusion_spec", "unknown confusion field '" + key + "'");
    }
    require(seen[0] && seen[1] && seen[2] && seen[3], "confusion_spec",
            "confusion spec needs tp, tn, fp and fn");
    return c;
}

std::string score_str(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

json report_to_json(const SelectionReport& rep) {
    json j;
    j["threshold"] = rep.threshold;
    j["tp"] = rep.counts.tp;
    j["tn"] = rep.counts.tn;
    j["fp"] = rep.counts.fp;
    j["fn"] = rep.counts.fn;
    if (rep.selection_scores.accuracy) j["accuracy"] = *rep.selection_scores.accuracy;
    if (rep.selection_scores.sensitivity) j["sensitivity"] = *rep.selection_scores.sensitivity;
    if (rep.selection_scores.specificity) j["specificity"] = *rep.selection_scores.specificity;
    j["selected_both"] = json::array();
    for (const auto& id : rep.both) j["selected_both"].push_back(id);
    j["truth_only"] = json::array();
    for (const auto& id : rep.truth_only) j["truth_only"].push_back(id);
    j["pred_only"] = json::array();
    for (const auto& id : rep.pred_only) j["pred_only"].push_back(id);
    return j;
}

void write_venn_csv(const std::string& path, const SelectionReport& rep) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& id : rep.both) rows.push_back({id, "1", "1"});
    for (const auto& id : rep.truth_only) rows.push_back({id, "1", "0"});
    for (const auto& id : rep.pred_only) rows.push_back({id, "0", "1"});
    std::sort(rows.begin(), rows.end());
    write_csv(path, {"plot_id", "in_truth_selection", "in_predicted_selection"}, rows);
}

std::vector<SelectionReport> rank_and_report(const std::map<std::string, double>& truth,
                                             const std::map<std::string, double>& pred,
                                             const std::vector<double>& thresholds,
                                             const std::string& report_json,
                                             const std::string& venn_dir) {
    std::vector<SelectionReport> reports;
    json jreports = json::array();
    for (double t : thresholds) {
        SelectionReport rep = evaluate_selection(truth, pred, t);
        std::printf(
            "threshold %2.0f%%: tp=%lld tn=%lld fp=%lld fn=%lld accuracy=%s sensitivity=%s "
            "specificity=%s\n",
            100.0 * t, static_cast<long long>(rep.counts.tp),
            static_cast<long long>(rep.counts.tn), static_cast<long long>(rep.counts.fp),
            static_cast<long long>(rep.counts.fn), score_str(rep.selection_scores.accuracy).c_str(),
            score_str(rep.selection_scores.sensitivity).c_str(),
            score_str(rep.selection_scores.specificity).c_str());
        jreports.push_back(report_to_json(rep));
        if (!venn_dir.empty()) {
            fs::create_directories(venn_dir);
            char name[64];
            std::snprintf(name, sizeof name, "venn_%02.0f.csv", 100.0 * t);
            write_venn_csv((fs::path(venn_dir) / name).string(), rep);
        }
        reports.push_back(std::move(rep));
    }
    if (!report_json.empty()) write_json(report_json, jreports);
    return reports;
}

int run_rank(const RankArgs& a) {
    if (!a.confusion_spec.empty()) {
        ConfusionCounts c = parse_confusion(a.confusion_spec);
        SelectionScores s = scores(c);
        std::printf("%s/%s/%s\n", score_str(s.accuracy).c_str(), score_str(s.sensitivity).c_str(),
                    score_str(s.specificity).c_str());
        return 0;
    }
    require(!a.truth_csv.empty() && !a.pred_csv.empty(), "no_input",
            "rank needs --confusion or both --truth and --pred");
    Config cfg = a.common.config();
    std::vector<double> thresholds = thresholds_from(cfg);
    if (!a.thresholds_spec.empty()) {
        thresholds.clear();
        std::istringstream ss(a.thresholds_spec);
        std::string item;
        while (std::getline(ss, item, ',')) thresholds.push_back(parse_double(item, "threshold"));
    }
    auto truth = read_values_csv(a.truth_csv, "plot_id", a.truth_column);
    auto pred = read_values_csv(a.pred_csv, "plot_id", a.pred_column);
    rank_and_report(truth, pred, thresholds, a.report_json, a.venn_dir);
    return 0;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    CommonOpts common;
    std::string out_dir;
};

json latents_to_json(const SynthDataset& ds) {
    json j;
    j["base_yield"] = ds.field.base;
    j["plots"] = json::array();
    for (size_t i = 0; i < ds.field.grid.cells().size(); ++i) {
        const PlotCell& c = ds.field.grid.cells()[i];
        json p;
        p["plot_id"] = c.plot_id;
        p["range"] = c.range;
        p["pass"] = c.pass;
        p["value"] = c.value;
        p["genotype"] = ds.field.genotype[i];
        p["trend"] = ds.field.trend[i];
        p["noise"] = ds.field.noise[i];
        p["frame_seed_count"] = ds.frame_seed_counts[i];
        j["plots"].push_back(std::move(p));
    }
    return j;
}

int run_synth(const SynthArgs& a) {
    Config cfg = a.common.config();
    SynthDatasetConfig scfg = synth_from(cfg, a.common.seed);
    SynthDataset ds = write_synth_dataset(a.out_dir, scfg);
    write_json((fs::path(a.out_dir) / "latents.json").string(), latents_to_json(ds));
    std::printf("synthesized %zu plots (%d frames per sequence) under %s\n",
                ds.field.grid.size(), scfg.frames_per_sequence, a.out_dir.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

struct PipelineArgs {
    CommonOpts common;
    std::string out_dir;
    bool synth = false;
    bool train = false;
    std::string frames_csv, windows_csv, yields_csv;  // real-data entry point
};

int run_pipeline(const PipelineArgs& a) {
    Config cfg = a.common.config();
    require(!a.out_dir.empty(), "no_output", "--out-dir is required");
    fs::create_directories(a.out_dir);
    fs::path out(a.out_dir);

    std::string frames_csv = a.frames_csv;
    std::string windows_csv = a.windows_csv;
    std::string yields_csv = a.yields_csv;
    CameraIntrinsics intr;
    UndistortConfig ucfg;

    if (a.synth) {
        SynthDatasetConfig scfg = synth_from(cfg, a.common.seed);
        SynthDataset ds = write_synth_dataset((out / "synth").string(), scfg);
        write_json((out / "synth" / "latents.json").string(), latents_to_json(ds));
        frames_csv = ds.frames_csv;
        windows_csv = ds.windows_csv;
        yields_csv = ds.yields_csv;
        intr = synth_intrinsics(scfg.image.width, scfg.image.height);
        ucfg.crop_width = scfg.crop_width;
        ucfg.crop_height = scfg.crop_height;
        std::printf("[1/7] synth: %zu plots\n", ds.field.grid.size());
    } else {
        require(!frames_csv.empty() && !windows_csv.empty() && !yields_csv.empty(), "no_input",
                "pipeline needs --synth or --frames/--windows/--yields");
        intr = intrinsics_from(cfg);
        ucfg = undistort_from(cfg);
        std::printf("[1/7] ingest manifests supplied\n");
    }

    // undistort + crop every frame, rewriting the manifest paths
    auto frames = read_frames_csv(frames_csv);
    fs::create_directories(out / "corrected");
    parallel_for_index(static_cast<int64_t>(frames.size()), a.common.threads, [&](int64_t i) {
        const auto& f = frames[static_cast<size_t>(i)];
        Image img = load_image_any(f.path);
        UndistortResult res = undistort(img, intr, ucfg, 1);
        Image cropped = center_crop(res.image, ucfg.crop_width, ucfg.crop_height);
        write_png((out / "corrected" / fs::path(f.path).filename()).string(), cropped);
    });
    std::vector<std::vector<std::string>> frame_rows;
    for (auto& f : frames) {
        f.path = (out / "corrected" / fs::path(f.path).filename()).string();
        frame_rows.push_back(
            {f.path, std::to_string(f.timestamp_ms), f.collection_id, to_string(f.camera)});
    }
    std::string corrected_csv = (out / "corrected_frames.csv").string();
    write_csv(corrected_csv, {"frame_path", "timestamp_ms", "collection_id", "camera_side"},
              frame_rows);
    std::printf("[2/7] undistorted %zu frames\n", frames.size());

    // assign + sample
    auto windows = read_windows_csv(windows_csv);
    Assignment assignment = assign_frames(frames, windows);
    std::vector<PlotSample> samples;
    for (const auto& [plot, set] : assignment.plots) samples.push_back(sample_plot(set));
    std::string samples_csv = (out / "samples.csv").string();
    write_sample_manifest_csv(samples_csv, samples);
    std::printf("[3/7] sampled %zu plots (%zu unassigned frames)\n", samples.size(),
                assignment.unassigned.size());

    // augment the sampled frames (dataset artifact, as in the AUG datasets)
    AugmentArgs aug;
    aug.common = a.common;
    aug.manifest = samples_csv;
    aug.out_dir = (out / "augmented").string();
    run_augment(aug);
    std::printf("[4/7] augmented sampled frames\n");

    // blob-count TSC per plot
    CountArgs count;
    count.common = a.common;
    count.manifest = samples_csv;
    count.out_csv = (out / "counts.csv").string();
    count.tsc_csv = (out / "tsc.csv").string();
    count.yields_csv = yields_csv;
    run_count(count);
    std::printf("[5/7] counted sampled frames\n");

    // spatial adjustment of ground-truth yield and TSC
    auto yields = read_yields_csv(yields_csv);
    FieldGrid yield_grid;
    for (const auto& y : yields)
        yield_grid.add({y.plot_id, y.range, y.pass, y.yield_tha});
    AdjustmentResult yield_adj = adjust(yield_grid);
    write_adjusted_csv((out / "adjusted_yield.csv").string(), yield_grid, yield_adj);

    FieldGrid tsc_grid = read_grid_csv((out / "tsc.csv").string(), "value");
    AdjustmentResult tsc_adj = adjust(tsc_grid);
    write_adjusted_csv((out / "adjusted_tsc.csv").string(), tsc_grid, tsc_adj);

    json adj_summary;
    adj_summary["yield"] = {{"coefficient_b", yield_adj.coefficient_b},
                            {"grand_mean_x", yield_adj.grand_mean_x},
                            {"zero_variance", yield_adj.zero_variance}};
    adj_summary["tsc"] = {{"coefficient_b", tsc_adj.coefficient_b},
                          {"grand_mean_x", tsc_adj.grand_mean_x},
                          {"zero_variance", tsc_adj.zero_variance}};
    write_json((out / "adjust_summary.json").string(), adj_summary);
    std::printf("[6/7] spatially adjusted yield and TSC\n");

    // rank genotypes: adjusted truth yield vs adjusted TSC
    bool use_adjusted = cfg.get_bool("rank", "use_adjusted", true);
    auto values_from = [&](const FieldGrid& grid, const AdjustmentResult& adj) {
        std::map<std::string, double> v;
        for (size_t i = 0; i < grid.cells().size(); ++i)
            v[grid.cells()[i].plot_id] =
                use_adjusted ? adj.adjusted[i] : grid.cells()[i].value;
        return v;
    };
    auto truth_values = values_from(yield_grid, yield_adj);
    auto tsc_values = values_from(tsc_grid, tsc_adj);
    std::printf("[7/7] ranking by TSC (%s values)\n", use_adjusted ? "adjusted" : "raw");
    rank_and_report(truth_values, tsc_values, thresholds_from(cfg),
                    (out / "report.json").string(), out.string());

    if (a.train) {
        TrainArgs train;
        train.common = a.common;
        train.samples_csv = samples_csv;
        train.yields_csv = yields_csv;
        train.out_ckpt = (out / "model.ckpt").string();
        train.history_csv = (out / "loss_history.csv").string();
        run_train(train);

        PredictArgs predict;
        predict.common = a.common;
        predict.model_ckpt = train.out_ckpt;
        predict.samples_csv = samples_csv;
        predict.out_csv = (out / "predictions.csv").string();
        run_predict(predict);

        // adjust the estimated yields on the same grid, then rank
        auto preds = read_values_csv(predict.out_csv, "plot_id", "estimated_yield_tha");
        FieldGrid pred_grid;
        for (const auto& y : yields) {
            auto it = preds.find(y.plot_id);
            require(it != preds.end(), "missing_prediction",
                    "no prediction for plot '" + y.plot_id + "'");
            pred_grid.add({y.plot_id, y.range, y.pass, it->second});
        }
        AdjustmentResult pred_adj = adjust(pred_grid);
        write_adjusted_csv((out / "adjusted_estimated_yield.csv").string(), pred_grid, pred_adj);
        auto pred_values = values_from(pred_grid, pred_adj);
        std::printf("ranking by estimated yield (%s values)\n",
                    use_adjusted ? "adjusted" : "raw");
        rank_and_report(truth_values, pred_values, thresholds_from(cfg),
                        (out / "report_estimated_yield.json").string(), "");
    }

    std::printf("pipeline complete: %s\n", (out / "report.json").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"plot-level soybean yield estimation pipeline"};
    app.set_version_flag("--version", std::string("plotyield ") + kVersion);
    app.require_subcommand(1);

    UndistortArgs undistort_args;
    auto* cmd_undistort =
        app.add_subcommand("undistort", "correct fisheye frames and crop the sharp center");
    add_common(cmd_undistort, undistort_args.common);
    cmd_undistort->add_option("--input", undistort_args.inputs, "input image(s) (.png or .fimg)");
    cmd_undistort->add_option("--images-dir", undistort_args.images_dir,
                              "directory of input images");
    cmd_undistort->add_option("--out-dir", undistort_args.out_dir, "output directory");
    cmd_undistort->add_flag("--identity-check", undistort_args.identity_check,
                            "probe the principal-point fixed point and exit");
    cmd_undistort->add_flag("--no-crop", undistort_args.no_crop, "skip the center crop");

    AssignArgs assign_args;
    auto* cmd_assign = app.add_subcommand("assign", "assign frames to plot windows");
    add_common(cmd_assign, assign_args.common);
    cmd_assign->add_option("--frames", assign_args.frames_csv, "frames.csv")->required();
    cmd_assign->add_option("--windows", assign_args.windows_csv, "windows.csv")->required();
    cmd_assign->add_option("--out-dir", assign_args.out_dir, "output directory")->required();

    SampleArgs sample_args;
    auto* cmd_sample = app.add_subcommand("sample", "pick 20 representative frames per plot");
    add_common(cmd_sample, sample_args.common);
    cmd_sample->add_option("--frames", sample_args.frames_csv, "frames.csv")->required();
    cmd_sample->add_option("--windows", sample_args.windows_csv, "windows.csv")->required();
    cmd_sample->add_option("--out", sample_args.out_csv, "sample manifest output")->required();

    AugmentArgs augment_args;
    auto* cmd_augment =
        app.add_subcommand("augment", "write one sensor-effect variant per image");
    add_common(cmd_augment, augment_args.common);
    cmd_augment->add_option("--manifest", augment_args.manifest, "sample manifest CSV");
    cmd_augment->add_option("--images-dir", augment_args.images_dir, "directory of images");
    cmd_augment->add_option("--out-dir", augment_args.out_dir,
                            "output directory (default: beside the originals)");

    TrainArgs train_args;
    auto* cmd_train = app.add_subcommand("train-yield", "train the yield regression module");
    add_common(cmd_train, train_args.common);
    cmd_train->add_option("--samples", train_args.samples_csv, "sample manifest CSV")->required();
    cmd_train->add_option("--yields", train_args.yields_csv, "yields.csv")->required();
    cmd_train->add_option("--out", train_args.out_ckpt, "output checkpoint")->required();
    cmd_train->add_option("--features-dir", train_args.features_dir,
                          "directory of per-frame FIMG feature maps (replaces the extractor)");
    cmd_train->add_option("--history", train_args.history_csv, "per-epoch loss CSV");
    cmd_train->add_option("--precision", train_args.precision, "double (default) or float");

    PredictArgs predict_args;
    auto* cmd_predict = app.add_subcommand("predict", "predict plot yields with a checkpoint");
    add_common(cmd_predict, predict_args.common);
    cmd_predict->add_option("--model", predict_args.model_ckpt, "checkpoint path")->required();
    cmd_predict->add_option("--samples", predict_args.samples_csv, "sample manifest CSV")
        ->required();
    cmd_predict->add_option("--out", predict_args.out_csv, "predictions CSV")->required();
    cmd_predict->add_option("--features-dir", predict_args.features_dir,
                            "directory of per-frame FIMG feature maps");
    cmd_predict->add_option("--export-features", predict_args.export_features,
                            "write each sampled frame's feature map as FIMG into this directory");

    CountArgs count_args;
    auto* cmd_count = app.add_subcommand("count", "count seeds and evaluate count metrics");
    add_common(cmd_count, count_args.common);
    cmd_count->add_option("--points", count_args.points_csv, "points.csv of detections");
    cmd_count->add_option("--manifest", count_args.manifest, "sample manifest CSV (blob mode)");
    cmd_count->add_option("--images-dir", count_args.images_dir, "image directory (blob mode)");
    cmd_count->add_option("--threshold", count_args.threshold,
                          "confidence (points) or intensity (blob) threshold");
    cmd_count->add_option("--out", count_args.out_csv, "per-image counts CSV");
    cmd_count->add_option("--tsc", count_args.tsc_csv, "per-plot TSC grid CSV");
    cmd_count->add_option("--yields", count_args.yields_csv,
                          "yields.csv providing (range, pass) for --tsc");
    cmd_count->add_flag("--metrics", count_args.metrics, "metrics mode (needs --truth/--est)");
    cmd_count->add_option("--truth", count_args.truth_csv, "truth id,value CSV");
    cmd_count->add_option("--est", count_args.est_csv, "estimate id,value CSV");
    cmd_count->add_option("--report", count_args.report_json, "metrics JSON output");
    cmd_count->add_option("--svg", count_args.svg_path, "scatter/residual SVG output");

    AdjustArgs adjust_args;
    auto* cmd_adjust = app.add_subcommand("adjust", "moving-grid spatial adjustment");
    add_common(cmd_adjust, adjust_args.common);
    cmd_adjust->add_option("--grid", adjust_args.grid_csv, "plot_id,range,pass,value CSV")
        ->required();
    cmd_adjust->add_option("--out", adjust_args.out_csv, "adjusted CSV output")->required();
    cmd_adjust->add_option("--summary", adjust_args.summary_json, "JSON summary output");
    cmd_adjust->add_option("--value-column", adjust_args.value_column,
                           "value column name (default: value)");

    RankArgs rank_args;
    auto* cmd_rank = app.add_subcommand("rank", "selection-threshold genotype ranking");
    add_common(cmd_rank, rank_args.common);
    cmd_rank->add_option("--confusion", rank_args.confusion_spec,
                         "score a confusion quadruple tp=..,tn=..,fp=..,fn=..");
    cmd_rank->add_option("--truth", rank_args.truth_csv, "truth plot values CSV");
    cmd_rank->add_option("--pred", rank_args.pred_csv, "predicted plot values CSV");
    cmd_rank->add_option("--truth-column", rank_args.truth_column, "truth value column");
    cmd_rank->add_option("--pred-column", rank_args.pred_column, "predicted value column");
    cmd_rank->add_option("--thresholds", rank_args.thresholds_spec,
                         "comma-separated selection fractions (default 0.1,0.2,0.3)");
    cmd_rank->add_option("--report", rank_args.report_json, "JSON report output");
    cmd_rank->add_option("--venn-dir", rank_args.venn_dir, "directory for venn CSVs");

    SynthArgs synth_args;
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic dataset with latents");
    add_common(cmd_synth, synth_args.common);
    cmd_synth->add_option("--out-dir", synth_args.out_dir, "output directory")->required();

    PipelineArgs pipeline_args;
    auto* cmd_pipeline = app.add_subcommand("pipeline", "run all stages end to end");
    add_common(cmd_pipeline, pipeline_args.common);
    cmd_pipeline->add_option("--out-dir", pipeline_args.out_dir, "output directory")->required();
    cmd_pipeline->add_flag("--synth", pipeline_args.synth, "start from a synthetic dataset");
    cmd_pipeline->add_flag("--train-yield", pipeline_args.train,
                           "also train and rank the yield regression model");
    cmd_pipeline->add_option("--frames", pipeline_args.frames_csv, "frames.csv (real data)");
    cmd_pipeline->add_option("--windows", pipeline_args.windows_csv, "windows.csv (real data)");
    cmd_pipeline->add_option("--yields", pipeline_args.yields_csv, "yields.csv (real data)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error code=cli_usage stage=parse message=" << e.what() << "\n";
        return 2;
    }

    std::string stage = "unknown";
    try {
        if (cmd_undistort->parsed()) {
            stage = "undistort";
            return run_undistort(undistort_args);
        }
        if (cmd_assign->parsed()) {
            stage = "assign";
            return run_assign(assign_args);
        }
        if (cmd_sample->parsed()) {
            stage = "sample";
            return run_sample(sample_args);
        }
        if (cmd_augment->parsed()) {
            stage = "augment";
            return run_augment(augment_args);
        }
        if (cmd_train->parsed()) {
            stage = "train-yield";
            return run_train(train_args);
        }
        if (cmd_predict->parsed()) {
            stage = "predict";
            return run_predict(predict_args);
        }
        if (cmd_count->parsed()) {
            stage = "count";
            return run_count(count_args);
        }
        if (cmd_adjust->parsed()) {
            stage = "adjust";
            return run_adjust(adjust_args);
        }
        if (cmd_rank->parsed()) {
            stage = "rank";
            return run_rank(rank_args);
        }
        if (cmd_synth->parsed()) {
            stage = "synth";
            return run_synth(synth_args);
        }
        if (cmd_pipeline->parsed()) {
            stage = "pipeline";
            return run_pipeline(pipeline_args);
        }
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ';');
        std::cerr << "error code=" << e.code() << " stage=" << stage << " message=" << msg
                  << "\n";
        return e.code().rfind("config", 0) == 0 ? 2 : 1;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ';');
        std::cerr << "error code=internal stage=" << stage << " message=" << msg << "\n";
        return 1;
    }
    return 0;
}
