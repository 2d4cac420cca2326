#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "plotyield/error.hpp"
#include "plotyield/image.hpp"

namespace plotyield {

// Sampling ranges for the four sensor effects. Defaults are perceptually mild.
struct SensorEffectRanges {
    double noise_sigma_max = 0.05;
    double blur_sigma_max = 2.0;
    double ca_shift_max = 2.0;  // px, per-channel translation in [-max, max]
    double ca_scale_min = 0.998;
    double ca_scale_max = 1.002;
    double gain_min = 0.5;
    double gain_max = 2.0;
};

struct ChannelAberration {
    double dx = 0.0;
    double dy = 0.0;
    double scale = 1.0;
};

struct SensorEffectParams {
    double noise_sigma = 0.0;
    double blur_sigma = 0.0;
    std::array<ChannelAberration, 3> ca{};
    double gain = 1.0;
    uint64_t seed = 0;
};

// Deterministic uniform draws within the ranges. Draw order is fixed: noise,
// blur, then per channel (dx, dy, scale), then gain.
inline SensorEffectParams sample_params(uint64_t seed, const SensorEffectRanges& r = {}) {
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    SensorEffectParams p;
    p.seed = seed;
    p.noise_sigma = uniform(0.0, r.noise_sigma_max);
    p.blur_sigma = uniform(0.0, r.blur_sigma_max);
    for (auto& ca : p.ca) {
        ca.dx = uniform(-r.ca_shift_max, r.ca_shift_max);
        ca.dy = uniform(-r.ca_shift_max, r.ca_shift_max);
        ca.scale = uniform(r.ca_scale_min, r.ca_scale_max);
    }
    p.gain = uniform(r.gain_min, r.gain_max);
    return p;
}

namespace detail {

inline Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
    Image tmp(img.width, img.height, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * img.at(c, y, clampi(x + i, img.width - 1));
                tmp.at(c, y, x) = static_cast<float>(acc);
            }
    Image out(img.width, img.height, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * tmp.at(c, clampi(y + i, img.height - 1), x);
                out.at(c, y, x) = static_cast<float>(acc);
            }
    return out;
}

inline bool ca_is_identity(const SensorEffectParams& p) {
    for (const auto& ca : p.ca)
        if (ca.dx != 0.0 || ca.dy != 0.0 || ca.scale != 1.0) return false;
    return true;
}

// Per-channel scale about the image center plus translation, bilinear sampling
// with replicated borders.
inline Image chromatic_aberration(const Image& img, const SensorEffectParams& p) {
    if (ca_is_identity(p)) return img;
    Image out(img.width, img.height, img.channels);
    double cx = (img.width - 1) / 2.0;
    double cy = (img.height - 1) / 2.0;
    for (int c = 0; c < img.channels; ++c) {
        const auto& ca = p.ca[c];
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double sx = (x - cx) / ca.scale + cx - ca.dx;
                double sy = (y - cy) / ca.scale + cy - ca.dy;
                out.at(c, y, x) = sample_bilinear_clamp(img, c, sx, sy);
            }
    }
    return out;
}

}  // namespace detail

// Applies exposure -> blur -> chromatic aberration -> noise, in that order.
// Deterministic for fixed (image, params); the noise stream is derived from
// the embedded seed.
inline Image apply_effects(const Image& img, const SensorEffectParams& p) {
    require(img.channels == 3, "augment_channels", "apply_effects requires a 3-channel image");

    Image out = img;
    for (auto& v : out.data) v = std::clamp(static_cast<float>(v * p.gain), 0.0f, 1.0f);
    out = detail::gaussian_blur(out, p.blur_sigma);
    out = detail::chromatic_aberration(out, p);
    if (p.noise_sigma > 0.0) {
        // decorrelate from the parameter draws made with the same seed
        std::mt19937_64 rng(p.seed ^ 0x9e3779b97f4a7c15ull);
        std::normal_distribution<double> noise(0.0, p.noise_sigma);
        for (auto& v : out.data)
            v = std::clamp(static_cast<float>(v + noise(rng)), 0.0f, 1.0f);
    }
    return out;
}

}  // namespace plotyield
