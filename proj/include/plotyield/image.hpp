#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "plotyield/error.hpp"

namespace plotyield {

// Planar float image, values in [0,1]. data laid out as `channels` planes of
// height x width, row-major within a plane. Matches the FIMG on-disk layout.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c, float fill = 0.0f)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {
        require(w > 0 && h > 0 && (c == 1 || c == 3), "image_shape",
                "image dimensions must be positive with 1 or 3 channels");
    }

    size_t index(int c, int y, int x) const {
        return (static_cast<size_t>(c) * height + y) * width + x;
    }
    float& at(int c, int y, int x) { return data[index(c, y, x)]; }
    float at(int c, int y, int x) const { return data[index(c, y, x)]; }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

// Rec.601 luma for 3-channel images; identity for grayscale.
inline float luma(const Image& img, int y, int x) {
    if (img.channels == 1) return img.at(0, y, x);
    return 0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
}

// Bilinear sample of one channel; positions outside the image read as 0.
inline float sample_bilinear_zero(const Image& img, int c, double x, double y) {
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    double fx = x - x0, fy = y - y0;
    auto pix = [&](int yy, int xx) -> double {
        if (xx < 0 || xx >= img.width || yy < 0 || yy >= img.height) return 0.0;
        return img.at(c, yy, xx);
    };
    double v = (1 - fy) * ((1 - fx) * pix(y0, x0) + fx * pix(y0, x0 + 1)) +
               fy * ((1 - fx) * pix(y0 + 1, x0) + fx * pix(y0 + 1, x0 + 1));
    return static_cast<float>(v);
}

// Bilinear sample with replicated (clamped) borders.
inline float sample_bilinear_clamp(const Image& img, int c, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    int x1 = std::min(x0 + 1, img.width - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    double fx = x - x0, fy = y - y0;
    double v = (1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
               fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
    return static_cast<float>(v);
}

inline uint8_t to_u8(float v) {
    // round-half-up on the [0,255] scale
    float scaled = std::clamp(v, 0.0f, 1.0f) * 255.0f;
    int q = static_cast<int>(std::floor(scaled + 0.5f));
    return static_cast<uint8_t>(std::clamp(q, 0, 255));
}

inline float from_u8(uint8_t v) { return static_cast<float>(v) / 255.0f; }

}  // namespace plotyield
