#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "plotyield/error.hpp"
#include "plotyield/image.hpp"

namespace plotyield {

struct Vec2 {
    double x = 0, y = 0;
};

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

// Equidistant (Kannala-Brandt) fisheye intrinsics. Defaults are the values of
// the camera this library was built around: f = (410, 410), principal point
// (383, 526), 1920x1080 sensor, zero distortion coefficients.
struct CameraIntrinsics {
    double fx = 410.0;
    double fy = 410.0;
    double px = 383.0;
    double py = 526.0;
    double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0;
    int width = 1920;
    int height = 1080;

    void validate() const {
        require(fx > 0 && fy > 0, "intrinsics", "focal lengths must be positive");
        require(px >= 0 && px < width && py >= 0 && py < height, "intrinsics",
                "principal point must lie inside the sensor");
        require(width > 0 && height > 0, "intrinsics", "sensor size must be positive");
    }
};

// theta_d = theta * (1 + k1 t^2 + k2 t^4 + k3 t^6 + k4 t^8)
inline double distort_angle(double theta, const CameraIntrinsics& intr) {
    double t2 = theta * theta;
    return theta * (1.0 + t2 * (intr.k1 + t2 * (intr.k2 + t2 * (intr.k3 + t2 * intr.k4))));
}

inline double distort_angle_deriv(double theta, const CameraIntrinsics& intr) {
    double t2 = theta * theta;
    return 1.0 + t2 * (3.0 * intr.k1 + t2 * (5.0 * intr.k2 + t2 * (7.0 * intr.k3 + t2 * 9.0 * intr.k4)));
}

// Forward projection of a camera-frame point (z > 0) through the fisheye model.
inline Vec2 project_fisheye(const Vec3& point, const CameraIntrinsics& intr) {
    if (!(point.z > 0.0))
        fail("nonpositive_depth", "project_fisheye requires a point with positive depth");
    double r = std::hypot(point.x, point.y);
    if (r == 0.0) return {intr.px, intr.py};
    double theta = std::atan2(r, point.z);
    double theta_d = distort_angle(theta, intr);
    // (cos phi, sin phi) without trig round trips
    double cphi = point.x / r;
    double sphi = point.y / r;
    return {intr.fx * theta_d * cphi + intr.px, intr.fy * theta_d * sphi + intr.py};
}

struct AngleInversion {
    double theta = 0.0;
    bool converged = true;
    int iterations = 0;
};

// Newton solve of distort_angle(theta) = theta_d. Init theta = theta_d,
// tolerance 1e-10, at most 20 iterations.
inline AngleInversion invert_distorted_angle(double theta_d, const CameraIntrinsics& intr) {
    AngleInversion res;
    res.theta = theta_d;
    if (intr.k1 == 0 && intr.k2 == 0 && intr.k3 == 0 && intr.k4 == 0) return res;
    for (int i = 0; i < 20; ++i) {
        double f = distort_angle(res.theta, intr) - theta_d;
        if (std::abs(f) < 1e-10) {
            res.iterations = i;
            return res;
        }
        double d = distort_angle_deriv(res.theta, intr);
        if (d == 0.0 || !std::isfinite(d)) break;
        res.theta -= f / d;
        res.iterations = i + 1;
    }
    res.converged = std::abs(distort_angle(res.theta, intr) - theta_d) < 1e-10;
    return res;
}

// Back-projection of a pixel to a camera ray with z = 1. `converged` reports
// whether the Newton inversion of the distortion polynomial succeeded.
inline Vec3 unproject_fisheye(const Vec2& pixel, const CameraIntrinsics& intr,
                              bool* converged = nullptr) {
    double mx = (pixel.x - intr.px) / intr.fx;
    double my = (pixel.y - intr.py) / intr.fy;
    double theta_d = std::hypot(mx, my);
    if (converged) *converged = true;
    if (theta_d == 0.0) return {0.0, 0.0, 1.0};
    AngleInversion inv = invert_distorted_angle(theta_d, intr);
    if (converged) *converged = inv.converged;
    double tan_theta = std::tan(inv.theta);
    return {tan_theta * mx / theta_d, tan_theta * my / theta_d, 1.0};
}

struct UndistortConfig {
    double focal = 0.0;   // output pinhole focal length in px; 0 means intr.fx
    int out_width = 0;    // 0 means input width
    int out_height = 0;   // 0 means input height
    int crop_width = 1000;
    int crop_height = 1000;
};

struct UndistortResult {
    Image image;
    int64_t fallback_pixels = 0;  // output pixels filled with 0 after a remap failure
};

// Pinhole rectification by inverse mapping: each output pixel's pinhole ray is
// pushed through the forward fisheye model and the source image is sampled
// bilinearly there. Out-of-source samples read as 0. The output principal
// point is the output image center.
inline UndistortResult undistort(const Image& img, const CameraIntrinsics& intr,
                                 const UndistortConfig& cfg = {}, int threads = 1) {
    intr.validate();
    require(img.width == intr.width && img.height == intr.height, "dim_mismatch",
            "image dimensions do not match the camera intrinsics");
    double f = cfg.focal > 0 ? cfg.focal : intr.fx;
    int ow = cfg.out_width > 0 ? cfg.out_width : img.width;
    int oh = cfg.out_height > 0 ? cfg.out_height : img.height;

    UndistortResult res;
    res.image = Image(ow, oh, img.channels);
    double cx = (ow - 1) / 2.0;
    double cy = (oh - 1) / 2.0;

    std::vector<int64_t> fallback_per_row(oh, 0);
    auto remap_rows = [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < ow; ++x) {
                Vec3 ray{(x - cx) / f, (y - cy) / f, 1.0};
                Vec2 src = project_fisheye(ray, intr);
                if (!std::isfinite(src.x) || !std::isfinite(src.y)) {
                    ++fallback_per_row[y];
                    continue;  // leave fill value 0
                }
                for (int c = 0; c < img.channels; ++c)
                    res.image.at(c, y, x) = sample_bilinear_zero(img, c, src.x, src.y);
            }
        }
    };

    if (threads <= 1 || oh < 2 * threads) {
        remap_rows(0, oh);
    } else {
        std::vector<std::thread> pool;
        int chunk = (oh + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            int y0 = t * chunk;
            int y1 = std::min(oh, y0 + chunk);
            if (y0 >= y1) break;
            pool.emplace_back(remap_rows, y0, y1);
        }
        for (auto& th : pool) th.join();
    }
    for (int64_t n : fallback_per_row) res.fallback_pixels += n;
    return res;
}

// Centered crop; offsets are floor((dim - crop) / 2).
inline Image center_crop(const Image& img, int crop_w, int crop_h) {
    require(crop_w > 0 && crop_h > 0, "crop_size", "crop size must be positive");
    require(crop_w <= img.width && crop_h <= img.height, "crop_size",
            "crop size exceeds image size");
    int ox = (img.width - crop_w) / 2;
    int oy = (img.height - crop_h) / 2;
    Image out(crop_w, crop_h, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < crop_h; ++y)
            for (int x = 0; x < crop_w; ++x)
                out.at(c, y, x) = img.at(c, oy + y, ox + x);
    return out;
}

}  // namespace plotyield
