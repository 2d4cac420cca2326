#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "plotyield/error.hpp"

namespace plotyield {

namespace detail {

struct SvgAxis {
    double lo = 0, hi = 1;
    double map(double v, double px_lo, double px_hi) const {
        if (hi == lo) return (px_lo + px_hi) / 2;
        return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
    }
};

inline SvgAxis axis_of(const std::vector<double>& v) {
    SvgAxis a;
    a.lo = *std::min_element(v.begin(), v.end());
    a.hi = *std::max_element(v.begin(), v.end());
    double pad = (a.hi - a.lo) * 0.08 + 1e-9;
    a.lo -= pad;
    a.hi += pad;
    return a;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace detail

// Two-panel SVG: truth-vs-estimate scatter with the y=x line, and the
// residuals against truth with a zero line.
inline void write_scatter_residual_svg(const std::string& path,
                                       const std::vector<double>& truth,
                                       const std::vector<double>& est) {
    require(truth.size() == est.size() && truth.size() >= 2, "svg_input",
            "scatter plot needs matched truth/estimate lists");
    std::vector<double> residuals(truth.size());
    for (size_t i = 0; i < truth.size(); ++i) residuals[i] = est[i] - truth[i];

    const double W = 960, H = 420, M = 56;
    const double panel_w = (W - 3 * M) / 2;
    detail::SvgAxis tx = detail::axis_of(truth);
    detail::SvgAxis ey = detail::axis_of(est);
    detail::SvgAxis ry = detail::axis_of(residuals);
    if (ry.lo > 0) ry.lo = -0.05 * ry.hi;
    if (ry.hi < 0) ry.hi = -0.05 * ry.lo;

    std::ofstream out(path);
    if (!out) fail("io_open", "cannot open SVG file for writing: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    auto panel = [&](double x0, const std::string& title, const detail::SvgAxis& ya,
                     const std::vector<double>& ys, bool identity_line) {
        double x1 = x0 + panel_w, y0 = H - M, y1 = M;
        out << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << panel_w
            << "\" height=\"" << y0 - y1 << "\" fill=\"none\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << y1 - 10
            << "\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
        // corner tick labels
        out << "<text x=\"" << x0 << "\" y=\"" << y0 + 16 << "\" font-size=\"11\">"
            << detail::fmt(tx.lo) << "</text>\n";
        out << "<text x=\"" << x1 << "\" y=\"" << y0 + 16
            << "\" text-anchor=\"end\" font-size=\"11\">" << detail::fmt(tx.hi) << "</text>\n";
        out << "<text x=\"" << x0 - 4 << "\" y=\"" << y0
            << "\" text-anchor=\"end\" font-size=\"11\">" << detail::fmt(ya.lo) << "</text>\n";
        out << "<text x=\"" << x0 - 4 << "\" y=\"" << y1 + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << detail::fmt(ya.hi) << "</text>\n";
        if (identity_line) {
            double lo = std::max(tx.lo, ya.lo), hi = std::min(tx.hi, ya.hi);
            out << "<line x1=\"" << tx.map(lo, x0, x1) << "\" y1=\"" << ya.map(lo, y0, y1)
                << "\" x2=\"" << tx.map(hi, x0, x1) << "\" y2=\"" << ya.map(hi, y0, y1)
                << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
        } else {
            out << "<line x1=\"" << x0 << "\" y1=\"" << ya.map(0, y0, y1) << "\" x2=\"" << x1
                << "\" y2=\"" << ya.map(0, y0, y1)
                << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
        }
        for (size_t i = 0; i < truth.size(); ++i)
            out << "<circle cx=\"" << tx.map(truth[i], x0, x1) << "\" cy=\""
                << ya.map(ys[i], y0, y1) << "\" r=\"3\" fill=\"#2266aa\" fill-opacity=\"0.7\"/>\n";
    };

    panel(M, "estimated vs truth", ey, est, true);
    panel(2 * M + panel_w, "residuals (est - truth)", ry, residuals, false);
    out << "</svg>\n";
    if (!out) fail("io_write", "failed writing SVG file: " + path);
}

}  // namespace plotyield
