#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ivuskit/io/png_io.hpp"
#include "ivuskit/stats/stats.hpp"

namespace ivuskit {

// Text-free raster plots: enough to eyeball agreement, deliberately minimal.
class PlotCanvas {
public:
    PlotCanvas(int height, int width) : h_(height), w_(width), rgb_(static_cast<std::size_t>(height) * width * 3, 255) {}

    void pixel(int y, int x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        if (y < 0 || y >= h_ || x < 0 || x >= w_) return;
        const std::size_t k = (static_cast<std::size_t>(y) * w_ + x) * 3;
        rgb_[k] = r;
        rgb_[k + 1] = g;
        rgb_[k + 2] = b;
    }

    void dot(int y, int x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) pixel(y + dy, x + dx, r, g, b);
    }

    void line(double y0, double x0, double y1, double x1, std::uint8_t r, std::uint8_t g,
              std::uint8_t b) {
        const double steps = std::max(std::abs(y1 - y0), std::abs(x1 - x0));
        const int n = std::max(1, static_cast<int>(std::ceil(steps)));
        for (int i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) / n;
            pixel(static_cast<int>(std::lround(y0 + t * (y1 - y0))),
                  static_cast<int>(std::lround(x0 + t * (x1 - x0))), r, g, b);
        }
    }

    void save(const std::string& path) const { write_png_rgb8(path, h_, w_, rgb_); }

    int height() const { return h_; }
    int width() const { return w_; }

private:
    int h_, w_;
    std::vector<std::uint8_t> rgb_;
};

namespace detail {

struct AxisRange {
    double lo = 0.0, hi = 1.0;

    static AxisRange of(const std::vector<double>& v, double pad_frac = 0.08) {
        AxisRange r;
        if (v.empty()) return r;
        r.lo = *std::min_element(v.begin(), v.end());
        r.hi = *std::max_element(v.begin(), v.end());
        if (r.hi - r.lo < 1e-12) {
            r.lo -= 0.5;
            r.hi += 0.5;
        }
        const double pad = (r.hi - r.lo) * pad_frac;
        r.lo -= pad;
        r.hi += pad;
        return r;
    }

    double frac(double x) const { return (x - lo) / (hi - lo); }
};

} // namespace detail

constexpr int kPlotSize = 480;
constexpr int kPlotMargin = 36;

// Truth on x, prediction on y, gray identity line.
inline void render_scatter_png(const std::string& path,
                               const std::vector<std::pair<double, double>>& truth_pred) {
    PlotCanvas c(kPlotSize, kPlotSize);
    std::vector<double> all;
    for (const auto& [t, p] : truth_pred) {
        all.push_back(t);
        all.push_back(p);
    }
    const auto range = detail::AxisRange::of(all);
    const double span = kPlotSize - 2.0 * kPlotMargin;
    auto px = [&](double v) { return kPlotMargin + range.frac(v) * span; };
    auto py = [&](double v) { return kPlotSize - kPlotMargin - range.frac(v) * span; };

    c.line(py(range.lo), px(range.lo), py(range.lo), px(range.hi), 0, 0, 0);
    c.line(py(range.lo), px(range.lo), py(range.hi), px(range.lo), 0, 0, 0);
    c.line(py(range.lo), px(range.lo), py(range.hi), px(range.hi), 170, 170, 170);
    for (const auto& [t, p] : truth_pred)
        c.dot(static_cast<int>(std::lround(py(p))), static_cast<int>(std::lround(px(t))), 30, 60, 160);
    c.save(path);
}

// Average on x, difference on y; solid mean line, gray limits of agreement.
inline void render_bland_altman_png(const std::string& path, const BlandAltman& ba) {
    PlotCanvas c(kPlotSize, kPlotSize);
    std::vector<double> xs, ys;
    for (const auto& [avg, diff] : ba.points) {
        xs.push_back(avg);
        ys.push_back(diff);
    }
    ys.push_back(ba.loa_low);
    ys.push_back(ba.loa_high);
    const auto rx = detail::AxisRange::of(xs);
    const auto ry = detail::AxisRange::of(ys);
    const double span = kPlotSize - 2.0 * kPlotMargin;
    auto px = [&](double v) { return kPlotMargin + rx.frac(v) * span; };
    auto py = [&](double v) { return kPlotSize - kPlotMargin - ry.frac(v) * span; };

    c.line(py(ry.lo), px(rx.lo), py(ry.lo), px(rx.hi), 0, 0, 0);
    c.line(py(ry.lo), px(rx.lo), py(ry.hi), px(rx.lo), 0, 0, 0);
    c.line(py(ba.ba_mean), px(rx.lo), py(ba.ba_mean), px(rx.hi), 160, 40, 40);
    c.line(py(ba.loa_low), px(rx.lo), py(ba.loa_low), px(rx.hi), 150, 150, 150);
    c.line(py(ba.loa_high), px(rx.lo), py(ba.loa_high), px(rx.hi), 150, 150, 150);
    for (const auto& [avg, diff] : ba.points)
        c.dot(static_cast<int>(std::lround(py(diff))), static_cast<int>(std::lround(px(avg))), 30, 60, 160);
    c.save(path);
}

} // namespace ivuskit
