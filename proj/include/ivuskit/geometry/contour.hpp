#pragma once

#include <utility>
#include <vector>

#include "../error.hpp"
#include "../grid.hpp"

namespace ivuskit {

// Border pixel set of a mask region: foreground pixels with at least one
// background 4-neighbor. Points are kept in raster order.
struct Contour {
    std::vector<std::pair<int, int>> points;  // (row, col)

    bool empty() const { return points.empty(); }
    std::size_t size() const { return points.size(); }
};

inline Contour extract_contour(const BinaryMask& mask) {
    if (mask.foreground_count() == 0) throw MeasurementError("cannot extract contour of empty region");
    Contour c;
    const auto& g = mask.values;
    auto bg = [&](int r, int col) { return !g.in_bounds(r, col) || g.at(r, col) == 0; };
    for (int r = 0; r < g.height; ++r) {
        for (int col = 0; col < g.width; ++col) {
            if (!g.at(r, col)) continue;
            if (bg(r - 1, col) || bg(r + 1, col) || bg(r, col - 1) || bg(r, col + 1))
                c.points.emplace_back(r, col);
        }
    }
    return c;
}

// Real-valued center of mass of the foreground, pixel units.
struct Centroid {
    double row = 0.0;
    double col = 0.0;
};

inline Centroid center_of_mass(const BinaryMask& mask) {
    double sr = 0.0, sc = 0.0;
    std::size_t n = 0;
    const auto& g = mask.values;
    for (int r = 0; r < g.height; ++r) {
        const auto* row = g.row(r);
        for (int c = 0; c < g.width; ++c) {
            if (row[c]) {
                sr += r;
                sc += c;
                ++n;
            }
        }
    }
    if (n == 0) throw MeasurementError("cannot compute centroid of empty region");
    return Centroid{sr / static_cast<double>(n), sc / static_cast<double>(n)};
}

}  // namespace ivuskit
