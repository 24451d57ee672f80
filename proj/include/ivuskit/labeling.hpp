#pragma once

#include <cstdint>
#include <vector>

#include "grid.hpp"

namespace ivuskit {

// 8-connected component labeling by raster-scan seeded flood fill.
// Labels are assigned in raster order of each component's anchor pixel, so
// label 0's anchor is the smallest (row, col) among all components.
struct ComponentLabels {
    Grid2D<std::int32_t> labels;      // -1 for background
    std::vector<std::size_t> sizes;   // pixels per label
    int count() const { return static_cast<int>(sizes.size()); }
};

inline ComponentLabels label_components_8(const Grid2D<std::uint8_t>& mask) {
    ComponentLabels out;
    out.labels = Grid2D<std::int32_t>(mask.height, mask.width, -1);
    std::vector<std::pair<int, int>> stack;
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (!mask.at(r, c) || out.labels.at(r, c) >= 0) continue;
            const std::int32_t id = static_cast<std::int32_t>(out.sizes.size());
            out.sizes.push_back(0);
            stack.clear();
            stack.emplace_back(r, c);
            out.labels.at(r, c) = id;
            while (!stack.empty()) {
                auto [y, x] = stack.back();
                stack.pop_back();
                ++out.sizes[id];
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (!dy && !dx) continue;
                        const int ny = y + dy, nx = x + dx;
                        if (!mask.in_bounds(ny, nx)) continue;
                        if (!mask.at(ny, nx) || out.labels.at(ny, nx) >= 0) continue;
                        out.labels.at(ny, nx) = id;
                        stack.emplace_back(ny, nx);
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace ivuskit
