#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace ivuskit {

// Segmentation targets, in fixed channel order.
enum class Target : int { Lumen = 0, Ma = 1 };

inline const char* target_name(Target t) {
    return t == Target::Lumen ? "lumen" : "ma";
}

// Dense row-major H x W grid.
template <typename T>
struct Grid2D {
    int height = 0;
    int width = 0;
    std::vector<T> v;

    Grid2D() = default;
    Grid2D(int h, int w, T fill = T{})
        : height(h), width(w), v(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

    T& at(int r, int c) { return v[static_cast<std::size_t>(r) * width + c]; }
    const T& at(int r, int c) const { return v[static_cast<std::size_t>(r) * width + c]; }

    T* row(int r) { return v.data() + static_cast<std::size_t>(r) * width; }
    const T* row(int r) const { return v.data() + static_cast<std::size_t>(r) * width; }

    std::size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }

    bool same_shape(const Grid2D& o) const { return height == o.height && width == o.width; }

    bool in_bounds(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }
};

// Millimetres per pixel, isotropic.
struct PixelSpacing {
    double mm_per_px = 0.0;

    void validate() const {
        if (!(mm_per_px > 0.0) || !std::isfinite(mm_per_px))
            throw ValidationError("pixel spacing must be positive");
    }
};

// One grayscale cross-sectional frame, intensities in [0,1].
struct ImageSlice {
    Grid2D<double> pixels;
    std::string patient_id;
    std::string slice_id;

    int height() const { return pixels.height; }
    int width() const { return pixels.width; }
};

// Per-pixel {0,1} segmentation map for one target.
struct BinaryMask {
    Grid2D<std::uint8_t> values;
    Target target = Target::Lumen;

    int height() const { return values.height; }
    int width() const { return values.width; }

    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (auto x : values.v) n += (x != 0);
        return n;
    }
};

// Single-channel probability map in [0,1].
using ProbMap = Grid2D<double>;

// One probability channel tagged with its target.
struct TargetMap {
    Target target = Target::Lumen;
    ProbMap map;
};

inline void require_same_shape(int h1, int w1, int h2, int w2, const char* what) {
    if (h1 != h2 || w1 != w2)
        throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(h1) + "x" +
                              std::to_string(w1) + " vs " + std::to_string(h2) + "x" + std::to_string(w2) + ")");
}

}  // namespace ivuskit
