#pragma once

#include <set>
#include <string>
#include <tuple>

#include "../grid.hpp"
#include "../io/png_io.hpp"
#include "manifest.hpp"

namespace ivuskit {

struct SlicePair {
    ImageSlice image;
    BinaryMask lumen;
    BinaryMask ma;
};

namespace detail {

// Masks may use any two intensity levels; foreground is the higher one.
inline BinaryMask binarize_mask(const Grid2D<std::uint8_t>& raw, Target target, const std::string& path) {
    std::set<std::uint8_t> levels(raw.v.begin(), raw.v.end());
    if (levels.size() > 2)
        throw ValidationError("mask has " + std::to_string(levels.size()) + " distinct levels, expected 2: " + path);
    std::uint8_t fg_level = 255;
    if (levels.size() == 2) {
        fg_level = *levels.rbegin();
    } else if (levels.size() == 1) {
        // Constant mask: all-zero means empty, anything else means full.
        fg_level = *levels.begin() == 0 ? 255 : *levels.begin();
    }
    BinaryMask m;
    m.target = target;
    m.values = Grid2D<std::uint8_t>(raw.height, raw.width);
    for (std::size_t i = 0; i < raw.v.size(); ++i) m.values.v[i] = (raw.v[i] == fg_level) ? 1 : 0;
    return m;
}

}  // namespace detail

// Loads one image/lumen/MA triple. Image intensities come back as value/255
// exactly; masks are binarized with foreground = higher intensity level.
inline SlicePair load_pair(const DatasetManifest& manifest, const ManifestEntry& entry) {
    SlicePair p;
    const std::string img_path = manifest.resolve(entry.image_path).string();
    const std::string lum_path = manifest.resolve(entry.lumen_mask_path).string();
    const std::string ma_path = manifest.resolve(entry.ma_mask_path).string();

    Grid2D<std::uint8_t> raw = read_png_gray8(img_path);
    p.image.pixels = Grid2D<double>(raw.height, raw.width);
    for (std::size_t i = 0; i < raw.v.size(); ++i) p.image.pixels.v[i] = raw.v[i] / 255.0;
    p.image.patient_id = entry.patient_id;
    p.image.slice_id = entry.slice_id;
    if (raw.height < 16 || raw.width < 16)
        throw ValidationError("image smaller than 16x16: " + img_path);

    Grid2D<std::uint8_t> lum_raw = read_png_gray8(lum_path);
    require_same_shape(raw.height, raw.width, lum_raw.height, lum_raw.width, ("lumen mask " + lum_path).c_str());
    p.lumen = detail::binarize_mask(lum_raw, Target::Lumen, lum_path);

    Grid2D<std::uint8_t> ma_raw = read_png_gray8(ma_path);
    require_same_shape(raw.height, raw.width, ma_raw.height, ma_raw.width, ("ma mask " + ma_path).c_str());
    p.ma = detail::binarize_mask(ma_raw, Target::Ma, ma_path);

    return p;
}

// Load-time divisibility check for a configured model depth.
inline void require_divisible(const ImageSlice& s, int depth) {
    const int d = 1 << depth;
    if (s.height() % d != 0 || s.width() % d != 0)
        throw ValidationError("image " + s.slice_id + " dims " + std::to_string(s.height()) + "x" +
                              std::to_string(s.width()) + " not divisible by 2^" + std::to_string(depth));
}

inline void write_mask_png(const std::string& path, const BinaryMask& m) {
    Grid2D<std::uint8_t> raw(m.height(), m.width());
    for (std::size_t i = 0; i < raw.v.size(); ++i) raw.v[i] = m.values.v[i] ? 255 : 0;
    write_png_gray8(path, raw);
}

inline void write_image_png(const std::string& path, const Grid2D<double>& img) {
    Grid2D<std::uint8_t> raw(img.height, img.width);
    for (std::size_t i = 0; i < raw.v.size(); ++i) {
        double x = img.v[i];
        x = x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x);
        raw.v[i] = static_cast<std::uint8_t>(x * 255.0 + 0.5);
    }
    write_png_gray8(path, raw);
}

}  // namespace ivuskit
