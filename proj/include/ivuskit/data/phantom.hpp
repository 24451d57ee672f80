#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "../grid.hpp"
#include "../rng.hpp"
#include "loader.hpp"
#include "manifest.hpp"

namespace ivuskit {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

// Synthetic vessel phantom: a bright-banded MA ellipse containing a dark lumen
// ellipse, mid-gray plaque between them, multiplicative speckle on top.
struct PhantomSpec {
    int count = 8;
    int image_size = 128;
    std::uint64_t seed = 0;
    Range lumen_radius_range{8.0, 16.0};   // semi-major axis, px
    Range ma_radius_range{30.0, 46.0};     // semi-major axis, px
    Range ellipse_ratio_range{0.75, 1.0};  // semi-minor / semi-major
    double noise_level = 0.2;              // speckle amplitude in [0,1)
    double pixel_spacing_mm = 0.05;
    int slices_per_patient = 10;

    static constexpr double kContainMarginPx = 3.0;

    double center_jitter() const { return std::max(2.0, image_size / 16.0); }

    void validate() const {
        if (count < 1) throw ValidationError("phantom count must be >= 1");
        if (image_size < 16) throw ValidationError("phantom image_size must be >= 16");
        if (!(pixel_spacing_mm > 0.0)) throw ValidationError("pixel spacing must be positive");
        if (slices_per_patient < 1) throw ValidationError("slices_per_patient must be >= 1");
        for (const Range* r : {&lumen_radius_range, &ma_radius_range, &ellipse_ratio_range}) {
            if (!(r->lo > 0.0) || !(r->hi >= r->lo)) throw ValidationError("phantom range must satisfy 0 < lo <= hi");
        }
        if (ellipse_ratio_range.hi > 1.0) throw ValidationError("ellipse ratio range must lie in (0,1]");
        if (!(noise_level >= 0.0 && noise_level < 1.0)) throw ValidationError("noise_level must be in [0,1)");
        // Worst case lumen must fit strictly inside the worst case MA.
        const double min_ma_minor = ma_radius_range.lo * ellipse_ratio_range.lo;
        if (lumen_radius_range.hi + kContainMarginPx > min_ma_minor)
            throw ValidationError("lumen radius range cannot fit strictly inside ma radius range");
        if (ma_radius_range.hi + center_jitter() > image_size / 2.0 - 2.0)
            throw ValidationError("ma radius range exceeds image bounds");
    }
};

namespace detail {

struct Ellipse {
    double cy = 0.0, cx = 0.0;  // center
    double a = 0.0, b = 0.0;    // semi-axes (a along rotated x)
    double cos_t = 1.0, sin_t = 0.0;

    bool contains(double y, double x) const {
        const double dy = y - cy, dx = x - cx;
        const double u = dx * cos_t + dy * sin_t;
        const double w = -dx * sin_t + dy * cos_t;
        return (u * u) / (a * a) + (w * w) / (b * b) <= 1.0;
    }
};

struct PhantomSlice {
    Grid2D<double> image;
    BinaryMask lumen;
    BinaryMask ma;
};

inline PhantomSlice generate_slice(const PhantomSpec& spec, std::uint64_t index) {
    Rng rng(mix_seed(spec.seed, index));
    const int n = spec.image_size;
    const double half = n / 2.0;
    const double jit = spec.center_jitter();

    Ellipse ma;
    ma.cy = half + rng.uniform(-jit, jit);
    ma.cx = half + rng.uniform(-jit, jit);
    ma.a = rng.uniform(spec.ma_radius_range.lo, spec.ma_radius_range.hi);
    ma.b = ma.a * rng.uniform(spec.ellipse_ratio_range.lo, spec.ellipse_ratio_range.hi);
    {
        const double t = rng.uniform(0.0, 3.14159265358979323846);
        ma.cos_t = std::cos(t);
        ma.sin_t = std::sin(t);
    }

    Ellipse lum;
    lum.a = rng.uniform(spec.lumen_radius_range.lo, spec.lumen_radius_range.hi);
    lum.b = lum.a * rng.uniform(spec.ellipse_ratio_range.lo, spec.ellipse_ratio_range.hi);
    {
        const double t = rng.uniform(0.0, 3.14159265358979323846);
        lum.cos_t = std::cos(t);
        lum.sin_t = std::sin(t);
    }
    // Offset bounded so the lumen stays strictly inside the MA minor axis.
    const double slack = ma.b - lum.a - PhantomSpec::kContainMarginPx;
    const double off_r = rng.uniform(0.0, std::max(0.0, slack));
    const double off_t = rng.uniform(0.0, 6.28318530717958647692);
    lum.cy = ma.cy + off_r * std::sin(off_t);
    lum.cx = ma.cx + off_r * std::cos(off_t);

    PhantomSlice s;
    s.image = Grid2D<double>(n, n);
    s.lumen.target = Target::Lumen;
    s.lumen.values = Grid2D<std::uint8_t>(n, n, 0);
    s.ma.target = Target::Ma;
    s.ma.values = Grid2D<std::uint8_t>(n, n, 0);

    Ellipse band = ma;  // bright adventitia ring just outside the MA border
    band.a = ma.a + 5.0;
    band.b = ma.b + 5.0;

    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double y = r, x = c;
            const bool in_ma = ma.contains(y, x);
            const bool in_lum = in_ma && lum.contains(y, x);
            double base;
            if (in_lum)
                base = 0.15;
            else if (in_ma)
                base = 0.45;
            else if (band.contains(y, x))
                base = 0.8;
            else
                base = 0.3;
            const double speckle = 1.0 + spec.noise_level * rng.uniform(-1.0, 1.0);
            s.image.at(r, c) = std::clamp(base * speckle, 0.0, 1.0);
            s.ma.values.at(r, c) = in_ma ? 1 : 0;
            s.lumen.values.at(r, c) = in_lum ? 1 : 0;
        }
    }

    // Construction guarantees containment; treat any violation as a hard bug.
    for (std::size_t i = 0; i < s.lumen.values.v.size(); ++i) {
        if (s.lumen.values.v[i] && !s.ma.values.v[i])
            throw Error("phantom generation produced lumen pixel outside ma");
    }
    return s;
}

inline std::string slice_name(std::uint64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%04llu", static_cast<unsigned long long>(index));
    return buf;
}

}  // namespace detail

// Writes `count` image/mask triples plus manifest.json under out_dir.
// Deterministic for a given spec; per-slice streams make ordering irrelevant.
inline DatasetManifest phantom_generate(const PhantomSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "masks_lumen");
    fs::create_directories(out_dir / "masks_ma");

    DatasetManifest m;
    m.base_dir = out_dir;
    m.pixel_spacing.mm_per_px = spec.pixel_spacing_mm;

    for (int i = 0; i < spec.count; ++i) {
        detail::PhantomSlice s = detail::generate_slice(spec, static_cast<std::uint64_t>(i));
        const std::string name = detail::slice_name(static_cast<std::uint64_t>(i)) + ".png";
        write_image_png((out_dir / "images" / name).string(), s.image);
        write_mask_png((out_dir / "masks_lumen" / name).string(), s.lumen);
        write_mask_png((out_dir / "masks_ma" / name).string(), s.ma);

        ManifestEntry e;
        e.image_path = "images/" + name;
        e.lumen_mask_path = "masks_lumen/" + name;
        e.ma_mask_path = "masks_ma/" + name;
        char pbuf[32];
        std::snprintf(pbuf, sizeof(pbuf), "p%03d", i / spec.slices_per_patient);
        e.patient_id = pbuf;
        e.slice_id = detail::slice_name(static_cast<std::uint64_t>(i));
        m.entries.push_back(std::move(e));
    }

    save_manifest(m, out_dir / "manifest.json");
    return m;
}

}  // namespace ivuskit
