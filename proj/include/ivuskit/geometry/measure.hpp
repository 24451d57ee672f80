#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "../error.hpp"
#include "../grid.hpp"
#include "../labeling.hpp"
#include "contour.hpp"

namespace ivuskit {

// Distances from a center point to the region border along K uniformly spaced
// ray directions over [0, 2pi).
struct RadialProfile {
    int angle_count = 0;
    std::vector<double> r;  // pixels; 0 when the ray never enters the region
};

namespace detail {

// Bilinear interpolation of the {0,1} mask as a continuous field;
// positions outside the grid read 0.
inline double mask_bilinear(const Grid2D<std::uint8_t>& g, double y, double x) {
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0, fx = x - x0;
    auto val = [&](int r, int c) -> double {
        return g.in_bounds(r, c) ? static_cast<double>(g.at(r, c)) : 0.0;
    };
    return val(y0, x0) * (1 - fy) * (1 - fx) + val(y0, x0 + 1) * (1 - fy) * fx +
           val(y0 + 1, x0) * fy * (1 - fx) + val(y0 + 1, x0 + 1) * fy * fx;
}

constexpr double kRayStepPx = 0.25;

// Walks one ray outward and returns the distance of the last crossing of the
// interpolated field through 0.5 (foreground to background), refined linearly
// between the two bracketing samples. 0 if the field never reaches 0.5.
inline double ray_border_distance(const Grid2D<std::uint8_t>& g, double cy, double cx, double dy, double dx) {
    const double s_max = std::hypot(static_cast<double>(g.height), static_cast<double>(g.width)) + 2.0;
    double last = 0.0;
    bool found = false;
    double prev = mask_bilinear(g, cy, cx);
    double s_prev = 0.0;
    for (double s = kRayStepPx; s <= s_max; s += kRayStepPx) {
        const double cur = mask_bilinear(g, cy + s * dy, cx + s * dx);
        if (prev >= 0.5 && cur < 0.5) {
            last = s_prev + kRayStepPx * (prev - 0.5) / (prev - cur);
            found = true;
        }
        prev = cur;
        s_prev = s;
    }
    return found ? last : 0.0;
}

inline void require_valid_angle_count(int k) {
    if (k < 360 || (k % 2) != 0)
        throw ValidationError("angular sample count must be even and >= 360, got " + std::to_string(k));
}

inline void require_single_component(const BinaryMask& m, const char* what) {
    if (label_components_8(m.values).count() != 1)
        throw MeasurementError(std::string(what) + " mask must be a single connected region");
}

}  // namespace detail

inline RadialProfile radial_profile(const BinaryMask& mask, const Centroid& center, int angle_count) {
    detail::require_valid_angle_count(angle_count);
    RadialProfile p;
    p.angle_count = angle_count;
    p.r.resize(angle_count);
    const double two_pi = 6.28318530717958647692;
    for (int k = 0; k < angle_count; ++k) {
        const double t = two_pi * k / angle_count;
        p.r[k] = detail::ray_border_distance(mask.values, center.row, center.col, std::sin(t), std::cos(t));
    }
    return p;
}

// Longest and shortest diameter through the center of mass, in mm.
// diameter(theta) = r(theta) + r(theta+pi) over K/2 orientations.
inline std::pair<double, double> diameter_extrema(const BinaryMask& mask, PixelSpacing ps, int angle_count = 720) {
    ps.validate();
    detail::require_valid_angle_count(angle_count);
    const std::size_t fg = mask.foreground_count();
    if (fg == 0) throw MeasurementError("cannot measure diameters of empty region");
    if (fg == 1) {
        // Degenerate region measures one pixel extent.
        return {ps.mm_per_px, ps.mm_per_px};
    }
    const Centroid c = center_of_mass(mask);
    const int cr = static_cast<int>(std::lround(c.row));
    const int cc = static_cast<int>(std::lround(c.col));
    if (!mask.values.in_bounds(cr, cc) || !mask.values.at(cr, cc))
        throw MeasurementError("region centroid falls outside the foreground; diameters undefined");
    const RadialProfile p = radial_profile(mask, c, angle_count);
    double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
    const int half = angle_count / 2;
    for (int k = 0; k < half; ++k) {
        const double d = p.r[k] + p.r[k + half];
        dmax = std::max(dmax, d);
        dmin = std::min(dmin, d);
    }
    return {dmax * ps.mm_per_px, dmin * ps.mm_per_px};
}

// Foreground pixel count scaled to physical area.
inline double region_csa(const BinaryMask& mask, PixelSpacing ps) {
    ps.validate();
    return static_cast<double>(mask.foreground_count()) * ps.mm_per_px * ps.mm_per_px;
}

// Plaque-plus-media thickness extrema: per-ray difference of the MA and lumen
// border distances, all rays cast from the lumen center of mass.
inline std::pair<double, double> thickness_extrema(const BinaryMask& lumen, const BinaryMask& ma, PixelSpacing ps,
                                                   int angle_count = 720) {
    ps.validate();
    detail::require_valid_angle_count(angle_count);
    require_same_shape(lumen.height(), lumen.width(), ma.height(), ma.width(), "thickness masks");
    if (lumen.foreground_count() == 0 || ma.foreground_count() == 0)
        throw MeasurementError("cannot measure thickness with an empty region");
    for (std::size_t i = 0; i < lumen.values.v.size(); ++i) {
        if (lumen.values.v[i] && !ma.values.v[i])
            throw MeasurementError("lumen is not contained in ma; clamp the lumen mask first");
    }
    const Centroid c = center_of_mass(lumen);
    const RadialProfile pl = radial_profile(lumen, c, angle_count);
    const RadialProfile pm = radial_profile(ma, c, angle_count);
    double tmax = 0.0, tmin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < angle_count; ++k) {
        const double t = std::max(0.0, pm.r[k] - pl.r[k]);
        tmax = std::max(tmax, t);
        tmin = std::min(tmin, t);
    }
    return {tmax * ps.mm_per_px, tmin * ps.mm_per_px};
}

// The 12 consensus clinical parameters for one slice.
struct ClinicalReport {
    double max_eem_diam = 0.0;       // mm
    double min_eem_diam = 0.0;       // mm
    double eem_csa = 0.0;            // mm^2
    double max_lumen_diam = 0.0;     // mm
    double min_lumen_diam = 0.0;     // mm
    double lumen_csa = 0.0;          // mm^2
    double lumen_eccentricity = 0.0;
    double max_pm_thickness = 0.0;   // mm
    double min_pm_thickness = 0.0;   // mm
    double pm_csa = 0.0;             // mm^2
    double pm_eccentricity = 0.0;
    double plaque_burden = 0.0;

    static constexpr int kParameterCount = 12;

    static const std::array<const char*, kParameterCount>& parameter_names() {
        static const std::array<const char*, kParameterCount> names = {
            "max_eem_diam",   "min_eem_diam",   "eem_csa",          "max_lumen_diam",
            "min_lumen_diam", "lumen_csa",      "lumen_eccentricity", "max_pm_thickness",
            "min_pm_thickness", "pm_csa",       "pm_eccentricity",  "plaque_burden"};
        return names;
    }

    double value(int i) const {
        const std::array<double, kParameterCount> vals = {
            max_eem_diam,   min_eem_diam,   eem_csa,          max_lumen_diam,
            min_lumen_diam, lumen_csa,      lumen_eccentricity, max_pm_thickness,
            min_pm_thickness, pm_csa,       pm_eccentricity,  plaque_burden};
        return vals[static_cast<std::size_t>(i)];
    }

    static ClinicalReport from_values(const std::array<double, kParameterCount>& v) {
        ClinicalReport r;
        r.max_eem_diam = v[0];
        r.min_eem_diam = v[1];
        r.eem_csa = v[2];
        r.max_lumen_diam = v[3];
        r.min_lumen_diam = v[4];
        r.lumen_csa = v[5];
        r.lumen_eccentricity = v[6];
        r.max_pm_thickness = v[7];
        r.min_pm_thickness = v[8];
        r.pm_csa = v[9];
        r.pm_eccentricity = v[10];
        r.plaque_burden = v[11];
        return r;
    }
};

// Assembles all 12 parameters. Unitless outputs (eccentricities, plaque
// burden) are formed from pixel-space quantities before any ps scaling, so
// they are bit-identical under a change of pixel spacing.
inline ClinicalReport measure_all(const BinaryMask& lumen, const BinaryMask& ma, PixelSpacing ps,
                                  int angle_count = 720) {
    ps.validate();
    require_same_shape(lumen.height(), lumen.width(), ma.height(), ma.width(), "measurement masks");
    if (lumen.foreground_count() == 0 || ma.foreground_count() == 0)
        throw MeasurementError("cannot measure an empty region");
    detail::require_single_component(lumen, "lumen");
    detail::require_single_component(ma, "ma");

    const PixelSpacing unit{1.0};
    const auto [eem_max_px, eem_min_px] = diameter_extrema(ma, unit, angle_count);
    const auto [lum_max_px, lum_min_px] = diameter_extrema(lumen, unit, angle_count);
    const auto [pm_max_px, pm_min_px] = thickness_extrema(lumen, ma, unit, angle_count);

    const auto eem_px = static_cast<double>(ma.foreground_count());
    const auto lum_px = static_cast<double>(lumen.foreground_count());

    ClinicalReport r;
    const double mm = ps.mm_per_px;
    const double mm2 = ps.mm_per_px * ps.mm_per_px;
    r.max_eem_diam = eem_max_px * mm;
    r.min_eem_diam = eem_min_px * mm;
    r.eem_csa = eem_px * mm2;
    r.max_lumen_diam = lum_max_px * mm;
    r.min_lumen_diam = lum_min_px * mm;
    r.lumen_csa = lum_px * mm2;
    r.lumen_eccentricity = lum_max_px > 0.0 ? (lum_max_px - lum_min_px) / lum_max_px : 0.0;
    r.max_pm_thickness = pm_max_px * mm;
    r.min_pm_thickness = pm_min_px * mm;
    r.pm_csa = (eem_px - lum_px) * mm2;  // integer pixel arithmetic before scaling
    r.pm_eccentricity = pm_max_px > 0.0 ? (pm_max_px - pm_min_px) / pm_max_px : 0.0;
    r.plaque_burden = (eem_px - lum_px) / eem_px;
    return r;
}

}  // namespace ivuskit
