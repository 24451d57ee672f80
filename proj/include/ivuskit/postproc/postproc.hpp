#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "../error.hpp"
#include "../grid.hpp"
#include "../labeling.hpp"

namespace ivuskit {

struct Threshold {
    double t = 0.5;  // in [0,1]
};

namespace detail {

constexpr int kOtsuBins = 256;

inline std::array<std::size_t, kOtsuBins> histogram_256(const ProbMap& map) {
    std::array<std::size_t, kOtsuBins> h{};
    for (double v : map.v) {
        int b = static_cast<int>(v * kOtsuBins);
        if (b < 0) b = 0;
        if (b >= kOtsuBins) b = kOtsuBins - 1;
        ++h[static_cast<std::size_t>(b)];
    }
    return h;
}

}  // namespace detail

// Otsu's threshold on a 256-bin histogram over [0,1]. The returned value is
// the upper boundary of the last bin assigned to the background class; ties
// in between-class variance break toward the lower threshold.
inline Threshold otsu_threshold(const ProbMap& map) {
    if (map.empty()) throw ValidationError("otsu: empty map");
    const auto h = detail::histogram_256(map);
    int occupied = 0;
    for (auto n : h) occupied += (n != 0);
    if (occupied < 2) throw DegenerateInputError("otsu: constant map (single occupied bin)");

    const double total = static_cast<double>(map.size());
    double sum_all = 0.0;
    for (int b = 0; b < detail::kOtsuBins; ++b) sum_all += static_cast<double>(h[b]) * b;

    double w0 = 0.0, sum0 = 0.0;
    double best_var = -1.0;
    int best_k = 0;
    for (int k = 0; k < detail::kOtsuBins - 1; ++k) {
        w0 += static_cast<double>(h[k]);
        sum0 += static_cast<double>(h[k]) * k;
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best_var) {
            best_var = var;
            best_k = k;
        }
    }
    return Threshold{static_cast<double>(best_k + 1) / detail::kOtsuBins};
}

// Strict comparison: value > t is foreground.
inline BinaryMask binarize(const ProbMap& map, Threshold t, Target target) {
    BinaryMask m;
    m.target = target;
    m.values = Grid2D<std::uint8_t>(map.height, map.width);
    for (std::size_t i = 0; i < map.v.size(); ++i) m.values.v[i] = map.v[i] > t.t ? 1 : 0;
    return m;
}

// Keeps only the largest 8-connected foreground component. Equal sizes break
// toward the component whose anchor pixel comes first in raster order.
inline BinaryMask largest_component(const BinaryMask& mask) {
    const ComponentLabels cl = label_components_8(mask.values);
    BinaryMask out;
    out.target = mask.target;
    out.values = Grid2D<std::uint8_t>(mask.height(), mask.width(), 0);
    if (cl.count() == 0) return out;
    std::size_t best = 0;
    for (std::size_t i = 1; i < cl.sizes.size(); ++i) {
        if (cl.sizes[i] > cl.sizes[best]) best = i;  // strict: earlier anchor wins ties
    }
    const auto want = static_cast<std::int32_t>(best);
    for (std::size_t i = 0; i < out.values.v.size(); ++i)
        out.values.v[i] = cl.labels.v[i] == want ? 1 : 0;
    return out;
}

// Probability map -> single-region binary mask. A constant map falls back to
// a fixed 0.5 threshold instead of failing the pipeline.
inline BinaryMask postprocess(const ProbMap& map, Target target) {
    Threshold t{0.5};
    try {
        t = otsu_threshold(map);
    } catch (const DegenerateInputError&) {
        t = Threshold{0.5};
    }
    return largest_component(binarize(map, t, target));
}

}  // namespace ivuskit
