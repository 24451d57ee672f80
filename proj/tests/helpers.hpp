#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ivuskit/grid.hpp"
#include "ivuskit/rng.hpp"

namespace testutil {

using ivuskit::BinaryMask;
using ivuskit::Grid2D;
using ivuskit::ProbMap;
using ivuskit::Target;

// Build a mask from ascii art: '#' foreground, anything else background.
inline BinaryMask mask_from(const std::vector<std::string>& rows, Target t = Target::Lumen) {
    BinaryMask m;
    m.target = t;
    const int h = static_cast<int>(rows.size());
    const int w = h ? static_cast<int>(rows[0].size()) : 0;
    m.values = Grid2D<std::uint8_t>(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) m.values.at(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == '#' ? 1 : 0;
    return m;
}

inline BinaryMask disk_mask(int size, double cy, double cx, double r, Target t = Target::Lumen,
                            bool closed = true) {
    BinaryMask m;
    m.target = t;
    m.values = Grid2D<std::uint8_t>(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dy = y - cy, dx = x - cx;
            const double d2 = dy * dy + dx * dx;
            m.values.at(y, x) = (closed ? d2 <= r * r : d2 < r * r) ? 1 : 0;
        }
    return m;
}

inline BinaryMask ellipse_mask(int size, double cy, double cx, double a, double b,
                               Target t = Target::Lumen) {
    BinaryMask m;
    m.target = t;
    m.values = Grid2D<std::uint8_t>(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dy = y - cy, dx = x - cx;
            m.values.at(y, x) = (dx * dx) / (a * a) + (dy * dy) / (b * b) <= 1.0 ? 1 : 0;
        }
    return m;
}

inline BinaryMask random_mask(ivuskit::Rng& rng, int h, int w, double fg_prob,
                              Target t = Target::Lumen) {
    BinaryMask m;
    m.target = t;
    m.values = Grid2D<std::uint8_t>(h, w);
    for (auto& v : m.values.v) v = rng.uniform() < fg_prob ? 1 : 0;
    return m;
}

// ---- independent oracles, deliberately written the slow direct way ----

inline double oracle_jaccard(const BinaryMask& a, const BinaryMask& b) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.values.v.size(); ++i) {
        const bool x = a.values.v[i] != 0, y = b.values.v[i] != 0;
        inter += (x && y);
        uni += (x || y);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double oracle_hausdorff_px(const std::vector<std::pair<int, int>>& a,
                                  const std::vector<std::pair<int, int>>& b) {
    auto directed = [](const std::vector<std::pair<int, int>>& from,
                       const std::vector<std::pair<int, int>>& to) {
        double worst = 0.0;
        for (const auto& [fr, fc] : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [tr, tc] : to) {
                const double dy = fr - tr, dx = fc - tc;
                best = std::min(best, std::sqrt(dy * dy + dx * dx));
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

// 4-neighbor border pixels, recomputed directly.
inline std::vector<std::pair<int, int>> oracle_border(const BinaryMask& m) {
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < m.height(); ++r)
        for (int c = 0; c < m.width(); ++c) {
            if (!m.values.at(r, c)) continue;
            bool edge = false;
            const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
            for (int k = 0; k < 4; ++k) {
                const int rr = r + dr[k], cc = c + dc[k];
                if (!m.values.in_bounds(rr, cc) || !m.values.at(rr, cc)) edge = true;
            }
            if (edge) out.emplace_back(r, c);
        }
    return out;
}

// Otsu by direct between-class-variance scan over all 255 cut positions.
inline double oracle_otsu(const ProbMap& map) {
    std::array<double, 256> h{};
    for (double v : map.v) {
        int b = static_cast<int>(v * 256.0);
        b = std::clamp(b, 0, 255);
        h[static_cast<std::size_t>(b)] += 1.0;
    }
    double best_var = -1.0;
    int best_k = 0;
    for (int k = 0; k < 255; ++k) {
        double w0 = 0.0, w1 = 0.0, s0 = 0.0, s1 = 0.0;
        for (int b = 0; b <= k; ++b) {
            w0 += h[static_cast<std::size_t>(b)];
            s0 += h[static_cast<std::size_t>(b)] * b;
        }
        for (int b = k + 1; b < 256; ++b) {
            w1 += h[static_cast<std::size_t>(b)];
            s1 += h[static_cast<std::size_t>(b)] * b;
        }
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double mu0 = s0 / w0, mu1 = s1 / w1;
        const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best_var) {
            best_var = var;
            best_k = k;
        }
    }
    return (best_k + 1) / 256.0;
}

inline double oracle_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = oracle_mean(x), my = oracle_mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// Two-tailed p for Pearson r via Simpson quadrature of the t density,
// fully independent of the library's incomplete-beta path.
inline double oracle_pearson_p(double r, std::size_t n) {
    const double df = static_cast<double>(n - 2);
    const double t = std::abs(r) * std::sqrt(df / (1.0 - r * r));
    auto log_gamma = [](double z) { return std::lgamma(z); };
    const double logc = log_gamma((df + 1.0) / 2.0) - log_gamma(df / 2.0) -
                        0.5 * std::log(df * std::acos(-1.0));
    auto pdf = [&](double u) {
        return std::exp(logc - (df + 1.0) / 2.0 * std::log1p(u * u / df));
    };
    // integrate pdf over the finite central interval [0, t]; the tail mass
    // then follows exactly as 1 - 2 * integral, with no truncation error
    const int steps = 200000;
    const double dt = t / steps;
    double acc = pdf(0.0) + pdf(t);
    for (int i = 1; i < steps; ++i) acc += pdf(i * dt) * (i % 2 ? 4.0 : 2.0);
    const double central = acc * dt / 3.0;
    return std::clamp(1.0 - 2.0 * central, 0.0, 1.0);
}

struct OracleAgreement {
    double mae = 0.0, rmse = 0.0, re_min = 0.0, re_max = 0.0;
    double ba_mean = 0.0, loa_low = 0.0, loa_high = 0.0;
};

inline OracleAgreement oracle_agreement(const std::vector<double>& pred,
                                        const std::vector<double>& truth) {
    OracleAgreement o;
    const std::size_t n = pred.size();
    double sa = 0.0, sq = 0.0;
    o.re_min = std::numeric_limits<double>::infinity();
    o.re_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred[i] - truth[i];
        sa += std::abs(d);
        sq += d * d;
        if (truth[i] != 0.0) {
            const double re = d / truth[i];
            o.re_min = std::min(o.re_min, re);
            o.re_max = std::max(o.re_max, re);
        }
    }
    o.mae = sa / static_cast<double>(n);
    o.rmse = std::sqrt(sq / static_cast<double>(n));
    double dm = 0.0;
    for (std::size_t i = 0; i < n; ++i) dm += pred[i] - truth[i];
    dm /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred[i] - truth[i];
        ss += (d - dm) * (d - dm);
    }
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    o.ba_mean = dm;
    o.loa_low = dm - 1.96 * sd;
    o.loa_high = dm + 1.96 * sd;
    return o;
}

// Scratch directory under the build tree, wiped per construction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() / ("ivuskit_test_" + name);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }

    std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

}  // namespace testutil
