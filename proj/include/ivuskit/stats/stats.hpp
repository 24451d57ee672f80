#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "../error.hpp"
#include "../geometry/measure.hpp"

namespace ivuskit {

struct PearsonResult {
    double r = 0.0;
    double p = 1.0;  // two-tailed
};

// Product-moment correlation with significance from the exact t distribution
// (t = r sqrt((n-2)/(1-r^2)), n-2 degrees of freedom).
inline PearsonResult pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("pearson_r: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw ValidationError("pearson_r requires n >= 3");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DegenerateInputError("pearson_r: zero variance input");

    PearsonResult out;
    out.r = sxy / std::sqrt(sxx * syy);
    if (out.r > 1.0) out.r = 1.0;
    if (out.r < -1.0) out.r = -1.0;

    const double df = static_cast<double>(n - 2);
    const double denom = 1.0 - out.r * out.r;
    if (denom <= 0.0) {
        out.p = 0.0;
    } else {
        const double t = std::fabs(out.r) * std::sqrt(df / denom);
        boost::math::students_t dist(df);
        out.p = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    }
    return out;
}

struct ErrorStats {
    double mae = 0.0;
    double rmse = 0.0;
    double re_min = 0.0;
    double re_max = 0.0;
    int re_excluded = 0;  // samples with zero truth, where RE is undefined
};

inline ErrorStats error_stats(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.size() != truth.size()) throw ValidationError("error_stats: length mismatch");
    if (pred.empty()) throw ValidationError("error_stats requires n >= 1");
    ErrorStats s;
    double abs_sum = 0.0, sq_sum = 0.0;
    double re_min = std::numeric_limits<double>::infinity();
    double re_max = -std::numeric_limits<double>::infinity();
    int re_n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        abs_sum += std::fabs(d);
        sq_sum += d * d;
        if (truth[i] != 0.0) {
            const double re = d / truth[i];
            re_min = std::min(re_min, re);
            re_max = std::max(re_max, re);
            ++re_n;
        } else {
            ++s.re_excluded;
        }
    }
    const double n = static_cast<double>(pred.size());
    s.mae = abs_sum / n;
    s.rmse = std::sqrt(sq_sum / n);
    s.re_min = re_n ? re_min : 0.0;
    s.re_max = re_n ? re_max : 0.0;
    return s;
}

struct BlandAltman {
    double ba_mean = 0.0;   // mean difference
    double loa_low = 0.0;   // ba_mean - 1.96 sd
    double loa_high = 0.0;  // ba_mean + 1.96 sd
    std::vector<std::pair<double, double>> points;  // (average, difference)
};

inline BlandAltman bland_altman(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.size() != truth.size()) throw ValidationError("bland_altman: length mismatch");
    const std::size_t n = pred.size();
    if (n < 2) throw ValidationError("bland_altman requires n >= 2");
    BlandAltman b;
    b.points.reserve(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred[i] - truth[i];
        b.points.emplace_back((pred[i] + truth[i]) / 2.0, d);
        mean += d;
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& [a, d] : b.points) ss += (d - mean) * (d - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    b.ba_mean = mean;
    b.loa_low = mean - 1.96 * sd;
    b.loa_high = mean + 1.96 * sd;
    return b;
}

// One Table-style agreement row for one clinical parameter. r/p are absent
// when either side has zero variance.
struct AgreementStats {
    std::string parameter;
    int n = 0;
    std::optional<double> r;
    std::optional<double> p;
    double mae = 0.0;
    double rmse = 0.0;
    double re_min = 0.0;
    double re_max = 0.0;
    int re_excluded = 0;
    double ba_mean = 0.0;
    double loa_low = 0.0;
    double loa_high = 0.0;
};

struct AgreementReport {
    std::vector<AgreementStats> rows;  // 12 parameters
    AgreementStats mean_row;           // unweighted mean over parameters (mixed units)
    std::vector<BlandAltman> ba;       // per parameter, for plotting
    std::vector<std::vector<std::pair<double, double>>> scatter;  // (truth, pred) per parameter
};

// Builds the full 12-parameter agreement analysis from aligned report lists.
inline AgreementReport agreement_report(const std::vector<ClinicalReport>& pred,
                                        const std::vector<ClinicalReport>& truth) {
    if (pred.size() != truth.size()) throw ValidationError("agreement_report: misaligned report lists");
    if (pred.size() < 3) throw ValidationError("agreement_report requires at least 3 aligned slices");

    AgreementReport rep;
    const auto& names = ClinicalReport::parameter_names();
    double sum_r = 0.0, sum_p = 0.0;
    int n_r = 0;
    double sum_mae = 0.0, sum_rmse = 0.0, sum_ba = 0.0;

    for (int pi = 0; pi < ClinicalReport::kParameterCount; ++pi) {
        std::vector<double> xp, xt;
        xp.reserve(pred.size());
        xt.reserve(truth.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
            xp.push_back(pred[i].value(pi));
            xt.push_back(truth[i].value(pi));
        }
        AgreementStats row;
        row.parameter = names[static_cast<std::size_t>(pi)];
        row.n = static_cast<int>(xp.size());
        try {
            const PearsonResult pr = pearson_r(xt, xp);
            row.r = pr.r;
            row.p = pr.p;
            sum_r += pr.r;
            sum_p += pr.p;
            ++n_r;
        } catch (const DegenerateInputError&) {
            // zero-variance parameter: r undefined, remaining columns still reported
        }
        const ErrorStats es = error_stats(xp, xt);
        row.mae = es.mae;
        row.rmse = es.rmse;
        row.re_min = es.re_min;
        row.re_max = es.re_max;
        row.re_excluded = es.re_excluded;
        const BlandAltman b = bland_altman(xp, xt);
        row.ba_mean = b.ba_mean;
        row.loa_low = b.loa_low;
        row.loa_high = b.loa_high;
        sum_mae += es.mae;
        sum_rmse += es.rmse;
        sum_ba += b.ba_mean;

        std::vector<std::pair<double, double>> sc;
        sc.reserve(xp.size());
        for (std::size_t i = 0; i < xp.size(); ++i) sc.emplace_back(xt[i], xp[i]);
        rep.scatter.push_back(std::move(sc));
        rep.ba.push_back(std::move(b));
        rep.rows.push_back(std::move(row));
    }

    const double k = static_cast<double>(ClinicalReport::kParameterCount);
    rep.mean_row.parameter = "mean";
    rep.mean_row.n = rep.rows.empty() ? 0 : rep.rows.front().n;
    if (n_r > 0) {
        rep.mean_row.r = sum_r / n_r;
        rep.mean_row.p = sum_p / n_r;
    }
    rep.mean_row.mae = sum_mae / k;
    rep.mean_row.rmse = sum_rmse / k;
    rep.mean_row.ba_mean = sum_ba / k;
    return rep;
}

}  // namespace ivuskit
