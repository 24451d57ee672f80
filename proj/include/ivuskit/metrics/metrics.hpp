#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "../error.hpp"
#include "../grid.hpp"
#include "../geometry/contour.hpp"
#include "../postproc/postproc.hpp"

namespace ivuskit {

// |R ∩ R'| / |R ∪ R'| on region masks. Both empty counts as perfect
// agreement; exactly one empty is total disagreement.
inline double jaccard(const BinaryMask& r, const BinaryMask& rp) {
    require_same_shape(r.height(), r.width(), rp.height(), rp.width(), "jaccard masks");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < r.values.v.size(); ++i) {
        const bool a = r.values.v[i] != 0, b = rp.values.v[i] != 0;
        inter += (a && b);
        uni += (a || b);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// Symmetric Hausdorff distance between two border pixel sets, scaled to mm.
// Exact maximum of directed max-min Euclidean distances; no approximation.
inline double hausdorff(const Contour& cr, const Contour& crp, PixelSpacing ps) {
    ps.validate();
    if (cr.empty() || crp.empty()) throw MeasurementError("hausdorff requires nonempty contours");

    auto directed_sq = [](const Contour& a, const Contour& b) {
        double max_sq = 0.0;
        for (const auto& [ar, ac] : a.points) {
            double min_sq = std::numeric_limits<double>::infinity();
            for (const auto& [br, bc] : b.points) {
                const double dr = static_cast<double>(ar - br);
                const double dc = static_cast<double>(ac - bc);
                const double d = dr * dr + dc * dc;
                if (d < min_sq) {
                    min_sq = d;
                    if (min_sq <= max_sq) break;  // cannot raise the max
                }
            }
            if (min_sq > max_sq) max_sq = min_sq;
        }
        return max_sq;
    };

    const double d_sq = std::max(directed_sq(cr, crp), directed_sq(crp, cr));
    return std::sqrt(d_sq) * ps.mm_per_px;
}

struct SliceMetrics {
    std::string slice_id;
    Target target = Target::Lumen;
    double jm = 0.0;
    std::optional<double> hd_mm;  // missing when the post-processed prediction is empty
};

struct MetricsSummary {
    Target target = Target::Lumen;
    int n = 0;
    double jm_mean = 0.0;
    double jm_sd = 0.0;      // sample sd; 0 for n < 2
    int hd_n = 0;            // slices contributing to HD aggregation
    double hd_mean_mm = 0.0;
    double hd_sd_mm = 0.0;
    int hd_excluded = 0;     // empty predictions dropped from HD
};

namespace detail {

inline std::pair<double, double> mean_sample_sd(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

struct DatasetEvaluation {
    std::vector<SliceMetrics> per_slice;
    std::vector<MetricsSummary> summary;  // one row per target
};

struct PredictedSlice {
    std::string slice_id;
    std::vector<TargetMap> channels;
};

struct TruthSlice {
    std::string slice_id;
    std::vector<BinaryMask> masks;  // same target order as predictions
};

// Post-processes every prediction channel, then scores JM on region masks and
// HD on 4-neighbor border sets. A slice whose post-processed prediction is
// empty keeps its JM but carries no HD.
inline std::vector<SliceMetrics> evaluate_slice(const PredictedSlice& pred,
                                                const TruthSlice& truth, PixelSpacing ps) {
    ps.validate();
    if (pred.slice_id != truth.slice_id)
        throw ValidationError("evaluate_slice: slice order mismatch at " + pred.slice_id);
    if (pred.channels.size() != truth.masks.size())
        throw ValidationError("evaluate_slice: target count mismatch at " + pred.slice_id);
    std::vector<SliceMetrics> out;
    for (std::size_t t = 0; t < pred.channels.size(); ++t) {
        const Target target = pred.channels[t].target;
        const BinaryMask seg = postprocess(pred.channels[t].map, target);
        SliceMetrics sm;
        sm.slice_id = pred.slice_id;
        sm.target = target;
        sm.jm = jaccard(seg, truth.masks[t]);
        if (seg.foreground_count() > 0 && truth.masks[t].foreground_count() > 0)
            sm.hd_mm = hausdorff(extract_contour(seg), extract_contour(truth.masks[t]), ps);
        out.push_back(std::move(sm));
    }
    return out;
}

// Aggregates per-slice rows into one summary row per target (first-appearance
// order). Slices without an HD value count toward hd_excluded.
inline std::vector<MetricsSummary> summarize_metrics(const std::vector<SliceMetrics>& per_slice) {
    std::vector<Target> targets;
    for (const auto& sm : per_slice)
        if (std::find(targets.begin(), targets.end(), sm.target) == targets.end())
            targets.push_back(sm.target);

    std::vector<MetricsSummary> summary;
    for (Target target : targets) {
        MetricsSummary s;
        s.target = target;
        std::vector<double> jms, hds;
        for (const auto& sm : per_slice) {
            if (sm.target != target) continue;
            jms.push_back(sm.jm);
            if (sm.hd_mm)
                hds.push_back(*sm.hd_mm);
            else
                ++s.hd_excluded;
        }
        s.n = static_cast<int>(jms.size());
        auto [jm_mean, jm_sd] = detail::mean_sample_sd(jms);
        s.jm_mean = jm_mean;
        s.jm_sd = jm_sd;
        s.hd_n = static_cast<int>(hds.size());
        auto [hd_mean, hd_sd] = detail::mean_sample_sd(hds);
        s.hd_mean_mm = hd_mean;
        s.hd_sd_mm = hd_sd;
        summary.push_back(s);
    }
    return summary;
}

inline DatasetEvaluation evaluate_dataset(const std::vector<PredictedSlice>& predictions,
                                          const std::vector<TruthSlice>& truths, PixelSpacing ps) {
    if (predictions.size() != truths.size())
        throw ValidationError("evaluate_dataset: prediction/truth lists differ in length");
    DatasetEvaluation ev;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        auto rows = evaluate_slice(predictions[i], truths[i], ps);
        ev.per_slice.insert(ev.per_slice.end(), rows.begin(), rows.end());
    }
    ev.summary = summarize_metrics(ev.per_slice);
    return ev;
}

// Published full-scale clinical benchmark for this architecture. Reported for
// context in summary output; not reproducible from synthetic data and never
// used as a computed value.
struct ReferenceBenchmark {
    const char* label;
    double jm_mean, jm_sd, hd_mean_mm, hd_sd_mm;
};

inline const std::vector<ReferenceBenchmark>& reference_benchmarks() {
    static const std::vector<ReferenceBenchmark> rows = {
        {"lumen_reference", 0.9412, 0.0307, 0.0639, 0.0436},
        {"ma_reference", 0.9509, 0.0251, 0.0867, 0.0622},
    };
    return rows;
}

}  // namespace ivuskit
