#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "ivuskit/metrics/metrics.hpp"

using namespace ivuskit;

namespace {

Contour points_to_contour(const std::vector<std::pair<int, int>>& pts) {
    Contour c;
    c.points = pts;
    return c;
}

// Hollow square border of the given side, top-left corner at (r0,c0).
std::vector<std::pair<int, int>> square_border(int r0, int c0, int side) {
    std::vector<std::pair<int, int>> out;
    for (int r = r0; r < r0 + side; ++r)
        for (int c = c0; c < c0 + side; ++c)
            if (r == r0 || r == r0 + side - 1 || c == c0 || c == c0 + side - 1)
                out.emplace_back(r, c);
    return out;
}

}  // namespace

TEST_CASE("jaccard of identical masks is one") {
    const BinaryMask m = testutil::disk_mask(32, 16, 16, 9);
    REQUIRE(jaccard(m, m) == 1.0);
}

TEST_CASE("jaccard of disjoint masks is zero") {
    const BinaryMask a = testutil::mask_from({"##..", "....."});
    const BinaryMask b = testutil::mask_from({"..##", "....."});
    REQUIRE(jaccard(a, b) == 0.0);
}

TEST_CASE("jaccard counts intersection over union") {
    // 1 shared pixel, 3 in the union
    const BinaryMask a = testutil::mask_from({"##.."});
    const BinaryMask b = testutil::mask_from({".##."});
    REQUIRE(jaccard(a, b) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("jaccard matches the pixel-count oracle on random masks") {
    Rng rng(77);
    for (int it = 0; it < 50; ++it) {
        const BinaryMask a = testutil::random_mask(rng, 15, 17, 0.4);
        const BinaryMask b = testutil::random_mask(rng, 15, 17, 0.4);
        REQUIRE(jaccard(a, b) == testutil::oracle_jaccard(a, b));
    }
}

TEST_CASE("jaccard is symmetric") {
    Rng rng(78);
    for (int it = 0; it < 20; ++it) {
        const BinaryMask a = testutil::random_mask(rng, 9, 9, 0.5);
        const BinaryMask b = testutil::random_mask(rng, 9, 9, 0.5);
        REQUIRE(jaccard(a, b) == jaccard(b, a));
    }
}

TEST_CASE("hausdorff of identical contours is zero") {
    const Contour c = points_to_contour(square_border(2, 2, 5));
    REQUIRE(hausdorff(c, c, PixelSpacing{0.1}) == 0.0);
}

TEST_CASE("hausdorff of two points is their scaled distance") {
    const Contour a = points_to_contour({{0, 0}});
    const Contour b = points_to_contour({{3, 4}});
    REQUIRE(hausdorff(a, b, PixelSpacing{0.1}) == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hausdorff of concentric squares is the corner gap") {
    // side 3 centered in side 7: corners differ by (2,2)
    const Contour inner = points_to_contour(square_border(2, 2, 3));
    const Contour outer = points_to_contour(square_border(0, 0, 7));
    const double want = 2.0 * std::sqrt(2.0) * 0.05;
    REQUIRE(hausdorff(inner, outer, PixelSpacing{0.05}) == Catch::Approx(want).epsilon(1e-12));
}

TEST_CASE("hausdorff matches the all-pairs oracle on random contours") {
    Rng rng(314);
    for (int it = 0; it < 40; ++it) {
        std::vector<std::pair<int, int>> pa, pb;
        const int na = 1 + static_cast<int>(rng.below(30));
        const int nb = 1 + static_cast<int>(rng.below(30));
        for (int i = 0; i < na; ++i)
            pa.emplace_back(static_cast<int>(rng.below(20)), static_cast<int>(rng.below(20)));
        for (int i = 0; i < nb; ++i)
            pb.emplace_back(static_cast<int>(rng.below(20)), static_cast<int>(rng.below(20)));
        const double want = testutil::oracle_hausdorff_px(pa, pb);
        const double got = hausdorff(points_to_contour(pa), points_to_contour(pb), PixelSpacing{1.0});
        REQUIRE(got == Catch::Approx(want).epsilon(1e-12));
        const double rev = hausdorff(points_to_contour(pb), points_to_contour(pa), PixelSpacing{1.0});
        REQUIRE(got == rev);
    }
}

TEST_CASE("hausdorff scales linearly with pixel spacing") {
    const Contour a = points_to_contour(square_border(1, 1, 4));
    const Contour b = points_to_contour(square_border(0, 2, 6));
    const double d1 = hausdorff(a, b, PixelSpacing{0.02});
    const double d3 = hausdorff(a, b, PixelSpacing{0.06});
    REQUIRE(d3 == Catch::Approx(3.0 * d1).epsilon(1e-12));
}

TEST_CASE("perfect predictions evaluate to jm 1 and hd 0 with zero spread") {
    std::vector<PredictedSlice> preds;
    std::vector<TruthSlice> truths;
    Rng rng(41);
    for (int i = 0; i < 3; ++i) {
        const int r = 6 + static_cast<int>(rng.below(5));
        const BinaryMask lum = testutil::disk_mask(48, 24, 24, r, Target::Lumen);
        const BinaryMask ma = testutil::disk_mask(48, 24, 24, r + 8, Target::Ma);
        PredictedSlice p;
        p.slice_id = "s" + std::to_string(i);
        for (const BinaryMask* m : {&lum, &ma}) {
            ProbMap map(48, 48, 0.0);
            for (std::size_t k = 0; k < map.v.size(); ++k) map.v[k] = m->values.v[k] ? 1.0 : 0.0;
            p.channels.push_back({m->target, map});
        }
        preds.push_back(std::move(p));
        truths.push_back({"s" + std::to_string(i), {lum, ma}});
    }
    const DatasetEvaluation ev = evaluate_dataset(preds, truths, PixelSpacing{0.05});
    REQUIRE(ev.per_slice.size() == 6);
    REQUIRE(ev.summary.size() == 2);
    for (const auto& s : ev.summary) {
        REQUIRE(s.n == 3);
        REQUIRE(s.jm_mean == 1.0);
        REQUIRE(s.jm_sd == 0.0);
        REQUIRE(s.hd_n == 3);
        REQUIRE(s.hd_mean_mm == 0.0);
        REQUIRE(s.hd_sd_mm == 0.0);
        REQUIRE(s.hd_excluded == 0);
    }
}

TEST_CASE("summary mean and sample sd over two slices") {
    std::vector<SliceMetrics> rows;
    rows.push_back({"a", Target::Lumen, 0.8, 0.1});
    rows.push_back({"b", Target::Lumen, 0.9, 0.3});
    const auto sums = summarize_metrics(rows);
    REQUIRE(sums.size() == 1);
    REQUIRE(sums[0].jm_mean == Catch::Approx(0.85).epsilon(1e-12));
    REQUIRE(sums[0].jm_sd == Catch::Approx(0.070710678118654752).epsilon(1e-9));
    REQUIRE(sums[0].hd_mean_mm == Catch::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("empty post-processed prediction keeps jm but drops hd") {
    const BinaryMask truth = testutil::disk_mask(32, 16, 16, 6, Target::Lumen);
    PredictedSlice p;
    p.slice_id = "s0";
    p.channels.push_back({Target::Lumen, ProbMap(32, 32, 0.5)});  // constant -> empty after cut
    const TruthSlice t{"s0", {truth}};
    const auto rows = evaluate_slice(p, t, PixelSpacing{0.05});
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].jm == 0.0);
    REQUIRE(!rows[0].hd_mm.has_value());
    const auto sums = summarize_metrics(rows);
    REQUIRE(sums[0].n == 1);
    REQUIRE(sums[0].hd_n == 0);
    REQUIRE(sums[0].hd_excluded == 1);
}

TEST_CASE("evaluate_slice post-processes noisy probability maps before scoring") {
    const BinaryMask truth = testutil::disk_mask(64, 32, 32, 14, Target::Ma);
    ProbMap map(64, 64, 0.1);
    for (std::size_t k = 0; k < map.v.size(); ++k)
        if (truth.values.v[k]) map.v[k] = 0.9;
    map.at(2, 2) = 0.9;  // stray blob pixel must be removed by post-processing
    PredictedSlice p{"z", {{Target::Ma, map}}};
    const TruthSlice t{"z", {truth}};
    const auto rows = evaluate_slice(p, t, PixelSpacing{0.05});
    REQUIRE(rows[0].jm == 1.0);
    REQUIRE(rows[0].hd_mm.has_value());
    REQUIRE(*rows[0].hd_mm == 0.0);
}

TEST_CASE("benchmark table carries both reference targets") {
    const auto& refs = reference_benchmarks();
    REQUIRE(refs.size() == 2);
    REQUIRE(refs[0].jm_mean == 0.9412);
    REQUIRE(refs[0].hd_mean_mm == 0.0639);
    REQUIRE(refs[1].jm_mean == 0.9509);
    REQUIRE(refs[1].hd_mean_mm == 0.0867);
}
