#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "ivuskit/geometry/contour.hpp"
#include "ivuskit/geometry/measure.hpp"

using namespace ivuskit;

namespace {
const double kPi = std::acos(-1.0);
}

TEST_CASE("contour of a filled 3x3 block is its 8 border pixels") {
    const BinaryMask m = testutil::mask_from({
        ".....",
        ".###.",
        ".###.",
        ".###.",
        ".....",
    });
    const Contour c = extract_contour(m);
    REQUIRE(c.points.size() == 8);
    for (const auto& [r, col] : c.points) REQUIRE(!(r == 2 && col == 2));
}

TEST_CASE("contour of a single pixel is that pixel") {
    BinaryMask m{Grid2D<std::uint8_t>(5, 5, 0), Target::Lumen};
    m.values.at(2, 3) = 1;
    const Contour c = extract_contour(m);
    REQUIRE(c.points == std::vector<std::pair<int, int>>{{2, 3}});
}

TEST_CASE("contour of an empty mask is an error") {
    BinaryMask m{Grid2D<std::uint8_t>(4, 4, 0), Target::Lumen};
    REQUIRE_THROWS_AS(extract_contour(m), MeasurementError);
}

TEST_CASE("contour matches the direct border oracle on random masks") {
    Rng rng(31);
    for (int it = 0; it < 30; ++it) {
        const BinaryMask m = testutil::random_mask(rng, 12, 14, 0.45);
        if (m.foreground_count() == 0) continue;
        auto got = extract_contour(m).points;
        auto want = testutil::oracle_border(m);
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        REQUIRE(got == want);
    }
}

TEST_CASE("center of mass of a 2x2 block sits between its pixels") {
    const BinaryMask m = testutil::mask_from({
        "##",
        "##",
    });
    const Centroid c = center_of_mass(m);
    REQUIRE(c.row == 0.5);
    REQUIRE(c.col == 0.5);
}

TEST_CASE("center of mass of one pixel is that pixel") {
    BinaryMask m{Grid2D<std::uint8_t>(9, 9, 0), Target::Ma};
    m.values.at(3, 7) = 1;
    const Centroid c = center_of_mass(m);
    REQUIRE(c.row == 3.0);
    REQUIRE(c.col == 7.0);
}

TEST_CASE("center of mass of an L-shape averages the pixel coordinates") {
    const BinaryMask m = testutil::mask_from({
        "#.",
        "##",
    });
    const Centroid c = center_of_mass(m);
    REQUIRE(c.row == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    REQUIRE(c.col == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("disk diameters recover the analytic value within 2%") {
    const BinaryMask m = testutil::disk_mask(128, 64, 64, 50);
    const auto [dmax, dmin] = diameter_extrema(m, PixelSpacing{0.02});
    REQUIRE(dmax == Catch::Approx(2.0).epsilon(0.02));
    REQUIRE(dmin == Catch::Approx(2.0).epsilon(0.02));
    REQUIRE(dmin <= dmax);
}

TEST_CASE("ellipse diameters recover both axes within 2%") {
    const BinaryMask m = testutil::ellipse_mask(160, 80, 80, 60, 30);
    const auto [dmax, dmin] = diameter_extrema(m, PixelSpacing{0.01});
    REQUIRE(dmax == Catch::Approx(1.20).epsilon(0.02));
    REQUIRE(dmin == Catch::Approx(0.60).epsilon(0.02));
}

TEST_CASE("single-pixel diameter equals the pixel spacing") {
    BinaryMask m{Grid2D<std::uint8_t>(11, 11, 0), Target::Lumen};
    m.values.at(5, 5) = 1;
    const auto [dmax, dmin] = diameter_extrema(m, PixelSpacing{0.07});
    REQUIRE(dmax == 0.07);
    REQUIRE(dmin == 0.07);
}

TEST_CASE("csa is the pixel count scaled by the squared spacing") {
    const BinaryMask m = testutil::mask_from({
        "#####",
        "#####",
    });
    REQUIRE(region_csa(m, PixelSpacing{0.1}) == Catch::Approx(0.1).epsilon(1e-12));
    BinaryMask empty{Grid2D<std::uint8_t>(3, 3, 0), Target::Lumen};
    REQUIRE(region_csa(empty, PixelSpacing{0.1}) == 0.0);
}

TEST_CASE("disk csa approaches pi r^2 within 3%") {
    const BinaryMask m = testutil::disk_mask(128, 64, 64, 40);
    const double got = region_csa(m, PixelSpacing{0.05});
    const double want = kPi * (40 * 0.05) * (40 * 0.05);
    REQUIRE(got == Catch::Approx(want).epsilon(0.03));
}

TEST_CASE("concentric disks have uniform wall thickness") {
    const BinaryMask lum = testutil::disk_mask(128, 64, 64, 25, Target::Lumen, false);
    const BinaryMask ma = testutil::disk_mask(128, 64, 64, 50, Target::Ma, false);
    const auto [tmax, tmin] = thickness_extrema(lum, ma, PixelSpacing{0.02});
    REQUIRE(tmax == Catch::Approx(0.5).epsilon(0.02));
    REQUIRE(tmin == Catch::Approx(0.5).epsilon(0.02));
}

TEST_CASE("offset lumen produces the expected thickness extremes") {
    const double off = 10.0 / std::sqrt(2.0);  // 10 px along the diagonal
    const BinaryMask lum = testutil::disk_mask(160, 64 + off, 64 + off, 25, Target::Lumen);
    const BinaryMask ma = testutil::disk_mask(160, 64, 64, 50, Target::Ma);
    const auto [tmax, tmin] = thickness_extrema(lum, ma, PixelSpacing{0.02});
    // wall along the offset direction: 50 - 25 -/+ 10 px
    REQUIRE(tmax == Catch::Approx(35 * 0.02).epsilon(0.02));
    REQUIRE(tmin == Catch::Approx(15 * 0.02).epsilon(0.02));
}

TEST_CASE("thickness requires lumen contained in ma") {
    const BinaryMask lum = testutil::disk_mask(64, 32, 40, 12, Target::Lumen);
    const BinaryMask ma = testutil::disk_mask(64, 32, 28, 14, Target::Ma);
    REQUIRE_THROWS_WITH(thickness_extrema(lum, ma, PixelSpacing{0.02}),
                        Catch::Matchers::ContainsSubstring("clamp the lumen mask"));
}

TEST_CASE("identical lumen and ma give zero wall everywhere") {
    const BinaryMask d = testutil::disk_mask(96, 48, 48, 30);
    const BinaryMask lum{d.values, Target::Lumen};
    const BinaryMask ma{d.values, Target::Ma};
    const ClinicalReport r = measure_all(lum, ma, PixelSpacing{0.02});
    REQUIRE(r.max_pm_thickness == 0.0);
    REQUIRE(r.min_pm_thickness == 0.0);
    REQUIRE(r.pm_csa == 0.0);
    REQUIRE(r.plaque_burden == 0.0);
}

TEST_CASE("plaque burden of a half-radius lumen is about three quarters") {
    const BinaryMask lum = testutil::disk_mask(128, 64, 64, 25, Target::Lumen);
    const BinaryMask ma = testutil::disk_mask(128, 64, 64, 50, Target::Ma);
    const ClinicalReport r = measure_all(lum, ma, PixelSpacing{0.02});
    REQUIRE(r.plaque_burden == Catch::Approx(0.75).margin(0.02));
    REQUIRE(r.lumen_eccentricity < 0.05);
    REQUIRE(r.pm_eccentricity < 0.05);
    const double q = 0.02 * 0.02;
    REQUIRE(r.eem_csa == static_cast<double>(ma.foreground_count()) * q);
    REQUIRE(r.lumen_csa == static_cast<double>(lum.foreground_count()) * q);
    REQUIRE(r.pm_csa ==
            static_cast<double>(ma.foreground_count() - lum.foreground_count()) * q);
    REQUIRE(r.min_eem_diam <= r.max_eem_diam);
    REQUIRE(r.min_lumen_diam <= r.max_lumen_diam);
    REQUIRE(r.min_pm_thickness <= r.max_pm_thickness);
}

TEST_CASE("doubling the spacing scales lengths by 2 and areas by 4") {
    const BinaryMask lum = testutil::ellipse_mask(128, 64, 60, 18, 14, Target::Lumen);
    const BinaryMask ma = testutil::ellipse_mask(128, 64, 64, 44, 38, Target::Ma);
    const ClinicalReport a = measure_all(lum, ma, PixelSpacing{0.02});
    const ClinicalReport b = measure_all(lum, ma, PixelSpacing{0.04});
    const auto& names = ClinicalReport::parameter_names();
    for (int i = 0; i < ClinicalReport::kParameterCount; ++i) {
        const std::string n = names[i];
        if (n.find("csa") != std::string::npos)
            REQUIRE(b.value(i) == Catch::Approx(4.0 * a.value(i)).epsilon(1e-12));
        else if (n.find("eccentricity") != std::string::npos || n == "plaque_burden")
            REQUIRE(b.value(i) == a.value(i));
        else
            REQUIRE(b.value(i) == Catch::Approx(2.0 * a.value(i)).epsilon(1e-12));
    }
}

TEST_CASE("measure_all rejects multi-component and empty inputs") {
    BinaryMask ma = testutil::disk_mask(64, 32, 32, 20, Target::Ma);
    BinaryMask lum = testutil::disk_mask(64, 32, 32, 8, Target::Lumen);
    lum.values.at(1, 1) = 1;  // second component
    REQUIRE_THROWS_AS(measure_all(lum, ma, PixelSpacing{0.02}), MeasurementError);
    BinaryMask empty{Grid2D<std::uint8_t>(64, 64, 0), Target::Lumen};
    REQUIRE_THROWS_AS(measure_all(empty, ma, PixelSpacing{0.02}), MeasurementError);
}

TEST_CASE("angle count must be even and at least 360") {
    const BinaryMask m = testutil::disk_mask(64, 32, 32, 20);
    REQUIRE_THROWS_AS(diameter_extrema(m, PixelSpacing{0.02}, 359), ValidationError);
    REQUIRE_THROWS_AS(diameter_extrema(m, PixelSpacing{0.02}, 361), ValidationError);
    REQUIRE_NOTHROW(diameter_extrema(m, PixelSpacing{0.02}, 360));
}

TEST_CASE("report round-trips through its value vector") {
    std::array<double, ClinicalReport::kParameterCount> vals{};
    for (int i = 0; i < ClinicalReport::kParameterCount; ++i) vals[static_cast<std::size_t>(i)] = 1.5 * i + 0.25;
    const ClinicalReport r = ClinicalReport::from_values(vals);
    for (int i = 0; i < ClinicalReport::kParameterCount; ++i)
        REQUIRE(r.value(i) == vals[static_cast<std::size_t>(i)]);
    REQUIRE(std::string(ClinicalReport::parameter_names()[0]) == "max_eem_diam");
    REQUIRE(std::string(ClinicalReport::parameter_names()[11]) == "plaque_burden");
}
