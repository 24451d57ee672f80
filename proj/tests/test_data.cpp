#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "helpers.hpp"
#include "ivuskit/data/loader.hpp"
#include "ivuskit/data/manifest.hpp"
#include "ivuskit/data/phantom.hpp"
#include "ivuskit/labeling.hpp"

using namespace ivuskit;

namespace {

// A minimal valid on-disk dataset: one 16x16 triple.
DatasetManifest write_tiny_dataset(const testutil::TempDir& td, int h = 16, int w = 16) {
    Grid2D<std::uint8_t> img(h, w);
    for (std::size_t i = 0; i < img.v.size(); ++i) img.v[i] = static_cast<std::uint8_t>(i % 251);
    write_png_gray8(td / "img.png", img);
    Grid2D<std::uint8_t> lum(h, w, 0), ma(h, w, 0);
    for (int r = 6; r < 10; ++r)
        for (int c = 6; c < 10; ++c) ma.at(r, c) = 255;
    lum.at(7, 7) = 255;
    lum.at(7, 8) = 255;
    write_png_gray8(td / "lumen.png", lum);
    write_png_gray8(td / "ma.png", ma);

    DatasetManifest m;
    m.pixel_spacing.mm_per_px = 0.02;
    m.base_dir = td.path;
    m.entries.push_back({"img.png", "lumen.png", "ma.png", "p0", "s0"});
    return m;
}

} // namespace

TEST_CASE("manifest save/load/save is identity on all fields") {
    testutil::TempDir td("manifest_rt");
    DatasetManifest m = write_tiny_dataset(td);
    save_manifest(m, td / "m.json");
    const DatasetManifest back = load_manifest(td / "m.json");
    REQUIRE(back.pixel_spacing.mm_per_px == m.pixel_spacing.mm_per_px);
    REQUIRE(back.entries.size() == 1);
    REQUIRE(back.entries[0].image_path == "img.png");
    REQUIRE(back.entries[0].lumen_mask_path == "lumen.png");
    REQUIRE(back.entries[0].ma_mask_path == "ma.png");
    REQUIRE(back.entries[0].patient_id == "p0");
    REQUIRE(back.entries[0].slice_id == "s0");
    save_manifest(back, td / "m2.json");
    std::ifstream a(td / "m.json"), b(td / "m2.json");
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    REQUIRE(sa == sb);
}

TEST_CASE("manifest with nonpositive pixel spacing is rejected") {
    testutil::TempDir td("manifest_ps");
    std::ofstream(td / "bad.json") << R"({"pixel_spacing": 0, "entries": []})";
    REQUIRE_THROWS_WITH(load_manifest(td / "bad.json"),
                        Catch::Matchers::ContainsSubstring("pixel spacing must be positive"));
}

TEST_CASE("manifest referencing a missing mask names the file") {
    testutil::TempDir td("manifest_missing");
    DatasetManifest m = write_tiny_dataset(td);
    m.entries[0].ma_mask_path = "gone.png";
    save_manifest(m, td / "m.json");
    REQUIRE_THROWS_WITH(load_manifest(td / "m.json"),
                        Catch::Matchers::ContainsSubstring("gone.png"));
}

TEST_CASE("duplicate (patient, slice) pair is rejected") {
    testutil::TempDir td("manifest_dup");
    DatasetManifest m = write_tiny_dataset(td);
    m.entries.push_back(m.entries[0]);
    REQUIRE_THROWS_AS(save_manifest(m, td / "m.json"), ValidationError);
}

TEST_CASE("load_pair normalizes intensities to value/255 exactly") {
    testutil::TempDir td("loader_norm");
    const DatasetManifest m = write_tiny_dataset(td);
    const SlicePair p = load_pair(m, m.entries[0]);
    REQUIRE(p.image.height() == 16);
    const auto raw = read_png_gray8(td / "img.png");
    for (std::size_t i = 0; i < raw.v.size(); ++i)
        REQUIRE(p.image.pixels.v[i] == raw.v[i] / 255.0);
    REQUIRE(p.lumen.foreground_count() == 2);
    REQUIRE(p.ma.foreground_count() == 16);
    REQUIRE(p.lumen.target == Target::Lumen);
    REQUIRE(p.ma.target == Target::Ma);
}

TEST_CASE("load_pair rejects dimension mismatch between image and mask") {
    testutil::TempDir td("loader_dims");
    DatasetManifest m = write_tiny_dataset(td);
    Grid2D<std::uint8_t> small(8, 8, 0);
    small.at(1, 1) = 255;
    write_png_gray8(td / "small.png", small);
    m.entries[0].lumen_mask_path = "small.png";
    REQUIRE_THROWS_WITH(load_pair(m, m.entries[0]),
                        Catch::Matchers::ContainsSubstring("dimension mismatch"));
}

TEST_CASE("masks with more than two intensity levels are rejected") {
    testutil::TempDir td("loader_levels");
    DatasetManifest m = write_tiny_dataset(td);
    Grid2D<std::uint8_t> tri(16, 16, 0);
    tri.at(0, 0) = 128;
    tri.at(0, 1) = 255;
    write_png_gray8(td / "tri.png", tri);
    m.entries[0].lumen_mask_path = "tri.png";
    REQUIRE_THROWS_WITH(load_pair(m, m.entries[0]),
                        Catch::Matchers::ContainsSubstring("distinct levels"));
}

TEST_CASE("mask binarization treats the higher level as foreground") {
    Grid2D<std::uint8_t> raw(2, 2);
    raw.v = {10, 200, 10, 10};
    const BinaryMask m = detail::binarize_mask(raw, Target::Ma, "x");
    REQUIRE(m.foreground_count() == 1);
    REQUIRE(m.values.at(0, 1) == 1);
}

TEST_CASE("phantom generation is bit-deterministic") {
    testutil::TempDir ta("phantom_a"), tb("phantom_b");
    PhantomSpec spec;
    spec.count = 4;
    spec.image_size = 128;
    spec.seed = 7;
    phantom_generate(spec, ta.path);
    phantom_generate(spec, tb.path);
    for (const char* rel : {"manifest.json", "images/s0000.png", "masks_lumen/s0002.png",
                            "masks_ma/s0003.png"}) {
        std::ifstream fa(ta.path / rel, std::ios::binary), fb(tb.path / rel, std::ios::binary);
        REQUIRE(fa.good());
        const std::string sa((std::istreambuf_iterator<char>(fa)), {});
        const std::string sb((std::istreambuf_iterator<char>(fb)), {});
        REQUIRE(sa == sb);
    }
}

TEST_CASE("every phantom slice has lumen inside ma, both single components") {
    testutil::TempDir td("phantom_inv");
    PhantomSpec spec;
    spec.count = 6;
    spec.image_size = 96;
    spec.seed = 123;
    spec.lumen_radius_range = {6.0, 12.0};
    spec.ma_radius_range = {22.0, 34.0};
    const DatasetManifest m = phantom_generate(spec, td.path);
    REQUIRE(m.entries.size() == 6);
    for (const auto& e : m.entries) {
        const SlicePair p = load_pair(m, e);
        REQUIRE(p.lumen.foreground_count() > 0);
        for (std::size_t i = 0; i < p.lumen.values.v.size(); ++i)
            if (p.lumen.values.v[i]) REQUIRE(p.ma.values.v[i] == 1);
        REQUIRE(label_components_8(p.lumen.values).count() == 1);
        REQUIRE(label_components_8(p.ma.values).count() == 1);
        for (double px : p.image.pixels.v) {
            REQUIRE(px >= 0.0);
            REQUIRE(px <= 1.0);
        }
    }
}

TEST_CASE("phantom rejects infeasible radius ranges") {
    PhantomSpec spec;
    spec.lumen_radius_range = {40.0, 50.0};
    spec.ma_radius_range = {30.0, 46.0};
    REQUIRE_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("digital disk area tracks the analytic value within 3%") {
    // spec'd discretization bound for r >= 20
    for (double r : {20.0, 35.0, 50.0}) {
        const int size = static_cast<int>(2 * r + 9);
        const auto m = testutil::disk_mask(size, size / 2.0, size / 2.0, r);
        const double analytic = std::acos(-1.0) * r * r;
        const double measured = static_cast<double>(m.foreground_count());
        REQUIRE(std::abs(measured - analytic) / analytic < 0.03);
    }
}

TEST_CASE("patients group consecutive phantom slices") {
    testutil::TempDir td("phantom_patients");
    PhantomSpec spec;
    spec.count = 7;
    spec.image_size = 64;
    spec.lumen_radius_range = {4.0, 8.0};
    spec.ma_radius_range = {15.0, 23.0};
    spec.slices_per_patient = 3;
    const DatasetManifest m = phantom_generate(spec, td.path);
    REQUIRE(m.entries[0].patient_id == m.entries[2].patient_id);
    REQUIRE(m.entries[0].patient_id != m.entries[3].patient_id);
    REQUIRE(m.entries[6].patient_id == "p002");
}
