#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "ivuskit/io/csv.hpp"

#ifndef IVUSKIT_CLI
#error "IVUSKIT_CLI must point at the command-line binary"
#endif

namespace {

struct CliResult {
    int code = -1;
    std::string output;  // stdout + stderr interleaved
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

CliResult run_cli(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    const std::string log =
        (std::filesystem::temp_directory_path() / ("ivuskit_cli_log_" + std::to_string(counter++)))
            .string();
    std::string cmd;
    if (!env.empty()) cmd += "env " + env + " ";
    cmd += std::string(IVUSKIT_CLI) + " " + args + " > " + log + " 2>&1";
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.output = slurp(log);
    std::filesystem::remove(log);
    return r;
}

bool same_bytes(const std::string& a, const std::string& b) { return slurp(a) == slurp(b); }

// Directory trees match byte for byte, ignoring the (timestamped) run records.
bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b) {
    std::vector<std::string> ra, rb;
    for (const auto& e : std::filesystem::recursive_directory_iterator(a))
        if (e.is_regular_file() && e.path().filename() != "run_record.json")
            ra.push_back(std::filesystem::relative(e.path(), a).string());
    for (const auto& e : std::filesystem::recursive_directory_iterator(b))
        if (e.is_regular_file() && e.path().filename() != "run_record.json")
            rb.push_back(std::filesystem::relative(e.path(), b).string());
    std::sort(ra.begin(), ra.end());
    std::sort(rb.begin(), rb.end());
    if (ra != rb) return false;
    for (const auto& rel : ra)
        if (!same_bytes((a / rel).string(), (b / rel).string())) return false;
    return true;
}

std::size_t column_of(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::runtime_error("column not found: " + name);
}

}  // namespace

TEST_CASE("version and help exit cleanly") {
    const CliResult v = run_cli("--version");
    REQUIRE(v.code == 0);
    REQUIRE(v.output.find("ivuskit") != std::string::npos);
    const CliResult h = run_cli("--help");
    REQUIRE(h.code == 0);
    REQUIRE(h.output.find("phantom") != std::string::npos);
    REQUIRE(h.output.find("agreement") != std::string::npos);
}

TEST_CASE("usage problems exit with code 2") {
    REQUIRE(run_cli("frobnicate").code == 2);
    REQUIRE(run_cli("phantom").code == 2);                      // missing --out
    REQUIRE(run_cli("measure --manifest x").code == 2);         // missing --out
    REQUIRE(run_cli("phantom --out /tmp/x --size 4").code == 2);  // range check
}

TEST_CASE("toolkit failures exit with code 1 and a single error line") {
    testutil::TempDir td("cli_err");
    const CliResult r = run_cli("predict --manifest " + (td / "none.json") + " --checkpoint " +
                                (td / "none.ckpt") + " --out " + (td / "o"));
    REQUIRE(r.code == 1);
    REQUIRE(r.output.rfind("error:", 0) == 0);
    REQUIRE(std::count(r.output.begin(), r.output.end(), '\n') == 1);
}

TEST_CASE("the full pipeline composes end to end") {
    testutil::TempDir td("cli_pipe");
    const std::string data = td / "data";

    // phantom
    CliResult r = run_cli("phantom --out " + data + " --count 8 --size 64 --seed 3 " +
                          "--slices-per-patient 2");
    INFO(r.output);
    REQUIRE(r.code == 0);
    REQUIRE(std::filesystem::exists(data + "/manifest.json"));
    REQUIRE(std::filesystem::exists(data + "/run_record.json"));

    // the run record captures the invocation before heavy work
    {
        const nlohmann::json rec = nlohmann::json::parse(slurp(data + "/run_record.json"));
        REQUIRE(rec.at("subcommand") == "phantom");
        REQUIRE(rec.at("toolkit") == "ivuskit");
        REQUIRE(rec.at("command_line").is_array());
        REQUIRE(!rec.at("started_utc").get<std::string>().empty());
        REQUIRE(rec.at("seeds").at("seed") == 3);
        REQUIRE(rec.at("config").at("count") == 8);
    }

    // train one fold at desk scale
    const std::string run = td / "run";
    r = run_cli("train --manifest " + data + "/manifest.json --out " + run +
                " --fold 0 --folds 2 --epochs 40 --batch-size 2 --test-fraction 0.25 " +
                "--lr 0.003 --depth 2 --base-channels 8 --seed 1 --init-seed 2");
    INFO(r.output);
    REQUIRE(r.code == 0);
    REQUIRE(std::filesystem::exists(run + "/split.json"));
    REQUIRE(std::filesystem::exists(run + "/fold_0/checkpoint.bin"));
    REQUIRE(std::filesystem::exists(run + "/fold_0/history.csv"));
    REQUIRE(std::filesystem::exists(run + "/fold_0/test_metrics.csv"));
    REQUIRE(std::filesystem::exists(run + "/fold_0/test_summary.csv"));
    {
        const auto hist = ivuskit::read_csv(run + "/fold_0/history.csv");
        REQUIRE(hist.size() == 41);
        REQUIRE(hist[0] == std::vector<std::string>{"epoch", "train_loss", "val_loss"});
        const auto summary = ivuskit::read_csv(run + "/fold_0/test_summary.csv");
        REQUIRE(summary[0][0] == "target");
        bool has_reference = false;
        for (const auto& row : summary)
            if (!row.empty() && row.back() == "published_reference") has_reference = true;
        REQUIRE(has_reference);
    }

    // predict over the whole manifest with clamped lumen masks
    const std::string pred = td / "pred";
    r = run_cli("predict --manifest " + data + "/manifest.json --checkpoint " + run +
                "/fold_0/checkpoint.bin --out " + pred + " --clamp-lumen --jobs 2");
    INFO(r.output);
    REQUIRE(r.code == 0);
    REQUIRE(std::filesystem::exists(pred + "/predictions.json"));
    REQUIRE(std::filesystem::exists(pred + "/masks_lumen"));
    REQUIRE(std::filesystem::exists(pred + "/prob_ma"));

    // evaluate the predicted masks against the phantom truth
    const std::string eval = td / "eval";
    r = run_cli("evaluate --pred " + pred + "/predictions.json --manifest " + data +
                "/manifest.json --out " + eval + " --jobs 2");
    INFO(r.output);
    REQUIRE(r.code == 0);
    {
        const auto rows = ivuskit::read_csv(eval + "/metrics.csv");
        REQUIRE(rows[0] == std::vector<std::string>{"slice_id", "target", "jm", "hd_mm"});
        REQUIRE(rows.size() == 1 + 2 * 8);  // two targets per slice
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double jm = std::stod(rows[i][2]);
            REQUIRE(jm >= 0.0);
            REQUIRE(jm <= 1.0);
        }
    }

    // measure truth and predictions
    const std::string mt = td / "measured_truth.csv";
    const std::string mp = td / "measured_pred.csv";
    r = run_cli("measure --manifest " + data + "/manifest.json --out " + mt);
    INFO(r.output);
    REQUIRE(r.code == 0);
    r = run_cli("measure --manifest " + pred + "/predictions.json --out " + mp + " --jobs 3");
    INFO(r.output);
    REQUIRE(r.code == 0);
    {
        const auto rows = ivuskit::read_csv(mt);
        REQUIRE(rows.size() == 9);
        REQUIRE(rows[0][0] == "patient_id");
        REQUIRE(rows[0][1] == "slice_id");
        REQUIRE(rows[0][2] == "pixel_spacing_mm");
        REQUIRE(rows[0].size() == 15);
        const std::size_t burden = column_of(rows[0], "plaque_burden");
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double b = std::stod(rows[i][burden]);
            REQUIRE(b > 0.0);
            REQUIRE(b < 1.0);
        }
        REQUIRE(std::filesystem::exists(mt + ".run.json"));
    }

    // agreement of truth with itself is exact
    const std::string agree_self = td / "agree_self";
    r = run_cli("agreement --pred " + mt + " --truth " + mt + " --out " + agree_self);
    INFO(r.output);
    REQUIRE(r.code == 0);
    {
        const auto rows = ivuskit::read_csv(agree_self + "/agreement.csv");
        REQUIRE(rows[0] ==
                std::vector<std::string>{"parameter", "n", "r", "p", "mae", "rmse", "re_min",
                                         "re_max", "ba_mean", "loa_low", "loa_high"});
        REQUIRE(rows.size() == 14);  // header + 12 parameters + mean
        for (std::size_t i = 1; i < rows.size(); ++i) {
            REQUIRE(std::stod(rows[i][2]) == 1.0);  // r
            REQUIRE(std::stod(rows[i][4]) == 0.0);  // mae
        }
        REQUIRE(rows[13][0] == "mean");
    }

    // agreement of predictions with truth emits the side files and plots
    const std::string agree = td / "agree";
    r = run_cli("agreement --pred " + mp + " --truth " + mt + " --out " + agree + " --plots");
    INFO(r.output);
    REQUIRE(r.code == 0);
    REQUIRE(std::filesystem::exists(agree + "/scatter_lumen_csa.csv"));
    REQUIRE(std::filesystem::exists(agree + "/bland_altman_eem_csa.csv"));
    REQUIRE(std::filesystem::exists(agree + "/scatter_eem_csa.png"));
    REQUIRE(std::filesystem::exists(agree + "/bland_altman_plaque_burden.png"));
    {
        const auto sc = ivuskit::read_csv(agree + "/scatter_lumen_csa.csv");
        REQUIRE(sc[0] == std::vector<std::string>{"truth", "pred"});
        REQUIRE(sc.size() == 9);  // one point per slice
    }
}

TEST_CASE("phantom and measure runs are byte-deterministic") {
    testutil::TempDir td("cli_det");
    const std::string a = td / "a", b = td / "b";
    REQUIRE(run_cli("phantom --out " + a + " --count 5 --size 64 --seed 9").code == 0);
    REQUIRE(run_cli("phantom --out " + b + " --count 5 --size 64 --seed 9").code == 0);
    REQUIRE(same_tree(a, b));

    const std::string m1 = td / "m1.csv", m2 = td / "m2.csv";
    REQUIRE(run_cli("measure --manifest " + a + "/manifest.json --out " + m1 + " --jobs 1").code ==
            0);
    REQUIRE(run_cli("measure --manifest " + a + "/manifest.json --out " + m2 + " --jobs 3").code ==
            0);
    REQUIRE(same_bytes(m1, m2));
}

TEST_CASE("IVUSKIT_OUT_ROOT reroots relative outputs and IVUSKIT_JOBS sets the pool") {
    testutil::TempDir td("cli_env");
    const std::string root = td / "rooted";
    const CliResult r = run_cli("phantom --out nested/data --count 4 --size 64 --seed 2",
                                "IVUSKIT_OUT_ROOT=" + root + " IVUSKIT_JOBS=2");
    INFO(r.output);
    REQUIRE(r.code == 0);
    REQUIRE(std::filesystem::exists(root + "/nested/data/manifest.json"));
    // absolute --out ignores the root
    const std::string abs_out = td / "absolute";
    REQUIRE(run_cli("phantom --out " + abs_out + " --count 4 --size 64 --seed 2",
                    "IVUSKIT_OUT_ROOT=" + root)
                .code == 0);
    REQUIRE(std::filesystem::exists(abs_out + "/manifest.json"));
    REQUIRE(!std::filesystem::exists(root + "/" + abs_out));
}

TEST_CASE("train rejects ambiguous fold selection") {
    testutil::TempDir td("cli_folds");
    const std::string data = td / "d";
    REQUIRE(run_cli("phantom --out " + data + " --count 4 --size 64 --seed 1").code == 0);
    const CliResult r = run_cli("train --manifest " + data + "/manifest.json --out " + (td / "r") +
                                " --fold 0 --all-folds --epochs 0 --folds 2 --depth 2 " +
                                "--base-channels 4 --test-fraction 0");
    REQUIRE(r.code == 1);
    REQUIRE(r.output.find("exactly one") != std::string::npos);
}
