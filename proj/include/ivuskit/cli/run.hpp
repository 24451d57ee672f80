#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ivuskit/data/loader.hpp"
#include "ivuskit/data/manifest.hpp"
#include "ivuskit/data/phantom.hpp"
#include "ivuskit/error.hpp"
#include "ivuskit/geometry/measure.hpp"
#include "ivuskit/grid.hpp"
#include "ivuskit/io/csv.hpp"
#include "ivuskit/io/png_io.hpp"
#include "ivuskit/metrics/metrics.hpp"
#include "ivuskit/model/checkpoint.hpp"
#include "ivuskit/model/config.hpp"
#include "ivuskit/model/network.hpp"
#include "ivuskit/postproc/postproc.hpp"
#include "ivuskit/stats/plot.hpp"
#include "ivuskit/stats/stats.hpp"
#include "ivuskit/train/predict.hpp"
#include "ivuskit/train/split.hpp"
#include "ivuskit/train/trainer.hpp"
#include "ivuskit/version.hpp"

namespace ivuskit::cli {

namespace fs = std::filesystem;

namespace detail {

// Index-ordered worker pool. Results land in caller-provided slots, and the
// first failing index wins, so output never depends on thread scheduling.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
    if (jobs < 1) jobs = 1;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string file_hash_hex(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open input for hashing: " + p.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hex64(fnv1a64(bytes));
}

// IVUSKIT_OUT_ROOT prefixes relative output paths; explicit absolute paths win.
inline fs::path apply_out_root(const std::string& out) {
    fs::path p(out);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("IVUSKIT_OUT_ROOT"); root && *root) return fs::path(root) / p;
    return p;
}

// Worker count: --jobs flag beats IVUSKIT_JOBS beats serial.
inline int effective_jobs(int flag_jobs) {
    if (flag_jobs > 0) return flag_jobs;
    if (const char* env = std::getenv("IVUSKIT_JOBS"); env && *env) {
        const int j = std::atoi(env);
        if (j >= 1) return j;
    }
    return 1;
}

struct RunRecord {
    std::string subcommand;
    std::vector<std::string> command_line;
    nlohmann::ordered_json config;
    nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
    std::vector<fs::path> inputs;  // manifests / CSVs consumed by the run
};

// Reproducibility stamp, written before any heavy work starts.
inline void write_run_record(const fs::path& path, const RunRecord& rec) {
    nlohmann::ordered_json j;
    j["toolkit"] = kToolkitName;
    j["version"] = kToolkitVersion;
    j["subcommand"] = rec.subcommand;
    j["command_line"] = rec.command_line;
    j["started_utc"] = utc_timestamp();
    j["config"] = rec.config;
    j["seeds"] = rec.seeds;
    auto hashes = nlohmann::ordered_json::object();
    for (const auto& p : rec.inputs) hashes[p.string()] = file_hash_hex(p);
    j["input_hashes"] = hashes;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create run record: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<Target> parse_targets(const std::string& list) {
    std::vector<Target> out;
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "lumen")
            out.push_back(Target::Lumen);
        else if (tok == "ma")
            out.push_back(Target::Ma);
        else
            throw ValidationError("unknown target name: " + tok);
    }
    if (out.empty()) throw ValidationError("--targets needs at least one of lumen,ma");
    return out;
}

inline void write_metrics_csv(const std::string& path, const std::vector<SliceMetrics>& rows) {
    CsvWriter csv(path);
    csv.row({"slice_id", "target", "jm", "hd_mm"});
    for (const auto& sm : rows)
        csv.row({sm.slice_id, target_name(sm.target), format_num(sm.jm),
                 sm.hd_mm ? format_num(*sm.hd_mm) : std::string()});
    csv.close();
}

inline void write_summary_csv(const std::string& path, const std::vector<MetricsSummary>& summary) {
    CsvWriter csv(path);
    csv.row({"target", "n", "jm_mean", "jm_sd", "hd_n", "hd_mean_mm", "hd_sd_mm", "hd_excluded",
             "source"});
    for (const auto& s : summary)
        csv.row({target_name(s.target), std::to_string(s.n), format_num(s.jm_mean),
                 format_num(s.jm_sd), std::to_string(s.hd_n), format_num(s.hd_mean_mm),
                 format_num(s.hd_sd_mm), std::to_string(s.hd_excluded), "computed"});
    for (const auto& r : reference_benchmarks())
        csv.row({r.label, "", format_num(r.jm_mean), format_num(r.jm_sd), "",
                 format_num(r.hd_mean_mm), format_num(r.hd_sd_mm), "", "published_reference"});
    csv.comment(
        "reference rows restate a published clinical benchmark (18-patient study, full-scale "
        "training); context only, not produced by this run");
    csv.close();
}

inline TargetMap mask_as_probmap(const BinaryMask& m) {
    TargetMap tm;
    tm.target = m.target;
    tm.map = ProbMap(m.height(), m.width());
    for (std::size_t i = 0; i < tm.map.v.size(); ++i) tm.map.v[i] = m.values.v[i] ? 1.0 : 0.0;
    return tm;
}

inline BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a.height(), a.width(), b.height(), b.width(), "mask intersection");
    BinaryMask out = a;
    for (std::size_t i = 0; i < out.values.v.size(); ++i)
        out.values.v[i] = (a.values.v[i] && b.values.v[i]) ? 1 : 0;
    return out;
}

inline std::vector<TruthSlice> truth_slices_from(const LoadedDataset& ds,
                                                 const std::vector<Target>& targets) {
    std::vector<TruthSlice> out;
    out.reserve(static_cast<std::size_t>(ds.count()));
    const std::size_t plane = ds.truth.plane_size();
    for (int i = 0; i < ds.count(); ++i) {
        TruthSlice ts;
        ts.slice_id = ds.slice_ids[static_cast<std::size_t>(i)];
        for (std::size_t t = 0; t < targets.size(); ++t) {
            BinaryMask m;
            m.target = targets[t];
            m.values = Grid2D<std::uint8_t>(ds.truth.h, ds.truth.w);
            const float* src = ds.truth.plane(i, static_cast<int>(t));
            for (std::size_t k = 0; k < plane; ++k) m.values.v[k] = src[k] != 0.0f ? 1 : 0;
            ts.masks.push_back(std::move(m));
        }
        out.push_back(std::move(ts));
    }
    return out;
}

inline void print_summary(const std::vector<MetricsSummary>& summary) {
    for (const auto& s : summary) {
        std::cout << target_name(s.target) << ": n=" << s.n << " JM " << format_num(s.jm_mean)
                  << " +/- " << format_num(s.jm_sd) << ", HD " << format_num(s.hd_mean_mm)
                  << " +/- " << format_num(s.hd_sd_mm) << " mm over " << s.hd_n << " slices";
        if (s.hd_excluded > 0) std::cout << " (" << s.hd_excluded << " excluded: empty border)";
        std::cout << '\n';
    }
}

// Parameter CSV (the `measure` output shape) keyed by patient/slice.
struct ParameterTable {
    std::vector<std::string> keys;  // file order
    std::map<std::string, ClinicalReport> rows;
};

inline ParameterTable read_parameter_csv(const std::string& path) {
    const auto raw = read_csv(path);
    if (raw.empty()) throw ValidationError("empty parameter CSV: " + path);
    const auto& hdr = raw.front();
    auto find_col = [&](const char* name) {
        for (std::size_t i = 0; i < hdr.size(); ++i)
            if (hdr[i] == name) return static_cast<int>(i);
        return -1;
    };
    const int c_slice = find_col("slice_id");
    if (c_slice < 0) throw ValidationError("column 'slice_id' missing in " + path);
    const int c_patient = find_col("patient_id");
    std::array<int, ClinicalReport::kParameterCount> cols{};
    for (int p = 0; p < ClinicalReport::kParameterCount; ++p) {
        cols[static_cast<std::size_t>(p)] =
            find_col(ClinicalReport::parameter_names()[static_cast<std::size_t>(p)]);
        if (cols[static_cast<std::size_t>(p)] < 0)
            throw ValidationError(std::string("column '") +
                                  ClinicalReport::parameter_names()[static_cast<std::size_t>(p)] +
                                  "' missing in " + path);
    }

    ParameterTable table;
    for (std::size_t r = 1; r < raw.size(); ++r) {
        const auto& cells = raw[r];
        if (cells.size() != hdr.size())
            throw ValidationError("row " + std::to_string(r + 1) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(hdr.size()) + ": " + path);
        std::string key = cells[static_cast<std::size_t>(c_slice)];
        if (c_patient >= 0) key = cells[static_cast<std::size_t>(c_patient)] + "/" + key;
        std::array<double, ClinicalReport::kParameterCount> vals{};
        for (int p = 0; p < ClinicalReport::kParameterCount; ++p) {
            const std::string& cell = cells[static_cast<std::size_t>(cols[static_cast<std::size_t>(p)])];
            char* end = nullptr;
            vals[static_cast<std::size_t>(p)] = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw ValidationError("non-numeric cell '" + cell + "' in " + path + " row " +
                                      std::to_string(r + 1));
        }
        if (!table.rows.emplace(key, ClinicalReport::from_values(vals)).second)
            throw ValidationError("duplicate slice key '" + key + "' in " + path);
        table.keys.push_back(std::move(key));
    }
    if (table.keys.empty()) throw ValidationError("no data rows in " + path);
    return table;
}

inline std::string opt_num(const std::optional<double>& v) {
    return v ? format_num(*v) : std::string();
}

}  // namespace detail

// ---------------------------------------------------------------- phantom

struct PhantomOptions {
    std::string out;
    int count = 8;
    int size = 128;
    std::uint64_t seed = 0;
    double noise = 0.2;
    double pixel_spacing = 0.05;
    int slices_per_patient = 10;
    double lumen_min = -1.0, lumen_max = -1.0;  // <0 means size-scaled default
    double ma_min = -1.0, ma_max = -1.0;
};

inline int run_phantom(const PhantomOptions& o, const std::vector<std::string>& argv) {
    PhantomSpec spec;
    spec.count = o.count;
    spec.image_size = o.size;
    spec.seed = o.seed;
    spec.noise_level = o.noise;
    spec.pixel_spacing_mm = o.pixel_spacing;
    spec.slices_per_patient = o.slices_per_patient;
    // Default radii track the canvas so any --size yields a feasible vessel.
    const double scale = o.size / 128.0;
    spec.lumen_radius_range = {o.lumen_min > 0 ? o.lumen_min : 8.0 * scale,
                               o.lumen_max > 0 ? o.lumen_max : 16.0 * scale};
    spec.ma_radius_range = {o.ma_min > 0 ? o.ma_min : 30.0 * scale,
                            o.ma_max > 0 ? o.ma_max : 46.0 * scale};
    spec.validate();

    const fs::path out_dir = detail::apply_out_root(o.out);
    fs::create_directories(out_dir);

    detail::RunRecord rec;
    rec.subcommand = "phantom";
    rec.command_line = argv;
    rec.config = {{"count", spec.count},
                  {"image_size", spec.image_size},
                  {"lumen_radius", {spec.lumen_radius_range.lo, spec.lumen_radius_range.hi}},
                  {"ma_radius", {spec.ma_radius_range.lo, spec.ma_radius_range.hi}},
                  {"noise_level", spec.noise_level},
                  {"pixel_spacing_mm", spec.pixel_spacing_mm},
                  {"slices_per_patient", spec.slices_per_patient}};
    rec.seeds = {{"seed", spec.seed}};
    detail::write_run_record(out_dir / "run_record.json", rec);

    const DatasetManifest m = phantom_generate(spec, out_dir);
    std::cout << "wrote " << m.entries.size() << " phantom slices to " << out_dir.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    std::string manifest;
    std::string out;
    std::string config_path;
    int fold = -1;
    bool all_folds = false;
    // train overrides, applied only when the flag was passed
    double lr = 1e-4;
    int epochs = 201;
    int batch_size = 8;
    int folds = 10;
    std::string split_mode = "slice";
    double test_fraction = 174.0 / 1746.0;
    std::uint64_t seed = 0;
    double smooth_eps = 1e-6;
    // model
    int depth = 5;
    int base_channels = 32;
    std::string fusion = "concat";
    std::uint64_t init_seed = 0;
    std::string targets = "lumen,ma";
};

inline int run_train(const TrainOptions& o, const CLI::App& sub,
                     const std::vector<std::string>& argv) {
    const fs::path out_dir = detail::apply_out_root(o.out);
    fs::create_directories(out_dir);
    const DatasetManifest manifest = load_manifest(o.manifest);

    nlohmann::json cfgj = nlohmann::json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw IoError("cannot open config: " + o.config_path);
        try {
            in >> cfgj;
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("malformed config JSON in " + o.config_path + ": " + e.what());
        }
    }

    TrainConfig tc;
    if (cfgj.contains("train")) tc = train_config_from_json(cfgj.at("train"));
    if (sub.count("--lr")) tc.learning_rate = o.lr;
    if (sub.count("--epochs")) tc.epochs = o.epochs;
    if (sub.count("--batch-size")) tc.batch_size = o.batch_size;
    if (sub.count("--folds")) tc.folds = o.folds;
    if (sub.count("--split-mode")) {
        if (o.split_mode == "slice")
            tc.split_mode = SplitMode::Slice;
        else if (o.split_mode == "patient")
            tc.split_mode = SplitMode::Patient;
        else
            throw ValidationError("--split-mode must be slice or patient");
    }
    if (sub.count("--test-fraction")) tc.test_fraction = o.test_fraction;
    if (sub.count("--seed")) tc.seed = o.seed;
    if (sub.count("--smooth-eps")) tc.smooth_eps = o.smooth_eps;
    tc.validate();

    ModelConfig mc;
    if (cfgj.contains("model")) {
        const auto& mj = cfgj.at("model");
        if (mj.contains("depth")) mc.depth = mj.at("depth").get<int>();
        if (mj.contains("base_channels")) mc.base_channels = mj.at("base_channels").get<int>();
        if (mj.contains("fusion_mode")) {
            const std::string fm = mj.at("fusion_mode").get<std::string>();
            if (fm == "concat")
                mc.fusion_mode = FusionMode::Concat;
            else if (fm == "sum")
                mc.fusion_mode = FusionMode::Sum;
            else
                throw ValidationError("unknown fusion_mode: " + fm);
        }
        if (mj.contains("init_seed")) mc.init_seed = mj.at("init_seed").get<std::uint64_t>();
        if (mj.contains("targets")) {
            mc.targets.clear();
            for (const auto& t : mj.at("targets")) {
                const std::string name = t.get<std::string>();
                if (name == "lumen")
                    mc.targets.push_back(Target::Lumen);
                else if (name == "ma")
                    mc.targets.push_back(Target::Ma);
                else
                    throw ValidationError("unknown target name: " + name);
            }
        }
    }
    if (sub.count("--depth")) mc.depth = o.depth;
    if (sub.count("--base-channels")) mc.base_channels = o.base_channels;
    if (sub.count("--fusion")) {
        if (o.fusion == "concat")
            mc.fusion_mode = FusionMode::Concat;
        else if (o.fusion == "sum")
            mc.fusion_mode = FusionMode::Sum;
        else
            throw ValidationError("--fusion must be concat or sum");
    }
    if (sub.count("--init-seed")) mc.init_seed = o.init_seed;
    if (sub.count("--targets")) mc.targets = detail::parse_targets(o.targets);

    if (manifest.entries.empty()) throw ValidationError("manifest has no slices");
    // Input geometry comes from the data, never from flags.
    const Grid2D<std::uint8_t> probe =
        read_png_gray8(manifest.resolve(manifest.entries.front().image_path).string());
    mc.input_h = static_cast<int>(probe.height);
    mc.input_w = static_cast<int>(probe.width);
    mc.head_count = mc.depth;
    mc.validate();

    if (o.all_folds == (o.fold >= 0))
        throw ValidationError("pass exactly one of --fold K or --all-folds");
    const FoldPlan plan = split_folds(manifest, tc);
    std::vector<int> fold_list;
    if (o.all_folds)
        for (int k = 0; k < tc.folds; ++k) fold_list.push_back(k);
    else
        fold_list.push_back(o.fold);

    detail::RunRecord rec;
    rec.subcommand = "train";
    rec.command_line = argv;
    rec.config = {{"train", train_config_to_json(tc)}, {"model", model_config_to_json(mc)}};
    auto fold_seeds = nlohmann::ordered_json::object();
    for (int k = 0; k < tc.folds; ++k)
        fold_seeds[std::to_string(k)] = mix_seed(mc.init_seed, static_cast<std::uint64_t>(k));
    rec.seeds = {{"split_seed", tc.seed}, {"init_seed", mc.init_seed}, {"fold_init_seeds", fold_seeds}};
    rec.inputs = {fs::path(o.manifest)};
    detail::write_run_record(out_dir / "run_record.json", rec);

    {
        nlohmann::ordered_json sj;
        sj["mode"] = split_mode_name(tc.split_mode);
        auto entry_ids = [](const std::vector<ManifestEntry>& es) {
            auto a = nlohmann::ordered_json::array();
            for (const auto& e : es) a.push_back({{"patient_id", e.patient_id}, {"slice_id", e.slice_id}});
            return a;
        };
        sj["test"] = entry_ids(plan.test_set);
        sj["folds"] = nlohmann::ordered_json::array();
        for (const auto& f : plan.folds) sj["folds"].push_back(entry_ids(f));
        std::ofstream out(out_dir / "split.json", std::ios::binary);
        if (!out) throw IoError("cannot create split.json");
        out << sj.dump(2) << '\n';
    }

    std::optional<LoadedDataset> test_set;
    std::vector<TruthSlice> test_truth;
    if (!plan.test_set.empty()) {
        test_set = load_dataset(manifest, plan.test_set, mc.targets);
        test_truth = detail::truth_slices_from(*test_set, mc.targets);
    }

    for (int k : fold_list) {
        const fs::path fold_dir = out_dir / ("fold_" + std::to_string(k));
        fs::create_directories(fold_dir);
        ModelConfig mck = mc;
        mck.init_seed = mix_seed(mc.init_seed, static_cast<std::uint64_t>(k));
        NestedUNet model(mck);
        const TrainHistory hist = train_model(
            model, manifest, plan, k, tc, (fold_dir / "checkpoint.bin").string(),
            [&](const TrainHistory::Record& r) {
                std::cout << "fold " << k << " epoch " << r.epoch << "/" << tc.epochs << ": train "
                          << format_num(r.train_loss) << " val " << format_num(r.val_loss)
                          << std::endl;
            });
        save_history_csv((fold_dir / "history.csv").string(), hist);
        std::cout << "fold " << k << ": best epoch " << hist.best_epoch;
        if (!std::isnan(hist.best_val_loss))
            std::cout << " (val loss " << format_num(hist.best_val_loss) << ")";
        std::cout << ", checkpoint " << hist.checkpoint_path << '\n';

        if (test_set) {
            const auto preds = predict(model, *test_set, tc.batch_size);
            std::vector<PredictedSlice> ps;
            ps.reserve(preds.size());
            for (const auto& p : preds) ps.push_back({p.slice_id, p.channels});
            const DatasetEvaluation ev = evaluate_dataset(ps, test_truth, manifest.pixel_spacing);
            detail::write_metrics_csv((fold_dir / "test_metrics.csv").string(), ev.per_slice);
            detail::write_summary_csv((fold_dir / "test_summary.csv").string(), ev.summary);
            std::cout << "fold " << k << " held-out test:\n";
            detail::print_summary(ev.summary);
        }
    }
    return 0;
}

// ---------------------------------------------------------------- predict

struct PredictOptions {
    std::string manifest;
    std::string checkpoint;
    std::string out;
    double threshold = -1.0;  // <0 keeps Otsu
    bool clamp_lumen = false;
    int batch_size = 8;
    int jobs = 0;
};

inline int run_predict(const PredictOptions& o, const std::vector<std::string>& argv) {
    const fs::path out_dir = detail::apply_out_root(o.out);
    fs::create_directories(out_dir);
    NestedUNet model = load_checkpoint(o.checkpoint);
    const ModelConfig& mc = model.config();
    // Truth masks are not needed for inference, so skip file existence checks.
    const DatasetManifest manifest = load_manifest(o.manifest, false);
    if (manifest.entries.empty()) throw ValidationError("manifest has no slices");

    detail::RunRecord rec;
    rec.subcommand = "predict";
    rec.command_line = argv;
    rec.config = {{"checkpoint", o.checkpoint},
                  {"config_hash", model_config_hash(mc)},
                  {"threshold", o.threshold >= 0 ? nlohmann::ordered_json(o.threshold)
                                                 : nlohmann::ordered_json("otsu")},
                  {"clamp_lumen", o.clamp_lumen},
                  {"batch_size", o.batch_size},
                  {"jobs", detail::effective_jobs(o.jobs)}};
    rec.inputs = {fs::path(o.manifest)};
    detail::write_run_record(out_dir / "run_record.json", rec);

    const std::size_t n = manifest.entries.size();
    LoadedDataset ds;
    ds.images.resize(static_cast<int>(n), 1, mc.input_h, mc.input_w);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = manifest.entries[i];
        const Grid2D<std::uint8_t> raw = read_png_gray8(manifest.resolve(e.image_path).string());
        if (static_cast<int>(raw.height) != mc.input_h || static_cast<int>(raw.width) != mc.input_w)
            throw ValidationError("slice " + e.slice_id + " is " + std::to_string(raw.height) + "x" +
                                  std::to_string(raw.width) + " but the checkpoint expects " +
                                  std::to_string(mc.input_h) + "x" + std::to_string(mc.input_w));
        float* ip = ds.images.plane(static_cast<int>(i), 0);
        for (std::size_t k = 0; k < raw.v.size(); ++k) ip[k] = static_cast<float>(raw.v[k] / 255.0);
        ds.slice_ids.push_back(e.slice_id);
        ds.patient_ids.push_back(e.patient_id);
    }

    // Mask files are named by slice id unless ids repeat across patients.
    std::set<std::string> unique_ids(ds.slice_ids.begin(), ds.slice_ids.end());
    const bool prefix_patient = unique_ids.size() != ds.slice_ids.size();
    auto file_name = [&](std::size_t i) {
        return (prefix_patient ? ds.patient_ids[i] + "_" : "") + ds.slice_ids[i] + ".png";
    };

    const auto preds = predict(model, ds, o.batch_size);
    for (Target t : mc.targets) {
        fs::create_directories(out_dir / (std::string("masks_") + target_name(t)));
        fs::create_directories(out_dir / (std::string("prob_") + target_name(t)));
    }

    int lumen_ch = -1, ma_ch = -1;
    for (std::size_t t = 0; t < mc.targets.size(); ++t) {
        if (mc.targets[t] == Target::Lumen) lumen_ch = static_cast<int>(t);
        if (mc.targets[t] == Target::Ma) ma_ch = static_cast<int>(t);
    }
    if (o.clamp_lumen && (lumen_ch < 0 || ma_ch < 0))
        throw ValidationError("--clamp-lumen needs a checkpoint predicting both lumen and ma");

    detail::parallel_for(n, detail::effective_jobs(o.jobs), [&](std::size_t i) {
        std::vector<BinaryMask> masks;
        for (const auto& ch : preds[i].channels) {
            masks.push_back(o.threshold >= 0
                                ? largest_component(binarize(ch.map, Threshold{o.threshold}, ch.target))
                                : postprocess(ch.map, ch.target));
        }
        if (o.clamp_lumen)
            masks[static_cast<std::size_t>(lumen_ch)] = largest_component(detail::mask_and(
                masks[static_cast<std::size_t>(lumen_ch)], masks[static_cast<std::size_t>(ma_ch)]));
        for (std::size_t t = 0; t < masks.size(); ++t) {
            const char* tn = target_name(mc.targets[t]);
            write_image_png((out_dir / (std::string("prob_") + tn) / file_name(i)).string(),
                            preds[i].channels[t].map);
            write_mask_png((out_dir / (std::string("masks_") + tn) / file_name(i)).string(),
                           masks[t]);
        }
    });

    if (lumen_ch >= 0 && ma_ch >= 0) {
        DatasetManifest pm;
        pm.pixel_spacing = manifest.pixel_spacing;
        for (std::size_t i = 0; i < n; ++i) {
            ManifestEntry e;
            e.image_path = fs::absolute(manifest.resolve(manifest.entries[i].image_path)).string();
            e.lumen_mask_path = "masks_lumen/" + file_name(i);
            e.ma_mask_path = "masks_ma/" + file_name(i);
            e.patient_id = manifest.entries[i].patient_id;
            e.slice_id = manifest.entries[i].slice_id;
            pm.entries.push_back(std::move(e));
        }
        save_manifest(pm, out_dir / "predictions.json");
    } else {
        std::cout << "single-target checkpoint: predictions.json skipped (needs lumen and ma)\n";
    }
    std::cout << "predicted " << n << " slices into " << out_dir.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
    std::string pred;
    std::string manifest;
    std::string out;
    int jobs = 0;
};

inline int run_evaluate(const EvaluateOptions& o, const std::vector<std::string>& argv) {
    const fs::path out_dir = detail::apply_out_root(o.out);
    fs::create_directories(out_dir);
    const DatasetManifest pred = load_manifest(o.pred);
    const DatasetManifest truth = load_manifest(o.manifest);
    if (pred.entries.empty()) throw ValidationError("no predictions to evaluate");
    const double ps_rel = std::abs(pred.pixel_spacing.mm_per_px - truth.pixel_spacing.mm_per_px) /
                          truth.pixel_spacing.mm_per_px;
    if (ps_rel > 1e-9)
        throw ValidationError("pixel spacing mismatch: predictions " +
                              format_num(pred.pixel_spacing.mm_per_px) + " vs truth " +
                              format_num(truth.pixel_spacing.mm_per_px));

    std::map<std::pair<std::string, std::string>, const ManifestEntry*> truth_by_id;
    for (const auto& e : truth.entries) truth_by_id[{e.patient_id, e.slice_id}] = &e;
    std::vector<const ManifestEntry*> matched;
    for (const auto& e : pred.entries) {
        auto it = truth_by_id.find({e.patient_id, e.slice_id});
        if (it == truth_by_id.end())
            throw ValidationError("prediction for unknown slice: " + e.patient_id + "/" + e.slice_id);
        matched.push_back(it->second);
    }

    detail::RunRecord rec;
    rec.subcommand = "evaluate";
    rec.command_line = argv;
    rec.config = {{"pred", o.pred}, {"manifest", o.manifest}, {"jobs", detail::effective_jobs(o.jobs)}};
    rec.inputs = {fs::path(o.pred), fs::path(o.manifest)};
    detail::write_run_record(out_dir / "run_record.json", rec);

    const std::size_t n = pred.entries.size();
    std::vector<std::vector<SliceMetrics>> slots(n);
    detail::parallel_for(n, detail::effective_jobs(o.jobs), [&](std::size_t i) {
        const SlicePair pp = load_pair(pred, pred.entries[i]);
        const SlicePair tp = load_pair(truth, *matched[i]);
        PredictedSlice psl;
        psl.slice_id = pred.entries[i].slice_id;
        psl.channels = {detail::mask_as_probmap(pp.lumen), detail::mask_as_probmap(pp.ma)};
        TruthSlice tsl;
        tsl.slice_id = pred.entries[i].slice_id;
        tsl.masks = {tp.lumen, tp.ma};
        slots[i] = evaluate_slice(psl, tsl, truth.pixel_spacing);
    });

    std::vector<SliceMetrics> per_slice;
    for (auto& s : slots) per_slice.insert(per_slice.end(), s.begin(), s.end());
    const auto summary = summarize_metrics(per_slice);
    detail::write_metrics_csv((out_dir / "metrics.csv").string(), per_slice);
    detail::write_summary_csv((out_dir / "summary.csv").string(), summary);
    detail::print_summary(summary);
    return 0;
}

// ---------------------------------------------------------------- measure

struct MeasureOptions {
    std::string manifest;
    std::string out;
    int angles = 720;
    int jobs = 0;
};

inline int run_measure(const MeasureOptions& o, const std::vector<std::string>& argv) {
    const DatasetManifest manifest = load_manifest(o.manifest);
    if (manifest.entries.empty()) throw ValidationError("manifest has no slices");
    const fs::path out_path = detail::apply_out_root(o.out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());

    detail::RunRecord rec;
    rec.subcommand = "measure";
    rec.command_line = argv;
    rec.config = {{"manifest", o.manifest},
                  {"angles", o.angles},
                  {"jobs", detail::effective_jobs(o.jobs)}};
    rec.inputs = {fs::path(o.manifest)};
    detail::write_run_record(out_path.string() + ".run.json", rec);

    const std::size_t n = manifest.entries.size();
    std::vector<ClinicalReport> reports(n);
    detail::parallel_for(n, detail::effective_jobs(o.jobs), [&](std::size_t i) {
        const auto& e = manifest.entries[i];
        try {
            const SlicePair pair = load_pair(manifest, e);
            reports[i] = measure_all(pair.lumen, pair.ma, manifest.pixel_spacing, o.angles);
        } catch (const Error& err) {
            std::string msg = "slice " + e.patient_id + "/" + e.slice_id + ": " + err.what();
            if (msg.find("clamp") != std::string::npos)
                msg += " (for predicted masks, re-run predict with --clamp-lumen)";
            throw ValidationError(msg);
        }
    });

    CsvWriter csv(out_path.string());
    std::vector<std::string> header = {"patient_id", "slice_id", "pixel_spacing_mm"};
    for (const char* name : ClinicalReport::parameter_names()) header.push_back(name);
    csv.row(header);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> cells = {manifest.entries[i].patient_id,
                                          manifest.entries[i].slice_id,
                                          format_num(manifest.pixel_spacing.mm_per_px)};
        for (int p = 0; p < ClinicalReport::kParameterCount; ++p)
            cells.push_back(format_num(reports[i].value(p)));
        csv.row(cells);
    }
    csv.close();
    std::cout << "measured " << n << " slices -> " << out_path.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------- agreement

struct AgreementOptions {
    std::string pred;
    std::string truth;
    std::string out;
    bool plots = false;
};

inline int run_agreement(const AgreementOptions& o, const std::vector<std::string>& argv) {
    const fs::path out_dir = detail::apply_out_root(o.out);
    fs::create_directories(out_dir);

    detail::RunRecord rec;
    rec.subcommand = "agreement";
    rec.command_line = argv;
    rec.config = {{"pred", o.pred}, {"truth", o.truth}, {"plots", o.plots}};
    rec.inputs = {fs::path(o.pred), fs::path(o.truth)};
    detail::write_run_record(out_dir / "run_record.json", rec);

    const detail::ParameterTable pt = detail::read_parameter_csv(o.pred);
    const detail::ParameterTable tt = detail::read_parameter_csv(o.truth);
    std::vector<ClinicalReport> pred_rows, truth_rows;
    for (const auto& key : pt.keys) {
        auto it = tt.rows.find(key);
        if (it == tt.rows.end())
            throw ValidationError("slice " + key + " missing from truth report " + o.truth);
        pred_rows.push_back(pt.rows.at(key));
        truth_rows.push_back(it->second);
    }

    const AgreementReport rep = agreement_report(pred_rows, truth_rows);

    CsvWriter csv((out_dir / "agreement.csv").string());
    csv.row({"parameter", "n", "r", "p", "mae", "rmse", "re_min", "re_max", "ba_mean", "loa_low",
             "loa_high"});
    int re_excluded = 0;
    auto emit = [&](const AgreementStats& row) {
        csv.row({row.parameter, std::to_string(row.n), detail::opt_num(row.r),
                 detail::opt_num(row.p), format_num(row.mae), format_num(row.rmse),
                 format_num(row.re_min), format_num(row.re_max), format_num(row.ba_mean),
                 format_num(row.loa_low), format_num(row.loa_high)});
    };
    for (const auto& row : rep.rows) {
        emit(row);
        re_excluded += row.re_excluded;
    }
    emit(rep.mean_row);
    csv.comment(
        "mean row averages raw values over parameters with mixed units (mm, mm^2, unitless)");
    if (re_excluded > 0)
        csv.comment("relative-error extrema skipped " + std::to_string(re_excluded) +
                    " zero-truth slice values");
    csv.close();

    for (int p = 0; p < ClinicalReport::kParameterCount; ++p) {
        const std::string name = ClinicalReport::parameter_names()[static_cast<std::size_t>(p)];
        const std::size_t pi = static_cast<std::size_t>(p);
        CsvWriter sc((out_dir / ("scatter_" + name + ".csv")).string());
        sc.row({"truth", "pred"});
        for (const auto& [t, v] : rep.scatter[pi]) sc.row({format_num(t), format_num(v)});
        sc.close();
        CsvWriter ba((out_dir / ("bland_altman_" + name + ".csv")).string());
        ba.row({"average", "difference"});
        for (const auto& [avg, diff] : rep.ba[pi].points) ba.row({format_num(avg), format_num(diff)});
        ba.close();
        if (o.plots) {
            render_scatter_png((out_dir / ("scatter_" + name + ".png")).string(), rep.scatter[pi]);
            render_bland_altman_png((out_dir / ("bland_altman_" + name + ".png")).string(),
                                    rep.ba[pi]);
        }
    }

    std::cout << "agreement over " << pred_rows.size() << " slices -> " << out_dir.string() << '\n';
    for (const auto& row : rep.rows)
        if (row.r)
            std::cout << "  " << row.parameter << ": r " << format_num(*row.r) << ", mae "
                      << format_num(row.mae) << '\n';
    return 0;
}

// ---------------------------------------------------------------- driver

inline int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv, argv + argc);
    CLI::App app{"IVUS segmentation and quantification toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolkitName) + " " + kToolkitVersion);

    PhantomOptions po;
    auto* ph = app.add_subcommand("phantom", "generate a synthetic vessel dataset");
    ph->add_option("--out", po.out, "output directory")->required();
    ph->add_option("--count", po.count, "number of slices")->check(CLI::PositiveNumber);
    ph->add_option("--size", po.size, "square image size in px")->check(CLI::Range(16, 4096));
    ph->add_option("--seed", po.seed, "generator seed");
    ph->add_option("--noise", po.noise, "speckle amplitude")->check(CLI::Range(0.0, 0.999));
    ph->add_option("--pixel-spacing", po.pixel_spacing, "mm per pixel")->check(CLI::PositiveNumber);
    ph->add_option("--slices-per-patient", po.slices_per_patient, "slices grouped per patient id")
        ->check(CLI::PositiveNumber);
    ph->add_option("--lumen-radius-min", po.lumen_min, "lumen semi-major axis lower bound, px");
    ph->add_option("--lumen-radius-max", po.lumen_max, "lumen semi-major axis upper bound, px");
    ph->add_option("--ma-radius-min", po.ma_min, "ma semi-major axis lower bound, px");
    ph->add_option("--ma-radius-max", po.ma_max, "ma semi-major axis upper bound, px");

    TrainOptions to;
    auto* tr = app.add_subcommand("train", "cross-validated training with held-out test metrics");
    tr->add_option("--manifest", to.manifest, "dataset manifest JSON")->required();
    tr->add_option("--out", to.out, "run output directory")->required();
    tr->add_option("--config", to.config_path, "JSON config with train/model sections");
    tr->add_option("--fold", to.fold, "validation fold index")->check(CLI::NonNegativeNumber);
    tr->add_flag("--all-folds", to.all_folds, "train every fold in sequence");
    tr->add_option("--lr", to.lr, "learning rate")->check(CLI::PositiveNumber);
    tr->add_option("--epochs", to.epochs, "training epochs")->check(CLI::NonNegativeNumber);
    tr->add_option("--batch-size", to.batch_size, "minibatch size")->check(CLI::PositiveNumber);
    tr->add_option("--folds", to.folds, "cross-validation fold count")->check(CLI::Range(2, 1000));
    tr->add_option("--split-mode", to.split_mode, "slice or patient");
    tr->add_option("--test-fraction", to.test_fraction, "held-out test fraction");
    tr->add_option("--seed", to.seed, "split/shuffle seed");
    tr->add_option("--smooth-eps", to.smooth_eps, "dice smoothing epsilon")
        ->check(CLI::PositiveNumber);
    tr->add_option("--depth", to.depth, "network depth L")->check(CLI::Range(2, 10));
    tr->add_option("--base-channels", to.base_channels, "channels at full resolution")
        ->check(CLI::PositiveNumber);
    tr->add_option("--fusion", to.fusion, "skip fusion: concat or sum");
    tr->add_option("--init-seed", to.init_seed, "weight initialization seed");
    tr->add_option("--targets", to.targets, "comma list of lumen,ma");

    PredictOptions pro;
    auto* pr = app.add_subcommand("predict", "run a checkpoint over a manifest");
    pr->add_option("--manifest", pro.manifest, "dataset manifest JSON")->required();
    pr->add_option("--checkpoint", pro.checkpoint, "trained checkpoint file")->required();
    pr->add_option("--out", pro.out, "output directory")->required();
    pr->add_option("--threshold", pro.threshold, "fixed binarization threshold instead of Otsu")
        ->check(CLI::Range(0.0, 1.0));
    pr->add_flag("--clamp-lumen", pro.clamp_lumen, "intersect the lumen mask with the ma mask");
    pr->add_option("--batch-size", pro.batch_size, "inference batch size")
        ->check(CLI::PositiveNumber);
    pr->add_option("--jobs", pro.jobs, "post-processing worker count")->check(CLI::Range(1, 4096));

    EvaluateOptions eo;
    auto* ev = app.add_subcommand("evaluate", "score predicted masks against ground truth");
    ev->add_option("--pred", eo.pred, "predictions manifest (predict output)")->required();
    ev->add_option("--manifest", eo.manifest, "ground-truth manifest")->required();
    ev->add_option("--out", eo.out, "output directory")->required();
    ev->add_option("--jobs", eo.jobs, "worker count")->check(CLI::Range(1, 4096));

    MeasureOptions mo;
    auto* me = app.add_subcommand("measure", "clinical parameter report from masks");
    me->add_option("--manifest", mo.manifest, "dataset manifest JSON")->required();
    me->add_option("--out", mo.out, "output CSV path")->required();
    me->add_option("--angles", mo.angles, "radial samples per slice")->check(CLI::Range(360, 36000));
    me->add_option("--jobs", mo.jobs, "worker count")->check(CLI::Range(1, 4096));

    AgreementOptions ao;
    auto* ag = app.add_subcommand("agreement", "agreement statistics between two parameter reports");
    ag->add_option("--pred", ao.pred, "predicted parameter CSV")->required();
    ag->add_option("--truth", ao.truth, "reference parameter CSV")->required();
    ag->add_option("--out", ao.out, "output directory")->required();
    ag->add_flag("--plots", ao.plots, "also render scatter/Bland-Altman PNGs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << " (run with --help)\n";
        return 2;
    }

    try {
        if (ph->parsed()) return run_phantom(po, args);
        if (tr->parsed()) return run_train(to, *tr, args);
        if (pr->parsed()) return run_predict(pro, args);
        if (ev->parsed()) return run_evaluate(eo, args);
        if (me->parsed()) return run_measure(mo, args);
        if (ag->parsed()) return run_agreement(ao, args);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << '\n';
        return 1;
    }
    return 2;  // unreachable: require_subcommand
}

}  // namespace ivuskit::cli
