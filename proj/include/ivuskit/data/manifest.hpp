#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "../error.hpp"
#include "../grid.hpp"

namespace ivuskit {

struct ManifestEntry {
    std::string image_path;
    std::string lumen_mask_path;
    std::string ma_mask_path;
    std::string patient_id;
    std::string slice_id;
};

// Dataset index: one entry per slice plus the dataset-global pixel spacing.
// Relative paths are resolved against the manifest file's directory.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    PixelSpacing pixel_spacing;
    std::filesystem::path base_dir;  // not serialized

    std::filesystem::path resolve(const std::string& p) const {
        std::filesystem::path fp(p);
        if (fp.is_absolute() || base_dir.empty()) return fp;
        return base_dir / fp;
    }
};

namespace detail {

inline void validate_manifest(const DatasetManifest& m, bool check_files) {
    m.pixel_spacing.validate();
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& e : m.entries) {
        auto key = std::make_pair(e.patient_id, e.slice_id);
        if (!seen.insert(key).second)
            throw ValidationError("duplicate (patient_id, slice_id): (" + e.patient_id + ", " + e.slice_id + ")");
        if (check_files) {
            for (const std::string* p : {&e.image_path, &e.lumen_mask_path, &e.ma_mask_path}) {
                if (!std::filesystem::exists(m.resolve(*p)))
                    throw IoError("manifest references missing file: " + m.resolve(*p).string());
            }
        }
    }
}

}  // namespace detail

inline DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                          bool check_files) {
    DatasetManifest m;
    m.base_dir = base_dir;
    if (!j.contains("pixel_spacing") || !j.at("pixel_spacing").is_number())
        throw ValidationError("manifest missing numeric pixel_spacing");
    m.pixel_spacing.mm_per_px = j.at("pixel_spacing").get<double>();
    if (!j.contains("entries") || !j.at("entries").is_array())
        throw ValidationError("manifest missing entries array");
    for (const auto& je : j.at("entries")) {
        ManifestEntry e;
        for (const char* field : {"image_path", "lumen_mask_path", "ma_mask_path", "patient_id", "slice_id"}) {
            if (!je.contains(field) || !je.at(field).is_string())
                throw ValidationError(std::string("manifest entry missing string field: ") + field);
        }
        e.image_path = je.at("image_path").get<std::string>();
        e.lumen_mask_path = je.at("lumen_mask_path").get<std::string>();
        e.ma_mask_path = je.at("ma_mask_path").get<std::string>();
        e.patient_id = je.at("patient_id").get<std::string>();
        e.slice_id = je.at("slice_id").get<std::string>();
        m.entries.push_back(std::move(e));
    }
    detail::validate_manifest(m, check_files);
    return m;
}

inline nlohmann::ordered_json manifest_to_json(const DatasetManifest& m) {
    nlohmann::ordered_json j;
    j["pixel_spacing"] = m.pixel_spacing.mm_per_px;
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : m.entries) {
        nlohmann::ordered_json je;
        je["image_path"] = e.image_path;
        je["lumen_mask_path"] = e.lumen_mask_path;
        je["ma_mask_path"] = e.ma_mask_path;
        je["patient_id"] = e.patient_id;
        je["slice_id"] = e.slice_id;
        j["entries"].push_back(std::move(je));
    }
    return j;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed manifest JSON in " + path.string() + ": " + e.what());
    }
    return manifest_from_json(j, path.parent_path(), check_files);
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    detail::validate_manifest(m, false);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create manifest: " + path.string());
    out << manifest_to_json(m).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace ivuskit
