#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ivuskit/error.hpp"
#include "ivuskit/grid.hpp"

namespace ivuskit {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

enum class FusionMode { Concat, Sum };

inline const char* fusion_name(FusionMode m) {
    return m == FusionMode::Concat ? "concat" : "sum";
}

struct ModelConfig {
    int depth = 5; // down-sampling stages; grid rows run 0..depth
    int base_channels = 32;
    int input_h = 256;
    int input_w = 256;
    std::vector<Target> targets = {Target::Lumen, Target::Ma};
    FusionMode fusion_mode = FusionMode::Concat;
    int head_count = 5; // kept equal to depth
    std::uint64_t init_seed = 0;

    int target_count() const { return static_cast<int>(targets.size()); }
    int channels_at(int level) const { return base_channels << level; }

    void validate() const {
        if (depth < 2) throw ValidationError("model depth must be at least 2");
        if (depth > 10) throw ValidationError("model depth is implausibly large");
        if (base_channels < 4) throw ValidationError("base_channels must be at least 4");
        if (head_count != depth)
            throw ValidationError("head_count must equal model depth");
        const int div = 1 << depth;
        if (input_h <= 0 || input_w <= 0 || input_h % div != 0 || input_w % div != 0)
            throw ValidationError("input size must be divisible by 2^depth");
        if (targets.empty()) throw ValidationError("model needs at least one target");
        for (std::size_t a = 0; a < targets.size(); ++a)
            for (std::size_t b = a + 1; b < targets.size(); ++b)
                if (targets[a] == targets[b])
                    throw ValidationError("duplicate target in model config");
    }
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["depth"] = c.depth;
    j["base_channels"] = c.base_channels;
    j["input_h"] = c.input_h;
    j["input_w"] = c.input_w;
    nlohmann::json t = nlohmann::json::array();
    for (Target tg : c.targets) t.push_back(target_name(tg));
    j["targets"] = t;
    j["fusion_mode"] = fusion_name(c.fusion_mode);
    j["head_count"] = c.head_count;
    j["init_seed"] = c.init_seed;
    return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.depth = j.at("depth").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.input_h = j.at("input_h").get<int>();
    c.input_w = j.at("input_w").get<int>();
    c.targets.clear();
    for (const auto& t : j.at("targets")) {
        const std::string name = t.get<std::string>();
        if (name == "lumen")
            c.targets.push_back(Target::Lumen);
        else if (name == "ma")
            c.targets.push_back(Target::Ma);
        else
            throw ValidationError("unknown target name: " + name);
    }
    const std::string fm = j.at("fusion_mode").get<std::string>();
    if (fm == "concat")
        c.fusion_mode = FusionMode::Concat;
    else if (fm == "sum")
        c.fusion_mode = FusionMode::Sum;
    else
        throw ValidationError("unknown fusion_mode: " + fm);
    c.head_count = j.contains("head_count") ? j.at("head_count").get<int>() : c.depth;
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    c.validate();
    return c;
}

// Stable fingerprint used to reject checkpoints built for a different config.
inline std::string model_config_hash(const ModelConfig& c) {
    return hex64(fnv1a64(model_config_to_json(c).dump()));
}

} // namespace ivuskit
