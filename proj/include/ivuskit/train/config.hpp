#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ivuskit/error.hpp"

namespace ivuskit {

enum class SplitMode { Slice, Patient };

inline const char* split_mode_name(SplitMode m) {
    return m == SplitMode::Slice ? "slice" : "patient";
}

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs = 201;
    int batch_size = 8;
    std::string optimizer = "rmsprop";
    double rms_decay = 0.9;
    double rms_epsilon = 1e-8;
    int folds = 10;
    SplitMode split_mode = SplitMode::Slice;
    double test_fraction = 174.0 / 1746.0;
    std::uint64_t seed = 0;
    double smooth_eps = 1e-6;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
        if (epochs < 0) throw ValidationError("epochs must be non-negative");
        if (batch_size < 1) throw ValidationError("batch_size must be positive");
        if (optimizer != "rmsprop") throw ValidationError("unknown optimizer: " + optimizer);
        if (!(rms_decay > 0.0 && rms_decay < 1.0))
            throw ValidationError("rms_decay must lie in (0,1)");
        if (!(rms_epsilon > 0.0)) throw ValidationError("rms_epsilon must be positive");
        if (folds < 2) throw ValidationError("folds must be at least 2");
        // 0 is allowed so tiny datasets can skip the held-out split entirely.
        if (!(test_fraction >= 0.0 && test_fraction < 1.0))
            throw ValidationError("test_fraction must lie in [0,1)");
        if (!(smooth_eps > 0.0)) throw ValidationError("smooth_eps must be positive");
    }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["learning_rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["optimizer"] = c.optimizer;
    j["rms_decay"] = c.rms_decay;
    j["rms_epsilon"] = c.rms_epsilon;
    j["folds"] = c.folds;
    j["split_mode"] = split_mode_name(c.split_mode);
    j["test_fraction"] = c.test_fraction;
    j["seed"] = c.seed;
    j["smooth_eps"] = c.smooth_eps;
    return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("optimizer")) c.optimizer = j.at("optimizer").get<std::string>();
    if (j.contains("rms_decay")) c.rms_decay = j.at("rms_decay").get<double>();
    if (j.contains("rms_epsilon")) c.rms_epsilon = j.at("rms_epsilon").get<double>();
    if (j.contains("folds")) c.folds = j.at("folds").get<int>();
    if (j.contains("split_mode")) {
        const std::string m = j.at("split_mode").get<std::string>();
        if (m == "slice")
            c.split_mode = SplitMode::Slice;
        else if (m == "patient")
            c.split_mode = SplitMode::Patient;
        else
            throw ValidationError("unknown split_mode: " + m);
    }
    if (j.contains("test_fraction")) c.test_fraction = j.at("test_fraction").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("smooth_eps")) c.smooth_eps = j.at("smooth_eps").get<double>();
    c.validate();
    return c;
}

} // namespace ivuskit
