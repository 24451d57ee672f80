#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ivuskit/data/manifest.hpp"
#include "ivuskit/rng.hpp"
#include "ivuskit/train/config.hpp"

namespace ivuskit {

struct FoldPlan {
    std::vector<ManifestEntry> test_set;
    std::vector<std::vector<ManifestEntry>> folds;

    std::size_t train_size() const {
        std::size_t n = 0;
        for (const auto& f : folds) n += f.size();
        return n;
    }
};

// Deterministic held-out split plus cross-validation folds.
//
// SLICE mode: shuffle all entries, peel off round(n * test_fraction) for the
// test set, deal the rest round-robin so fold sizes differ by at most one.
//
// PATIENT mode: shuffle patients (first-appearance order before the shuffle),
// assign whole patients to the test set until its slice count reaches the
// target, then give each remaining patient to the currently smallest fold.
// No patient ever spans two parts.
inline FoldPlan split_folds(const DatasetManifest& manifest, const TrainConfig& config) {
    config.validate();
    const auto& entries = manifest.entries;
    if (entries.empty()) throw ValidationError("cannot split an empty manifest");
    const std::size_t n = entries.size();
    const std::size_t test_n =
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.test_fraction));
    const std::size_t folds_n = static_cast<std::size_t>(config.folds);

    Rng rng(mix_seed(config.seed, 0));
    FoldPlan plan;
    plan.folds.resize(folds_n);

    if (config.split_mode == SplitMode::Slice) {
        if (n - test_n < folds_n)
            throw ValidationError("not enough entries to fill every fold");
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        for (std::size_t i = 0; i < test_n; ++i) plan.test_set.push_back(entries[order[i]]);
        for (std::size_t i = test_n; i < n; ++i)
            plan.folds[(i - test_n) % folds_n].push_back(entries[order[i]]);
    } else {
        std::vector<std::string> patients;
        std::map<std::string, std::vector<std::size_t>> by_patient;
        for (std::size_t i = 0; i < n; ++i) {
            auto [it, inserted] = by_patient.try_emplace(entries[i].patient_id);
            if (inserted) patients.push_back(entries[i].patient_id);
            it->second.push_back(i);
        }
        if (patients.size() < folds_n + 1)
            throw ValidationError("patient-level split needs more patients than folds");
        rng.shuffle(patients);

        std::size_t taken = 0, p = 0;
        while (p < patients.size() && taken < test_n) {
            for (std::size_t i : by_patient[patients[p]]) plan.test_set.push_back(entries[i]);
            taken += by_patient[patients[p]].size();
            ++p;
        }
        if (patients.size() - p < folds_n)
            throw ValidationError("not enough patients left for every fold after the test split");
        for (; p < patients.size(); ++p) {
            std::size_t smallest = 0;
            for (std::size_t f = 1; f < folds_n; ++f)
                if (plan.folds[f].size() < plan.folds[smallest].size()) smallest = f;
            for (std::size_t i : by_patient[patients[p]])
                plan.folds[smallest].push_back(entries[i]);
        }
    }

    for (const auto& f : plan.folds)
        if (f.empty()) throw ValidationError("split produced an empty fold");
    return plan;
}

} // namespace ivuskit
