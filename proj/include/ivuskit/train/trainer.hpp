#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ivuskit/data/loader.hpp"
#include "ivuskit/data/manifest.hpp"
#include "ivuskit/io/csv.hpp"
#include "ivuskit/model/checkpoint.hpp"
#include "ivuskit/model/network.hpp"
#include "ivuskit/rng.hpp"
#include "ivuskit/train/config.hpp"
#include "ivuskit/train/loss.hpp"
#include "ivuskit/train/optimizer.hpp"
#include "ivuskit/train/split.hpp"

namespace ivuskit {

// Slices materialized as network-ready tensors, kept in manifest order.
struct LoadedDataset {
    std::vector<std::string> slice_ids;
    std::vector<std::string> patient_ids;
    nn::Tensor images; // (n, 1, H, W)
    nn::Tensor truth;  // (n, targets, H, W)

    int count() const { return images.n; }
};

inline LoadedDataset load_dataset(const DatasetManifest& manifest,
                                  const std::vector<ManifestEntry>& entries,
                                  const std::vector<Target>& targets) {
    if (entries.empty()) throw ValidationError("no slices to load");
    LoadedDataset ds;
    int h = 0, w = 0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
        SlicePair pair = load_pair(manifest, entries[k]);
        if (k == 0) {
            h = pair.image.height();
            w = pair.image.width();
            ds.images.resize(static_cast<int>(entries.size()), 1, h, w);
            ds.truth.resize(static_cast<int>(entries.size()), static_cast<int>(targets.size()), h, w);
        } else {
            require_same_shape(h, w, pair.image.height(), pair.image.width(),
                               ("slice " + entries[k].slice_id).c_str());
        }
        ds.slice_ids.push_back(entries[k].slice_id);
        ds.patient_ids.push_back(entries[k].patient_id);
        float* ip = ds.images.plane(static_cast<int>(k), 0);
        for (std::size_t i = 0; i < pair.image.pixels.size(); ++i)
            ip[i] = static_cast<float>(pair.image.pixels.v[i]);
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const BinaryMask& m = targets[t] == Target::Lumen ? pair.lumen : pair.ma;
            float* tp = ds.truth.plane(static_cast<int>(k), static_cast<int>(t));
            for (std::size_t i = 0; i < m.values.size(); ++i) tp[i] = m.values.v[i];
        }
    }
    return ds;
}

struct TrainHistory {
    struct Record {
        int epoch = 0;
        double train_loss = 0.0;
        double val_loss = 0.0;
    };
    std::vector<Record> records;
    std::string checkpoint_path;
    int best_epoch = 0; // 0 = initialization state (epochs == 0)
    double best_val_loss = std::numeric_limits<double>::quiet_NaN();
};

inline void save_history_csv(const std::string& path, const TrainHistory& h) {
    CsvWriter csv(path);
    csv.row({"epoch", "train_loss", "val_loss"});
    for (const auto& r : h.records)
        csv.row({std::to_string(r.epoch), format_num(r.train_loss), format_num(r.val_loss)});
    csv.close();
}

namespace detail {

inline void gather_batch(const LoadedDataset& ds, const std::vector<std::size_t>& idx,
                         std::size_t first, std::size_t count, nn::Tensor& images,
                         nn::Tensor& truth) {
    images.resize(static_cast<int>(count), 1, ds.images.h, ds.images.w);
    truth.resize(static_cast<int>(count), ds.truth.c, ds.truth.h, ds.truth.w);
    const std::size_t ps = ds.images.plane_size();
    for (std::size_t b = 0; b < count; ++b) {
        const int src = static_cast<int>(idx[first + b]);
        std::copy_n(ds.images.plane(src, 0), ps, images.plane(static_cast<int>(b), 0));
        for (int t = 0; t < ds.truth.c; ++t)
            std::copy_n(ds.truth.plane(src, t), ps, truth.plane(static_cast<int>(b), t));
    }
}

struct ModelSnapshot {
    std::vector<std::vector<float>> values;

    static ModelSnapshot take(NestedUNet& model) {
        ModelSnapshot s;
        for (const auto& p : model.parameters()) s.values.push_back(*p.values);
        for (const auto& p : model.state_buffers()) s.values.push_back(*p.values);
        return s;
    }

    void restore(NestedUNet& model) const {
        std::size_t k = 0;
        for (auto& p : model.parameters()) *p.values = values[k++];
        for (auto& p : model.state_buffers()) *p.values = values[k++];
    }
};

inline double eval_loss(NestedUNet& model, const LoadedDataset& ds, int batch_size, double eps) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(ds.count()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    nn::Tensor images, truth;
    double sum = 0.0;
    for (std::size_t first = 0; first < idx.size(); first += static_cast<std::size_t>(batch_size)) {
        const std::size_t count =
            std::min(static_cast<std::size_t>(batch_size), idx.size() - first);
        gather_batch(ds, idx, first, count, images, truth);
        auto result = model.forward(images);
        sum += supervised_loss_batch(result, truth, eps) * static_cast<double>(count);
    }
    return sum / static_cast<double>(idx.size());
}

} // namespace detail

// Trains on every fold except `fold_k`, validates on fold `fold_k`, and saves
// the parameters that minimize validation loss. Fully deterministic for a
// fixed (config, seed, data) triple.
inline TrainHistory train_model(NestedUNet& model, const DatasetManifest& manifest,
                                const FoldPlan& plan, int fold_k, const TrainConfig& config,
                                const std::string& checkpoint_path,
                                const std::function<void(const TrainHistory::Record&)>& on_epoch = {}) {
    config.validate();
    if (fold_k < 0 || static_cast<std::size_t>(fold_k) >= plan.folds.size())
        throw ValidationError("fold index out of range");

    std::vector<ManifestEntry> train_entries;
    for (std::size_t f = 0; f < plan.folds.size(); ++f)
        if (f != static_cast<std::size_t>(fold_k))
            train_entries.insert(train_entries.end(), plan.folds[f].begin(), plan.folds[f].end());
    const std::vector<ManifestEntry>& val_entries = plan.folds[static_cast<std::size_t>(fold_k)];
    if (train_entries.empty()) throw ValidationError("training split is empty");

    const LoadedDataset train_set = load_dataset(manifest, train_entries, model.config().targets);
    const LoadedDataset val_set = load_dataset(manifest, val_entries, model.config().targets);

    TrainHistory history;
    history.checkpoint_path = checkpoint_path;

    RmsProp opt(config.learning_rate, config.rms_decay, config.rms_epsilon);
    opt.attach(model.parameters());

    detail::ModelSnapshot best = detail::ModelSnapshot::take(model);
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;

    std::vector<std::size_t> idx(static_cast<std::size_t>(train_set.count()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    nn::Tensor images, truth;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(idx);

        double train_sum = 0.0;
        int batch_no = 0;
        for (std::size_t first = 0; first < idx.size();
             first += static_cast<std::size_t>(config.batch_size), ++batch_no) {
            const std::size_t count =
                std::min(static_cast<std::size_t>(config.batch_size), idx.size() - first);
            detail::gather_batch(train_set, idx, first, count, images, truth);
            model.forward_training(images);
            model.zero_grad();
            const double loss = model.backward_supervised(truth, config.smooth_eps);
            if (!std::isfinite(loss))
                throw Error("non-finite training loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_no));
            opt.step();
            train_sum += loss * static_cast<double>(count);
        }
        const double train_loss = train_sum / static_cast<double>(idx.size());

        const double val_loss =
            detail::eval_loss(model, val_set, config.batch_size, config.smooth_eps);
        if (!std::isfinite(val_loss))
            throw Error("non-finite validation loss at epoch " + std::to_string(epoch));

        history.records.push_back({epoch, train_loss, val_loss});
        if (on_epoch) on_epoch(history.records.back());
        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            best = detail::ModelSnapshot::take(model);
        }
    }

    best.restore(model);
    save_checkpoint(model, checkpoint_path);
    history.best_epoch = best_epoch;
    history.best_val_loss = config.epochs == 0 ? std::numeric_limits<double>::quiet_NaN() : best_val;
    return history;
}

} // namespace ivuskit
