#pragma once

#include <string>
#include <vector>

#include "ivuskit/grid.hpp"
#include "ivuskit/model/network.hpp"
#include "ivuskit/train/trainer.hpp"

namespace ivuskit {

struct Prediction {
    std::string slice_id;
    std::vector<TargetMap> channels; // fused probability map per target
};

// Batched inference; a pure function of (model parameters, inputs), and
// per-slice results are independent of how the batch is chunked.
inline std::vector<Prediction> predict(const NestedUNet& model, const LoadedDataset& data,
                                       int batch_size = 8) {
    if (batch_size < 1) throw ValidationError("batch_size must be positive");
    if (data.count() == 0) throw ValidationError("no slices to predict");
    const auto& targets = model.config().targets;
    std::vector<Prediction> out;
    out.reserve(static_cast<std::size_t>(data.count()));

    nn::Tensor batch;
    const std::size_t ps = data.images.plane_size();
    for (int first = 0; first < data.count(); first += batch_size) {
        const int count = std::min(batch_size, data.count() - first);
        batch.resize(count, 1, data.images.h, data.images.w);
        for (int b = 0; b < count; ++b)
            std::copy_n(data.images.plane(first + b, 0), ps, batch.plane(b, 0));
        const auto result = model.forward(batch);
        for (int b = 0; b < count; ++b) {
            Prediction p;
            p.slice_id = data.slice_ids[static_cast<std::size_t>(first + b)];
            for (std::size_t t = 0; t < targets.size(); ++t) {
                TargetMap tm;
                tm.target = targets[t];
                tm.map = ProbMap(data.images.h, data.images.w);
                const float* src = result.fused.plane(b, static_cast<int>(t));
                for (std::size_t i = 0; i < ps; ++i) tm.map.v[i] = src[i];
                p.channels.push_back(std::move(tm));
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

} // namespace ivuskit
