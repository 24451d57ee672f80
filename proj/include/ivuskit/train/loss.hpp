#pragma once

#include <vector>

#include "ivuskit/grid.hpp"
#include "ivuskit/model/network.hpp"
#include "ivuskit/nn/dice.hpp"

namespace ivuskit {

constexpr double kDefaultSmoothEps = 1e-6;

// Global soft Dice loss between a probability map and a binary mask.
inline double dice_loss(const ProbMap& pred, const BinaryMask& truth,
                        double eps = kDefaultSmoothEps) {
    require_same_shape(pred.height, pred.width, truth.height(), truth.width(), "dice_loss");
    if (pred.empty()) throw ValidationError("dice_loss on empty map");
    return nn::soft_dice(pred.v.data(), truth.values.v.data(), pred.size(), eps);
}

// Analytic gradient d(dice_loss)/d(pred) as a grid.
inline Grid2D<double> dice_loss_grad(const ProbMap& pred, const BinaryMask& truth,
                                     double eps = kDefaultSmoothEps) {
    require_same_shape(pred.height, pred.width, truth.height(), truth.width(), "dice_loss");
    Grid2D<double> g(pred.height, pred.width);
    nn::soft_dice(pred.v.data(), truth.values.v.data(), pred.size(), eps, g.v.data());
    return g;
}

// Equal-weight mean of the per-head Dice terms and the fused-map Dice term:
//   (sum over heads,targets + sum over targets) / (H*T + T).
// heads[h][t] pairs with fused[t] and truth[t].
inline double supervised_loss(const std::vector<std::vector<ProbMap>>& heads,
                              const std::vector<ProbMap>& fused,
                              const std::vector<BinaryMask>& truth,
                              double eps = kDefaultSmoothEps) {
    if (heads.empty()) throw ValidationError("supervised_loss needs at least one head");
    const std::size_t T = truth.size();
    if (T == 0 || fused.size() != T)
        throw ValidationError("supervised_loss target counts do not match");
    double sum = 0.0;
    for (const auto& head : heads) {
        if (head.size() != T) throw ValidationError("supervised_loss target counts do not match");
        for (std::size_t t = 0; t < T; ++t) sum += dice_loss(head[t], truth[t], eps);
    }
    for (std::size_t t = 0; t < T; ++t) sum += dice_loss(fused[t], truth[t], eps);
    return sum / static_cast<double>(heads.size() * T + T);
}

// Same combination over a forward result, averaged across the batch; used for
// validation scoring.
inline double supervised_loss_batch(const NestedUNet::ForwardResult& r, const nn::Tensor& truth,
                                    double eps) {
    const int N = r.fused.n, T = r.fused.c;
    nn::require_shape(truth, N, T, r.fused.h, r.fused.w, "supervision truth");
    const std::size_t ps = r.fused.plane_size();
    const std::size_t L = r.heads.size();
    double sum = 0.0;
    for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t) {
            for (const auto& head : r.heads)
                sum += nn::soft_dice(head.plane(n, t), truth.plane(n, t), ps, eps);
            sum += nn::soft_dice(r.fused.plane(n, t), truth.plane(n, t), ps, eps);
        }
    return sum / (static_cast<double>(N) * (static_cast<double>(L) * T + T));
}

} // namespace ivuskit
