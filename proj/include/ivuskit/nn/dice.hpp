#pragma once

#include <cstddef>

namespace ivuskit::nn {

// Global soft Dice loss over a flat plane:
//   1 - (2*sum(p*t) + eps) / (sum(p) + sum(t) + eps)
// Sums run in double regardless of element type. When grad is non-null the
// analytic d(loss)/d(pred_k) is written there:
//   -(2*t_k*D - N) / D^2   with  N = 2*sum(p*t)+eps, D = sum(p)+sum(t)+eps.
template <typename P, typename T, typename G = double>
inline double soft_dice(const P* pred, const T* truth, std::size_t count, double eps,
                        G* grad = nullptr) {
    double sp = 0.0, st = 0.0, si = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        const double p = static_cast<double>(pred[k]);
        const double t = static_cast<double>(truth[k]);
        sp += p;
        st += t;
        si += p * t;
    }
    const double num = 2.0 * si + eps;
    const double den = sp + st + eps;
    if (grad) {
        const double inv_den2 = 1.0 / (den * den);
        for (std::size_t k = 0; k < count; ++k)
            grad[k] = static_cast<G>(-(2.0 * static_cast<double>(truth[k]) * den - num) * inv_den2);
    }
    return 1.0 - num / den;
}

} // namespace ivuskit::nn
