#pragma once

#include <cmath>
#include <vector>

#include "ivuskit/error.hpp"
#include "ivuskit/nn/layers.hpp"

namespace ivuskit {

// Per-parameter RMS-scaled gradient descent:
//   v <- rho*v + (1-rho)*g^2
//   p <- p - lr * g / (sqrt(v) + eps)
class RmsProp {
public:
    RmsProp(double lr, double rho = 0.9, double eps = 1e-8) : lr_(lr), rho_(rho), eps_(eps) {
        if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
        if (!(rho > 0.0 && rho < 1.0)) throw ValidationError("decay must lie in (0,1)");
        if (!(eps > 0.0)) throw ValidationError("epsilon must be positive");
    }

    void attach(std::vector<nn::ParamRef> params) {
        params_ = std::move(params);
        v_.clear();
        v_.reserve(params_.size());
        for (const auto& p : params_) v_.emplace_back(p.values->size(), 0.0f);
    }

    void step() {
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& w = *params_[k].values;
            const auto& g = *params_[k].grads;
            auto& v = v_[k];
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double gi = g[i];
                const double vi = rho_ * v[i] + (1.0 - rho_) * gi * gi;
                v[i] = static_cast<float>(vi);
                w[i] = static_cast<float>(w[i] - lr_ * gi / (std::sqrt(vi) + eps_));
            }
        }
    }

private:
    double lr_, rho_, eps_;
    std::vector<nn::ParamRef> params_;
    std::vector<std::vector<float>> v_;
};

} // namespace ivuskit
