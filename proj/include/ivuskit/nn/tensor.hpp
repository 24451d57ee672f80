#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ivuskit/error.hpp"

namespace ivuskit::nn {

// Dense NCHW float tensor. All layer code indexes planes directly, so the
// layout is part of the contract.
struct Tensor {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_) { resize(n_, c_, h_, w_); }

    void resize(int n_, int c_, int h_, int w_) {
        if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
            throw ValidationError("tensor dimensions must be non-negative");
        n = n_;
        c = c_;
        h = h_;
        w = w_;
        v.assign(static_cast<std::size_t>(n) * c * h * w, 0.0f);
    }

    std::size_t size() const { return v.size(); }
    std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }

    float* plane(int ni, int ci) {
        return v.data() + (static_cast<std::size_t>(ni) * c + ci) * plane_size();
    }
    const float* plane(int ni, int ci) const {
        return v.data() + (static_cast<std::size_t>(ni) * c + ci) * plane_size();
    }

    float& at(int ni, int ci, int y, int x) {
        return plane(ni, ci)[static_cast<std::size_t>(y) * w + x];
    }
    float at(int ni, int ci, int y, int x) const {
        return plane(ni, ci)[static_cast<std::size_t>(y) * w + x];
    }

    void zero() { std::fill(v.begin(), v.end(), 0.0f); }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

inline void require_shape(const Tensor& t, int n, int c, int h, int w, const char* what) {
    if (t.n != n || t.c != c || t.h != h || t.w != w)
        throw ValidationError(std::string("unexpected tensor shape for ") + what);
}

} // namespace ivuskit::nn
