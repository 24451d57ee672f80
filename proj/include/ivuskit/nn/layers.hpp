#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ivuskit/nn/tensor.hpp"
#include "ivuskit/rng.hpp"

namespace ivuskit::nn {

// Handle into a layer's storage; the registry order is fixed per model so
// optimizer state and checkpoints stay aligned.
struct ParamRef {
    std::string name;
    std::vector<float>* values = nullptr;
    std::vector<float>* grads = nullptr; // null for non-trainable state (BN running stats)
};

namespace detail {

// dst[y][x] += a * src[y+dy][x+dx] over the in-bounds overlap. Both planes are
// h*w; with dy=dx=0 this is the plain saxpy of the 1x1 convolutions.
inline void axpy_shift(float* dst, const float* src, float a, int h, int w, int dy, int dx) {
    const int y0 = dy < 0 ? -dy : 0;
    const int y1 = dy > 0 ? h - dy : h;
    const int x0 = dx < 0 ? -dx : 0;
    const int x1 = dx > 0 ? w - dx : w;
    if (y1 <= y0 || x1 <= x0) return;
    const int span = x1 - x0;
    for (int y = y0; y < y1; ++y) {
        float* d = dst + static_cast<std::size_t>(y) * w + x0;
        const float* s = src + static_cast<std::size_t>(y + dy) * w + (x0 + dx);
        for (int x = 0; x < span; ++x) d[x] += a * s[x];
    }
}

// sum over overlap of a[y][x] * b[y+dy][x+dx]
inline double dot_shift(const float* a, const float* b, int h, int w, int dy, int dx) {
    const int y0 = dy < 0 ? -dy : 0;
    const int y1 = dy > 0 ? h - dy : h;
    const int x0 = dx < 0 ? -dx : 0;
    const int x1 = dx > 0 ? w - dx : w;
    double acc = 0.0;
    if (y1 <= y0 || x1 <= x0) return acc;
    const int span = x1 - x0;
    for (int y = y0; y < y1; ++y) {
        const float* pa = a + static_cast<std::size_t>(y) * w + x0;
        const float* pb = b + static_cast<std::size_t>(y + dy) * w + (x0 + dx);
        double row = 0.0;
        for (int x = 0; x < span; ++x) row += static_cast<double>(pa[x]) * pb[x];
        acc += row;
    }
    return acc;
}

// dst[x] += wl*src[x-1] + wc*src[x] + wr*src[x+1] over one row, edges clipped.
inline void row_tap3(float* dst, const float* src, float wl, float wc, float wr, int w) {
    if (w == 1) {
        dst[0] += wc * src[0];
        return;
    }
    dst[0] += wc * src[0] + wr * src[1];
    for (int x = 1; x < w - 1; ++x) dst[x] += wl * src[x - 1] + wc * src[x] + wr * src[x + 1];
    dst[w - 1] += wl * src[w - 2] + wc * src[w - 1];
}

// acc[0..2] += sum_x d[x]*s[x-1], d[x]*s[x], d[x]*s[x+1], edges clipped.
// Four explicit lanes per tap keep the reductions wide without changing the
// result across runs.
inline void row_dot3(const float* d, const float* s, int w, double* acc) {
    if (w == 1) {
        acc[1] += static_cast<double>(d[0]) * s[0];
        return;
    }
    float a0[4] = {0, 0, 0, 0}, a1[4] = {0, 0, 0, 0}, a2[4] = {0, 0, 0, 0};
    a1[0] += d[0] * s[0];
    a2[0] += d[0] * s[1];
    int x = 1;
    for (; x + 4 <= w - 1; x += 4)
        for (int l = 0; l < 4; ++l) {
            a0[l] += d[x + l] * s[x + l - 1];
            a1[l] += d[x + l] * s[x + l];
            a2[l] += d[x + l] * s[x + l + 1];
        }
    for (; x < w - 1; ++x) {
        a0[0] += d[x] * s[x - 1];
        a1[0] += d[x] * s[x];
        a2[0] += d[x] * s[x + 1];
    }
    a0[1] += d[w - 1] * s[w - 2];
    a1[1] += d[w - 1] * s[w - 1];
    acc[0] += static_cast<double>(a0[0] + a0[1]) + (a0[2] + a0[3]);
    acc[1] += static_cast<double>(a1[0] + a1[1]) + (a1[2] + a1[3]);
    acc[2] += static_cast<double>(a2[0] + a2[1]) + (a2[2] + a2[3]);
}

inline double plane_sum(const float* p, std::size_t count) {
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) acc += p[i];
    return acc;
}

inline void fill_plane(float* p, std::size_t count, float value) {
    std::fill(p, p + count, value);
}

} // namespace detail

// 3x3 convolution, stride 1, zero padding 1 (shape preserving).
class Conv3x3 {
public:
    Conv3x3() = default;
    Conv3x3(int cin, int cout) : cin_(cin), cout_(cout) {
        w_.assign(static_cast<std::size_t>(cout) * cin * 9, 0.0f);
        b_.assign(cout, 0.0f);
        gw_.assign(w_.size(), 0.0f);
        gb_.assign(b_.size(), 0.0f);
    }

    int cin() const { return cin_; }
    int cout() const { return cout_; }

    // He-style scaling over the receptive field feeding one output unit.
    void init(Rng& rng) {
        const double stddev = std::sqrt(2.0 / (9.0 * cin_));
        for (auto& x : w_) x = static_cast<float>(rng.normal() * stddev);
        std::fill(b_.begin(), b_.end(), 0.0f);
    }

    void forward(const Tensor& in, Tensor& out) const {
        out.resize(in.n, cout_, in.h, in.w);
        const int h = in.h, w = in.w;
        for (int ni = 0; ni < in.n; ++ni)
            for (int y = 0; y < h; ++y) {
                for (int co = 0; co < cout_; ++co)
                    detail::fill_plane(out.plane(ni, co) + static_cast<std::size_t>(y) * w,
                                       static_cast<std::size_t>(w), b_[co]);
                for (int ci = 0; ci < cin_; ++ci) {
                    const float* ip = in.plane(ni, ci);
                    for (int ky = -1; ky <= 1; ++ky) {
                        const int yy = y + ky;
                        if (yy < 0 || yy >= h) continue;
                        const float* srow = ip + static_cast<std::size_t>(yy) * w;
                        for (int co = 0; co < cout_; ++co) {
                            const float* t = kernel(co, ci) + (ky + 1) * 3;
                            detail::row_tap3(out.plane(ni, co) + static_cast<std::size_t>(y) * w,
                                             srow, t[0], t[1], t[2], w);
                        }
                    }
                }
            }
    }

    // Accumulates into din (caller zeroes) and into the weight grads.
    void backward(const Tensor& in, const Tensor& dout, Tensor* din) {
        const int h = in.h, w = in.w;
        const std::size_t ps = in.plane_size();
        for (int ni = 0; ni < in.n; ++ni) {
            for (int co = 0; co < cout_; ++co) {
                const float* dop = dout.plane(ni, co);
                gb_[co] += static_cast<float>(detail::plane_sum(dop, ps));
                for (int ci = 0; ci < cin_; ++ci) {
                    const float* ip = in.plane(ni, ci);
                    double acc[9] = {};
                    for (int y = 0; y < h; ++y) {
                        const float* drow = dop + static_cast<std::size_t>(y) * w;
                        for (int ky = -1; ky <= 1; ++ky) {
                            const int yy = y + ky;
                            if (yy < 0 || yy >= h) continue;
                            detail::row_dot3(drow, ip + static_cast<std::size_t>(yy) * w, w,
                                             acc + (ky + 1) * 3);
                        }
                    }
                    float* gwk = grad_kernel(co, ci);
                    for (int k = 0; k < 9; ++k) gwk[k] += static_cast<float>(acc[k]);
                }
            }
            if (din) {
                for (int y = 0; y < h; ++y)
                    for (int co = 0; co < cout_; ++co) {
                        const float* dop = dout.plane(ni, co);
                        for (int ky = -1; ky <= 1; ++ky) {
                            const int yy = y - ky;
                            if (yy < 0 || yy >= h) continue;
                            const float* srow = dop + static_cast<std::size_t>(yy) * w;
                            for (int ci = 0; ci < cin_; ++ci) {
                                const float* t = kernel(co, ci) + (ky + 1) * 3;
                                detail::row_tap3(
                                    din->plane(ni, ci) + static_cast<std::size_t>(y) * w, srow,
                                    t[2], t[1], t[0], w);
                            }
                        }
                    }
            }
        }
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + "/w", &w_, &gw_});
        out.push_back({prefix + "/b", &b_, &gb_});
    }

private:
    float* kernel(int co, int ci) { return w_.data() + (static_cast<std::size_t>(co) * cin_ + ci) * 9; }
    const float* kernel(int co, int ci) const {
        return w_.data() + (static_cast<std::size_t>(co) * cin_ + ci) * 9;
    }
    float* grad_kernel(int co, int ci) {
        return gw_.data() + (static_cast<std::size_t>(co) * cin_ + ci) * 9;
    }

    int cin_ = 0;
    int cout_ = 0;
    std::vector<float> w_, b_, gw_, gb_;
};

// 1x1 convolution (per-pixel linear map across channels).
class Conv1x1 {
public:
    Conv1x1() = default;
    Conv1x1(int cin, int cout) : cin_(cin), cout_(cout) {
        w_.assign(static_cast<std::size_t>(cout) * cin, 0.0f);
        b_.assign(cout, 0.0f);
        gw_.assign(w_.size(), 0.0f);
        gb_.assign(b_.size(), 0.0f);
    }

    void init(Rng& rng) {
        const double stddev = std::sqrt(2.0 / cin_);
        for (auto& x : w_) x = static_cast<float>(rng.normal() * stddev);
        std::fill(b_.begin(), b_.end(), 0.0f);
    }

    void forward(const Tensor& in, Tensor& out) const {
        out.resize(in.n, cout_, in.h, in.w);
        const std::size_t ps = in.plane_size();
        for (int ni = 0; ni < in.n; ++ni)
            for (int co = 0; co < cout_; ++co) {
                float* op = out.plane(ni, co);
                detail::fill_plane(op, ps, b_[co]);
                for (int ci = 0; ci < cin_; ++ci)
                    detail::axpy_shift(op, in.plane(ni, ci), w_[static_cast<std::size_t>(co) * cin_ + ci],
                                       in.h, in.w, 0, 0);
            }
    }

    void backward(const Tensor& in, const Tensor& dout, Tensor* din) {
        const std::size_t ps = in.plane_size();
        for (int ni = 0; ni < in.n; ++ni)
            for (int co = 0; co < cout_; ++co) {
                const float* dop = dout.plane(ni, co);
                gb_[co] += static_cast<float>(detail::plane_sum(dop, ps));
                for (int ci = 0; ci < cin_; ++ci) {
                    gw_[static_cast<std::size_t>(co) * cin_ + ci] += static_cast<float>(
                        detail::dot_shift(dop, in.plane(ni, ci), in.h, in.w, 0, 0));
                    if (din)
                        detail::axpy_shift(din->plane(ni, ci), dop,
                                           w_[static_cast<std::size_t>(co) * cin_ + ci], in.h, in.w, 0, 0);
                }
            }
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + "/w", &w_, &gw_});
        out.push_back({prefix + "/b", &b_, &gb_});
    }

private:
    int cin_ = 0;
    int cout_ = 0;
    std::vector<float> w_, b_, gw_, gb_;
};

// 2x2 transposed convolution with stride 2: doubles both spatial dimensions.
// out[co][2y+dy][2x+dx] = b[co] + sum_ci w[ci][co][dy][dx] * in[ci][y][x]
class TConv2x2 {
public:
    TConv2x2() = default;
    TConv2x2(int cin, int cout) : cin_(cin), cout_(cout) {
        w_.assign(static_cast<std::size_t>(cin) * cout * 4, 0.0f);
        b_.assign(cout, 0.0f);
        gw_.assign(w_.size(), 0.0f);
        gb_.assign(b_.size(), 0.0f);
    }

    void init(Rng& rng) {
        const double stddev = std::sqrt(2.0 / cin_);
        for (auto& x : w_) x = static_cast<float>(rng.normal() * stddev);
        std::fill(b_.begin(), b_.end(), 0.0f);
    }

    void forward(const Tensor& in, Tensor& out) const {
        const int oh = in.h * 2, ow = in.w * 2;
        out.resize(in.n, cout_, oh, ow);
        for (int ni = 0; ni < in.n; ++ni)
            for (int co = 0; co < cout_; ++co) {
                float* op = out.plane(ni, co);
                detail::fill_plane(op, out.plane_size(), b_[co]);
                for (int ci = 0; ci < cin_; ++ci) {
                    const float* ip = in.plane(ni, ci);
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const float wv = w_[idx(ci, co, dy, dx)];
                            for (int y = 0; y < in.h; ++y) {
                                float* orow = op + static_cast<std::size_t>(2 * y + dy) * ow + dx;
                                const float* irow = ip + static_cast<std::size_t>(y) * in.w;
                                for (int x = 0; x < in.w; ++x) orow[2 * x] += wv * irow[x];
                            }
                        }
                }
            }
    }

    void backward(const Tensor& in, const Tensor& dout, Tensor* din) {
        const int ow = in.w * 2;
        for (int ni = 0; ni < in.n; ++ni) {
            for (int co = 0; co < cout_; ++co) {
                const float* dop = dout.plane(ni, co);
                gb_[co] += static_cast<float>(detail::plane_sum(dop, dout.plane_size()));
                for (int ci = 0; ci < cin_; ++ci) {
                    const float* ip = in.plane(ni, ci);
                    float* dp = din ? din->plane(ni, ci) : nullptr;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const float wv = w_[idx(ci, co, dy, dx)];
                            double gacc = 0.0;
                            for (int y = 0; y < in.h; ++y) {
                                const float* drow = dop + static_cast<std::size_t>(2 * y + dy) * ow + dx;
                                const float* irow = ip + static_cast<std::size_t>(y) * in.w;
                                double row = 0.0;
                                if (dp) {
                                    float* dirow = dp + static_cast<std::size_t>(y) * in.w;
                                    for (int x = 0; x < in.w; ++x) {
                                        const float dv = drow[2 * x];
                                        row += static_cast<double>(dv) * irow[x];
                                        dirow[x] += wv * dv;
                                    }
                                } else {
                                    for (int x = 0; x < in.w; ++x)
                                        row += static_cast<double>(drow[2 * x]) * irow[x];
                                }
                                gacc += row;
                            }
                            gw_[idx(ci, co, dy, dx)] += static_cast<float>(gacc);
                        }
                }
            }
        }
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + "/w", &w_, &gw_});
        out.push_back({prefix + "/b", &b_, &gb_});
    }

private:
    std::size_t idx(int ci, int co, int dy, int dx) const {
        return ((static_cast<std::size_t>(ci) * cout_ + co) * 2 + dy) * 2 + dx;
    }

    int cin_ = 0;
    int cout_ = 0;
    std::vector<float> w_, b_, gw_, gb_;
};

// 2x2 max pooling with stride 2. Keeps the argmax (scan order (0,0),(0,1),
// (1,0),(1,1); first maximum on ties) so the backward pass routes gradients
// to exactly one source pixel.
class MaxPool2 {
public:
    void forward(const Tensor& in, Tensor& out, std::vector<std::uint8_t>& argmax) const {
        if (in.h % 2 != 0 || in.w % 2 != 0)
            throw ValidationError("max pooling requires even spatial dimensions");
        const int oh = in.h / 2, ow = in.w / 2;
        out.resize(in.n, in.c, oh, ow);
        argmax.assign(out.size(), 0);
        std::size_t k = 0;
        for (int ni = 0; ni < in.n; ++ni)
            for (int ci = 0; ci < in.c; ++ci) {
                const float* ip = in.plane(ni, ci);
                float* op = out.plane(ni, ci);
                for (int y = 0; y < oh; ++y)
                    for (int x = 0; x < ow; ++x, ++k) {
                        const float* base = ip + static_cast<std::size_t>(2 * y) * in.w + 2 * x;
                        float best = base[0];
                        std::uint8_t sel = 0;
                        const float cand1 = base[1];
                        if (cand1 > best) { best = cand1; sel = 1; }
                        const float cand2 = base[in.w];
                        if (cand2 > best) { best = cand2; sel = 2; }
                        const float cand3 = base[in.w + 1];
                        if (cand3 > best) { best = cand3; sel = 3; }
                        op[static_cast<std::size_t>(y) * ow + x] = best;
                        argmax[k] = sel;
                    }
            }
    }

    void backward(const Tensor& dout, const std::vector<std::uint8_t>& argmax, Tensor& din) const {
        const int ow = dout.w;
        std::size_t k = 0;
        for (int ni = 0; ni < dout.n; ++ni)
            for (int ci = 0; ci < dout.c; ++ci) {
                float* dp = din.plane(ni, ci);
                const float* dop = dout.plane(ni, ci);
                for (int y = 0; y < dout.h; ++y)
                    for (int x = 0; x < ow; ++x, ++k) {
                        const std::uint8_t sel = argmax[k];
                        const int dy = sel >> 1, dx = sel & 1;
                        dp[static_cast<std::size_t>(2 * y + dy) * din.w + (2 * x + dx)] +=
                            dop[static_cast<std::size_t>(y) * ow + x];
                    }
            }
    }
};

// Per-channel batch normalization. Training mode normalizes by batch
// statistics over N*H*W and refreshes running estimates; eval mode uses the
// running estimates only, so eval outputs are independent across the batch.
class BatchNorm {
public:
    BatchNorm() = default;
    explicit BatchNorm(int channels)
        : c_(channels),
          gamma_(channels, 1.0f),
          beta_(channels, 0.0f),
          ggamma_(channels, 0.0f),
          gbeta_(channels, 0.0f),
          run_mean_(channels, 0.0f),
          run_var_(channels, 1.0f),
          mu_(channels, 0.0),
          inv_(channels, 0.0) {}

    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.1;

    // Normalizes by batch statistics over N*H*W, refreshes the running
    // estimates, and keeps the batch stats for backward.
    void forward_train(const Tensor& in, Tensor& out) {
        out.resize(in.n, in.c, in.h, in.w);
        const std::size_t ps = in.plane_size();
        const double m = static_cast<double>(in.n) * ps;
        if (m < 2) throw ValidationError("batch statistics require at least two values");
        for (int ci = 0; ci < c_; ++ci) {
            double s = 0.0, s2 = 0.0;
            for (int ni = 0; ni < in.n; ++ni) {
                const float* p = in.plane(ni, ci);
                for (std::size_t i = 0; i < ps; ++i) {
                    const double x = p[i];
                    s += x;
                    s2 += x * x;
                }
            }
            const double mean = s / m;
            double var = s2 / m - mean * mean;
            if (var < 0.0) var = 0.0;
            run_mean_[ci] = static_cast<float>((1.0 - kMomentum) * run_mean_[ci] + kMomentum * mean);
            run_var_[ci] = static_cast<float>((1.0 - kMomentum) * run_var_[ci] +
                                              kMomentum * var * m / (m - 1.0));
            mu_[ci] = mean;
            inv_[ci] = 1.0 / std::sqrt(var + kEps);
            apply(in, out, ci, mean, var);
        }
    }

    // Uses running estimates only; per-sample outputs are independent.
    void forward_eval(const Tensor& in, Tensor& out) const {
        out.resize(in.n, in.c, in.h, in.w);
        for (int ci = 0; ci < c_; ++ci) apply(in, out, ci, run_mean_[ci], run_var_[ci]);
    }

    // Training-mode backward using the saved batch statistics.
    void backward(const Tensor& in, const Tensor& dout, Tensor* din) {
        const std::size_t ps = in.plane_size();
        const double m = static_cast<double>(in.n) * ps;
        for (int ci = 0; ci < c_; ++ci) {
            const double mu = mu_[ci];
            const double inv = inv_[ci];
            double s1 = 0.0, s2 = 0.0; // sum(dout), sum(dout * xhat)
            for (int ni = 0; ni < in.n; ++ni) {
                const float* dp = dout.plane(ni, ci);
                const float* xp = in.plane(ni, ci);
                for (std::size_t i = 0; i < ps; ++i) {
                    const double d = dp[i];
                    s1 += d;
                    s2 += d * (static_cast<double>(xp[i]) - mu) * inv;
                }
            }
            ggamma_[ci] += static_cast<float>(s2);
            gbeta_[ci] += static_cast<float>(s1);
            if (din) {
                const double g = gamma_[ci];
                const double a = g * inv;
                const double c1 = s1 / m;
                const double c2 = s2 / m;
                for (int ni = 0; ni < in.n; ++ni) {
                    const float* dp = dout.plane(ni, ci);
                    const float* xp = in.plane(ni, ci);
                    float* dip = din->plane(ni, ci);
                    for (std::size_t i = 0; i < ps; ++i) {
                        const double xhat = (static_cast<double>(xp[i]) - mu) * inv;
                        dip[i] += static_cast<float>(a * (dp[i] - c1 - xhat * c2));
                    }
                }
            }
        }
    }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + "/gamma", &gamma_, &ggamma_});
        out.push_back({prefix + "/beta", &beta_, &gbeta_});
    }

    void collect_state(const std::string& prefix, std::vector<ParamRef>& out) {
        out.push_back({prefix + "/run_mean", &run_mean_, nullptr});
        out.push_back({prefix + "/run_var", &run_var_, nullptr});
    }

private:
    void apply(const Tensor& in, Tensor& out, int ci, double mean, double var) const {
        const std::size_t ps = in.plane_size();
        const double inv = 1.0 / std::sqrt(var + kEps);
        const float scale = static_cast<float>(gamma_[ci] * inv);
        const float shift = static_cast<float>(beta_[ci] - mean * gamma_[ci] * inv);
        for (int ni = 0; ni < in.n; ++ni) {
            const float* p = in.plane(ni, ci);
            float* q = out.plane(ni, ci);
            for (std::size_t i = 0; i < ps; ++i) q[i] = scale * p[i] + shift;
        }
    }

    int c_ = 0;
    std::vector<float> gamma_, beta_, ggamma_, gbeta_;
    std::vector<float> run_mean_, run_var_;
    std::vector<double> mu_, inv_; // batch stats saved by the last training forward
};

inline void relu_forward(const Tensor& in, Tensor& out) {
    out.resize(in.n, in.c, in.h, in.w);
    for (std::size_t i = 0; i < in.size(); ++i) out.v[i] = in.v[i] > 0.0f ? in.v[i] : 0.0f;
}

// din += dout where the forward output was positive. Safe to key on the
// output: relu(x) > 0 exactly when x > 0.
inline void relu_backward(const Tensor& out, const Tensor& dout, Tensor& din) {
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out.v[i] > 0.0f) din.v[i] += dout.v[i];
}

inline float sigmoid_scalar(float x) {
    if (x >= 0.0f) {
        const float e = std::exp(-x);
        return 1.0f / (1.0f + e);
    }
    const float e = std::exp(x);
    return e / (1.0f + e);
}

inline void sigmoid_forward(const Tensor& in, Tensor& out) {
    out.resize(in.n, in.c, in.h, in.w);
    for (std::size_t i = 0; i < in.size(); ++i) out.v[i] = sigmoid_scalar(in.v[i]);
}

} // namespace ivuskit::nn
