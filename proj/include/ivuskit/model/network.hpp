#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "ivuskit/model/config.hpp"
#include "ivuskit/nn/dice.hpp"
#include "ivuskit/nn/layers.hpp"
#include "ivuskit/nn/tensor.hpp"
#include "ivuskit/rng.hpp"

namespace ivuskit {

enum class InputKind { Image, Direct, Transpose, Pool };

struct NodeInput {
    InputKind kind;
    int i = -1; // source node, unset for Image
    int j = -1;
};

struct NodeSpec {
    int i = 0;
    int j = 0;
    std::vector<NodeInput> inputs;
};

// Pixelwise arithmetic mean of head probability maps; permutation-invariant.
inline nn::Tensor fuse_heads(const std::vector<nn::Tensor>& heads) {
    if (heads.empty()) throw ValidationError("fuse_heads needs at least one head");
    for (const auto& h : heads)
        if (!h.same_shape(heads.front()))
            throw ValidationError("fuse_heads requires identically shaped heads");
    nn::Tensor out(heads.front().n, heads.front().c, heads.front().h, heads.front().w);
    for (const auto& h : heads)
        for (std::size_t k = 0; k < out.size(); ++k) out.v[k] += h.v[k];
    const float inv = 1.0f / static_cast<float>(heads.size());
    for (auto& v : out.v) v *= inv;
    return out;
}

// Nested grid of convolution blocks with dense skip pathways. Node (i,j)
// exists for i+j <= depth and fuses {F(i,0..j-1), Tr(F(i+1,j-1))}; the
// backbone column (i,0) down-samples by 2x2 max pooling. Each block is two
// (3x3 conv -> batch norm -> ReLU) stages. Supervision heads read nodes
// (0,1)..(0,depth) through a 1x1 conv + sigmoid; since row 0 is already at
// input resolution the resize step is the identity here. The fused output is
// the mean of all heads.
class NestedUNet {
public:
    struct ForwardResult {
        std::vector<nn::Tensor> heads; // per head: (N, targets, H, W), post-sigmoid
        nn::Tensor fused;              // (N, targets, H, W)
    };

    explicit NestedUNet(ModelConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build();
        init_parameters();
    }

    // Parameter handles point into the node storage; moving a vector keeps its
    // elements in place, copying would not.
    NestedUNet(const NestedUNet&) = delete;
    NestedUNet& operator=(const NestedUNet&) = delete;
    NestedUNet(NestedUNet&&) = default;
    NestedUNet& operator=(NestedUNet&&) = default;

    const ModelConfig& config() const { return cfg_; }
    const std::vector<NodeSpec>& node_specs() const { return specs_; }
    int node_count() const { return static_cast<int>(nodes_.size()); }

    // Inference path: batch-independent (eval-mode batch norm), safe to call
    // concurrently on a shared model.
    ForwardResult forward(const nn::Tensor& input) const {
        check_input(input);
        Workspace ws;
        // Eval mode never touches layer state; see run_forward.
        const_cast<NestedUNet*>(this)->run_forward(input, ws, false);
        ForwardResult r;
        r.heads = std::move(ws.head_s);
        r.fused = std::move(ws.fused);
        return r;
    }

    // Training path: batch-statistics batch norm, keeps activations for
    // backward_supervised. Requires exclusive access.
    ForwardResult forward_training(const nn::Tensor& input) {
        check_input(input);
        run_forward(input, ws_, true);
        ws_valid_ = true;
        ForwardResult r;
        r.heads = ws_.head_s;
        r.fused = ws_.fused;
        return r;
    }

    void zero_grad() {
        for (auto& p : params_)
            if (p.grads) std::fill(p.grads->begin(), p.grads->end(), 0.0f);
    }

    // Pyramid-supervised loss of the last training batch:
    //   mean over samples of
    //     (sum over heads,targets dice + sum over targets dice(fused)) / (H*T + T)
    // Accumulates parameter gradients; returns the loss value.
    double backward_supervised(const nn::Tensor& truth, double smooth_eps) {
        if (!ws_valid_) throw ValidationError("backward requires a prior training forward pass");
        const int N = ws_.fused.n, T = cfg_.target_count();
        const int L = cfg_.depth;
        nn::require_shape(truth, N, T, cfg_.input_h, cfg_.input_w, "supervision truth");

        const std::size_t ps = ws_.fused.plane_size();
        const double coef = 1.0 / (static_cast<double>(N) * (static_cast<double>(L) * T + T));
        double loss_sum = 0.0;

        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            const nn::Tensor& f = ws_.nodes[k].f;
            ws_.nodes[k].df.resize(f.n, f.c, f.h, f.w);
        }

        // dice gradient of the fused map, shared across heads via the mean
        nn::Tensor dfused(N, T, cfg_.input_h, cfg_.input_w);
        for (int n = 0; n < N; ++n)
            for (int t = 0; t < T; ++t)
                loss_sum += nn::soft_dice(ws_.fused.plane(n, t), truth.plane(n, t), ps, smooth_eps,
                                          dfused.plane(n, t));

        nn::Tensor dz;
        std::vector<double> dhead(ps);
        for (int h = 1; h <= L; ++h) {
            const nn::Tensor& s = ws_.head_s[static_cast<std::size_t>(h - 1)];
            dz.resize(N, T, cfg_.input_h, cfg_.input_w);
            for (int n = 0; n < N; ++n)
                for (int t = 0; t < T; ++t) {
                    const float* sp = s.plane(n, t);
                    const float* dfp = dfused.plane(n, t);
                    float* dzp = dz.plane(n, t);
                    loss_sum += nn::soft_dice(sp, truth.plane(n, t), ps, smooth_eps, dhead.data());
                    for (std::size_t k = 0; k < ps; ++k) {
                        const double ds = coef * (dhead[k] + static_cast<double>(dfp[k]) / L);
                        const double sv = sp[k];
                        dzp[k] = static_cast<float>(ds * sv * (1.0 - sv));
                    }
                }
            heads_[static_cast<std::size_t>(h - 1)].backward(
                ws_.nodes[static_cast<std::size_t>(id(0, h))].f, dz,
                &ws_.nodes[static_cast<std::size_t>(id(0, h))].df);
        }

        backward_nodes();
        return loss_sum * coef;
    }

    std::vector<nn::ParamRef> parameters() { return params_; }
    std::vector<nn::ParamRef> state_buffers() { return state_; }

    // Named-tensor hook; also the entry point for externally supplied encoder
    // weights (backbone column parameters are "node{i}_0/...").
    void set_parameter(const std::string& name, const std::vector<float>& values) {
        for (auto& p : params_)
            if (p.name == name) {
                if (p.values->size() != values.size())
                    throw ValidationError("size mismatch for parameter " + name);
                *p.values = values;
                return;
            }
        for (auto& p : state_)
            if (p.name == name) {
                if (p.values->size() != values.size())
                    throw ValidationError("size mismatch for state " + name);
                *p.values = values;
                return;
            }
        throw ValidationError("unknown parameter " + name);
    }

private:
    struct Node {
        int i = 0, j = 0;
        int cin = 0;
        nn::TConv2x2 up; // j > 0 only
        nn::Conv3x3 conv1, conv2;
        nn::BatchNorm bn1, bn2;
    };

    struct NodeWs {
        nn::Tensor x;  // fused block input
        nn::Tensor c1; // conv1 output (batch norm input)
        nn::Tensor r1; // first stage output
        nn::Tensor c2; // conv2 output
        nn::Tensor f;  // block output
        nn::Tensor up_out;
        nn::Tensor df; // dL/df, accumulated from consumers
        std::vector<std::uint8_t> pool_idx;
    };

    struct Workspace {
        std::vector<NodeWs> nodes;
        std::vector<nn::Tensor> head_s;
        nn::Tensor fused;
        nn::Tensor scratch;
    };

    void build() {
        const int L = cfg_.depth;
        idx_.assign(static_cast<std::size_t>(L + 1), std::vector<int>(static_cast<std::size_t>(L + 1), -1));
        // Column-major over j so every dependency (same row lower j, deeper
        // row lower j, backbone row above) is already built.
        std::vector<std::pair<int, int>> order;
        for (int j = 0; j <= L; ++j)
            for (int i = 0; i + j <= L; ++i) order.emplace_back(i, j);

        nodes_.reserve(order.size());
        specs_.reserve(order.size());
        for (auto [i, j] : order) {
            Node nd;
            nd.i = i;
            nd.j = j;
            const int ch = cfg_.channels_at(i);
            NodeSpec spec;
            spec.i = i;
            spec.j = j;
            if (j == 0) {
                if (i == 0) {
                    nd.cin = 1;
                    spec.inputs.push_back({InputKind::Image, -1, -1});
                } else {
                    nd.cin = cfg_.channels_at(i - 1);
                    spec.inputs.push_back({InputKind::Pool, i - 1, 0});
                }
            } else {
                for (int q = 0; q < j; ++q) spec.inputs.push_back({InputKind::Direct, i, q});
                spec.inputs.push_back({InputKind::Transpose, i + 1, j - 1});
                nd.cin = cfg_.fusion_mode == FusionMode::Concat ? (j + 1) * ch : ch;
                nd.up = nn::TConv2x2(cfg_.channels_at(i + 1), ch);
            }
            nd.conv1 = nn::Conv3x3(nd.cin, ch);
            nd.conv2 = nn::Conv3x3(ch, ch);
            nd.bn1 = nn::BatchNorm(ch);
            nd.bn2 = nn::BatchNorm(ch);
            idx_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                static_cast<int>(nodes_.size());
            nodes_.push_back(std::move(nd));
            specs_.push_back(std::move(spec));
        }

        heads_.reserve(static_cast<std::size_t>(L));
        for (int h = 1; h <= L; ++h)
            heads_.emplace_back(cfg_.base_channels, cfg_.target_count());

        for (auto& nd : nodes_) {
            const std::string p = node_prefix(nd.i, nd.j);
            if (nd.j > 0) nd.up.collect(p + "/up", params_);
            nd.conv1.collect(p + "/conv1", params_);
            nd.bn1.collect(p + "/bn1", params_);
            nd.conv2.collect(p + "/conv2", params_);
            nd.bn2.collect(p + "/bn2", params_);
            nd.bn1.collect_state(p + "/bn1", state_);
            nd.bn2.collect_state(p + "/bn2", state_);
        }
        for (int h = 1; h <= L; ++h)
            heads_[static_cast<std::size_t>(h - 1)].collect("head" + std::to_string(h), params_);
    }

    void init_parameters() {
        Rng rng(cfg_.init_seed);
        for (auto& nd : nodes_) {
            if (nd.j > 0) nd.up.init(rng);
            nd.conv1.init(rng);
            nd.conv2.init(rng);
        }
        for (auto& hd : heads_) hd.init(rng);
    }

    static std::string node_prefix(int i, int j) {
        return "node" + std::to_string(i) + "_" + std::to_string(j);
    }

    int id(int i, int j) const { return idx_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }

    void check_input(const nn::Tensor& input) const {
        if (input.n < 1) throw ValidationError("empty batch");
        if (input.c != 1 || input.h != cfg_.input_h || input.w != cfg_.input_w)
            throw ValidationError("input tensor does not match configured input size");
    }

    // training=true is only reachable from the non-const entry point; the
    // const_cast in forward() never mutates layer state because every eval
    // call stays on the const forward_eval path.
    void run_forward(const nn::Tensor& input, Workspace& ws, bool training) {
        const int L = cfg_.depth;
        ws.nodes.resize(nodes_.size());
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            Node& nd = nodes_[k];
            NodeWs& nw = ws.nodes[k];
            if (nd.j == 0) {
                if (nd.i == 0) {
                    nw.x = input;
                } else {
                    pool_.forward(ws.nodes[static_cast<std::size_t>(id(nd.i - 1, 0))].f, nw.x,
                                  nw.pool_idx);
                }
            } else {
                const nn::Tensor& below = ws.nodes[static_cast<std::size_t>(id(nd.i + 1, nd.j - 1))].f;
                nd.up.forward(below, nw.up_out);
                gather_inputs(nd, ws, nw);
            }
            nd.conv1.forward(nw.x, nw.c1);
            if (training)
                nd.bn1.forward_train(nw.c1, ws.scratch);
            else
                nd.bn1.forward_eval(nw.c1, ws.scratch);
            nn::relu_forward(ws.scratch, nw.r1);
            nd.conv2.forward(nw.r1, nw.c2);
            if (training)
                nd.bn2.forward_train(nw.c2, ws.scratch);
            else
                nd.bn2.forward_eval(nw.c2, ws.scratch);
            nn::relu_forward(ws.scratch, nw.f);
        }

        ws.head_s.resize(static_cast<std::size_t>(L));
        for (int h = 1; h <= L; ++h) {
            heads_[static_cast<std::size_t>(h - 1)].forward(
                ws.nodes[static_cast<std::size_t>(id(0, h))].f, ws.scratch);
            nn::sigmoid_forward(ws.scratch, ws.head_s[static_cast<std::size_t>(h - 1)]);
        }
        ws.fused = fuse_heads(ws.head_s);
    }

    void gather_inputs(const Node& nd, Workspace& ws, NodeWs& nw) const {
        const int ch = cfg_.channels_at(nd.i);
        const int N = nw.up_out.n, H = nw.up_out.h, W = nw.up_out.w;
        const std::size_t ps = nw.up_out.plane_size();
        if (cfg_.fusion_mode == FusionMode::Concat) {
            nw.x.resize(N, (nd.j + 1) * ch, H, W);
            for (int n = 0; n < N; ++n) {
                int co = 0;
                for (int q = 0; q < nd.j; ++q) {
                    const nn::Tensor& src = ws.nodes[static_cast<std::size_t>(id(nd.i, q))].f;
                    for (int c = 0; c < ch; ++c, ++co)
                        std::memcpy(nw.x.plane(n, co), src.plane(n, c), ps * sizeof(float));
                }
                for (int c = 0; c < ch; ++c, ++co)
                    std::memcpy(nw.x.plane(n, co), nw.up_out.plane(n, c), ps * sizeof(float));
            }
        } else {
            nw.x = nw.up_out;
            for (int q = 0; q < nd.j; ++q) {
                const nn::Tensor& src = ws.nodes[static_cast<std::size_t>(id(nd.i, q))].f;
                for (std::size_t k = 0; k < nw.x.size(); ++k) nw.x.v[k] += src.v[k];
            }
        }
    }

    void backward_nodes() {
        for (std::size_t rk = nodes_.size(); rk-- > 0;) {
            Node& nd = nodes_[rk];
            NodeWs& nw = ws_.nodes[rk];
            nn::Tensor db2(nw.f.n, nw.f.c, nw.f.h, nw.f.w);
            nn::relu_backward(nw.f, nw.df, db2);
            nn::Tensor dc2(db2.n, db2.c, db2.h, db2.w);
            nd.bn2.backward(nw.c2, db2, &dc2);
            nn::Tensor dr1(nw.r1.n, nw.r1.c, nw.r1.h, nw.r1.w);
            nd.conv2.backward(nw.r1, dc2, &dr1);
            nn::Tensor db1(dr1.n, dr1.c, dr1.h, dr1.w);
            nn::relu_backward(nw.r1, dr1, db1);
            nn::Tensor dc1(db1.n, db1.c, db1.h, db1.w);
            nd.bn1.backward(nw.c1, db1, &dc1);
            const bool need_dx = !(nd.i == 0 && nd.j == 0);
            nn::Tensor dx;
            if (need_dx) dx.resize(nw.x.n, nw.x.c, nw.x.h, nw.x.w);
            nd.conv1.backward(nw.x, dc1, need_dx ? &dx : nullptr);
            if (!need_dx) continue;

            if (nd.j == 0) {
                pool_.backward(dx, nw.pool_idx,
                               ws_.nodes[static_cast<std::size_t>(id(nd.i - 1, 0))].df);
                continue;
            }

            const int ch = cfg_.channels_at(nd.i);
            const std::size_t ps = nw.up_out.plane_size();
            nn::Tensor dup(dx.n, ch, dx.h, dx.w);
            if (cfg_.fusion_mode == FusionMode::Concat) {
                for (int n = 0; n < dx.n; ++n) {
                    int co = 0;
                    for (int q = 0; q < nd.j; ++q) {
                        nn::Tensor& dst = ws_.nodes[static_cast<std::size_t>(id(nd.i, q))].df;
                        for (int c = 0; c < ch; ++c, ++co) {
                            float* d = dst.plane(n, c);
                            const float* s = dx.plane(n, co);
                            for (std::size_t k = 0; k < ps; ++k) d[k] += s[k];
                        }
                    }
                    for (int c = 0; c < ch; ++c, ++co)
                        std::memcpy(dup.plane(n, c), dx.plane(n, co), ps * sizeof(float));
                }
            } else {
                dup = dx;
                for (int q = 0; q < nd.j; ++q) {
                    nn::Tensor& dst = ws_.nodes[static_cast<std::size_t>(id(nd.i, q))].df;
                    for (std::size_t k = 0; k < dst.size(); ++k) dst.v[k] += dx.v[k];
                }
            }
            nd.up.backward(ws_.nodes[static_cast<std::size_t>(id(nd.i + 1, nd.j - 1))].f, dup,
                           &ws_.nodes[static_cast<std::size_t>(id(nd.i + 1, nd.j - 1))].df);
        }
    }

    ModelConfig cfg_;
    std::vector<Node> nodes_;
    std::vector<NodeSpec> specs_;
    std::vector<std::vector<int>> idx_;
    std::vector<nn::Conv1x1> heads_;
    nn::MaxPool2 pool_;
    std::vector<nn::ParamRef> params_;
    std::vector<nn::ParamRef> state_;
    Workspace ws_;
    bool ws_valid_ = false;
};

} // namespace ivuskit
