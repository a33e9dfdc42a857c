#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "pptformer/tensor.hpp"

namespace ppt::ag {

class Tape;

struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    // Receives this node's accumulated gradient and pushes it to parents.
    std::function<void(Tape&, const Tensor&)> backward;

    bool wants_grad() const { return requires_grad || (bool)backward; }
    Tensor& grad_buf() {
        if (grad.empty()) grad = Tensor(value.shape());
        return grad;
    }
};

// Handle into a Tape-owned node.
class Var {
public:
    Var() = default;
    Var(Tape* tape, size_t idx) : tape_(tape), idx_(idx) {}
    const Tensor& value() const;
    const Tensor& grad() const;
    bool valid() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    size_t index() const { return idx_; }
    Node& node() const;

private:
    Tape* tape_ = nullptr;
    size_t idx_ = 0;
};

// Records ops in creation order; backward() replays them in reverse. One tape
// per forward pass; parameters enter as leaves each pass.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    Var leaf(Tensor value, bool requires_grad = false) {
        nodes_.push_back(Node{std::move(value), {}, requires_grad && grad_enabled_, nullptr});
        return Var(this, nodes_.size() - 1);
    }

    Var make(Tensor value, std::function<void(Tape&, const Tensor&)> bw) {
        nodes_.push_back(Node{std::move(value), {}, false,
                              grad_enabled_ ? std::move(bw) : nullptr});
        return Var(this, nodes_.size() - 1);
    }

    Node& node(size_t i) { return nodes_[i]; }
    const Node& node(size_t i) const { return nodes_[i]; }

    void accumulate(const Var& v, const Tensor& g) {
        Node& n = nodes_[v.index()];
        if (!n.wants_grad()) return;
        Tensor& gb = n.grad_buf();
        for (long long i = 0; i < g.size(); ++i) gb[i] += g[i];
    }

    // Seeds the scalar output with gradient 1 and runs all recorded backward
    // closures in reverse order.
    void backward(const Var& out) {
        if (!grad_enabled_) throw StateError("backward on a grad-disabled tape");
        Node& o = nodes_[out.index()];
        if (o.value.size() != 1) throw ShapeError("backward: output must be scalar");
        o.grad_buf()[0] += 1.0;
        for (size_t i = nodes_.size(); i-- > 0;) {
            Node& n = nodes_[i];
            if (n.backward && !n.grad.empty()) n.backward(*this, n.grad);
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    std::deque<Node> nodes_;
    bool grad_enabled_;
};

inline Node& Var::node() const { return tape_->node(idx_); }
inline const Tensor& Var::value() const { return tape_->node(idx_).value; }
inline const Tensor& Var::grad() const { return tape_->node(idx_).grad; }

// ---- differentiable ops ----

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                  // elementwise
Var scale(Var a, double c);
Var matmul(Var a, Var b);               // (M,K)x(K,N)
Var matmul_nt(Var a, Var b);            // (M,K)x(N,K)^T
Var softmax_rows(Var m);
Var sigmoid(Var x);
Var tanh_op(Var x);
Var conv2d_same(Var input, Var kernel, int stride);
Var depthwise_conv2d_fixed(Var input, const Tensor& kernel);  // constant kernel
Var decimate2(Var x);
Var zero_upsample2(Var x, int ho, int wo);
Var bilinear_resize(Var x, int ho, int wo);
Var avgpool_blocks(Var x, int ho, int wo);
Var concat_channels(const std::vector<Var>& xs);
Var channel_group_mean(Var x, int groups);
Var l2_normalize_channels(Var x, double eps = 1e-12);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-6);  // x rank-2, per row
Var linear(Var x, Var w, Var b);        // (N,C)x(C,M)+b
Var add_channel_bias(Var x, Var b);     // (H,W,C) + (C)
Var reshape(Var x, std::vector<int> shape);
Var sum(Var x);                         // scalar
Var mean(Var x);                        // scalar
Var sum_sq_diff(Var a, Var b);          // scalar sum((a-b)^2)
Var sqrt_scalar(Var x, double eps = 0.0);
Var add_scalars(Var a, Var b);
Var affine_scalar(Var s, double a, double b);  // a + b*s
Var broadcast_mul(Var x, Var s);        // tensor * scalar var
// Mean cross-entropy over pixels; labels (H,W) of class ids, 255 ignored.
Var cross_entropy(Var logits, const Tensor& labels, int num_classes);

}  // namespace ppt::ag
