#pragma once

#include <vector>

#include "pptformer/autograd.hpp"
#include "pptformer/tensor.hpp"

namespace ppt::attention {

// Records row-sum extrema of every attention matrix built while attached.
struct Probe {
    double min_row_sum = 1.0;
    double max_row_sum = 1.0;
    long long matrices = 0;
    void record(const Tensor& weights);
};

// softmax(a b^T / sqrt(C)) b  — each output token is a convex combination of
// b's rows. a, b: (tokens, C).
ag::Var attention_step(ag::Var a, ag::Var b, Probe* probe = nullptr);
Tensor attention_step(const Tensor& a, const Tensor& b, Probe* probe = nullptr);

// Iterative chain: F1 = step(F, F'); F2 = step(F', F1); Fk = step(F_{k-2}, F_{k-1}).
ag::Var pmp_chain(ag::Var f, ag::Var f_pseudo, int m, Probe* probe = nullptr);
Tensor pmp_chain(const Tensor& f, const Tensor& f_pseudo, int m, Probe* probe = nullptr);

// Re-anchors fused features to the block input; l_cal = 0 returns fused.
ag::Var calibrate(ag::Var block_input, ag::Var fused, int l_cal, Probe* probe = nullptr);
Tensor calibrate(const Tensor& block_input, const Tensor& fused, int l_cal,
                 Probe* probe = nullptr);

}  // namespace ppt::attention
