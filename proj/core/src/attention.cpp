#include "pptformer/attention.hpp"

#include <cmath>

namespace ppt::attention {

void Probe::record(const Tensor& weights) {
    int R = weights.dim(0), C = weights.dim(1);
    for (int i = 0; i < R; ++i) {
        double s = 0;
        for (int j = 0; j < C; ++j) s += weights.at(i, j);
        min_row_sum = std::min(min_row_sum, s);
        max_row_sum = std::max(max_row_sum, s);
    }
    ++matrices;
}

ag::Var attention_step(ag::Var a, ag::Var b, Probe* probe) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2) throw ShapeError("attention_step: expected (tokens, C)");
    if (av.dim(1) != bv.dim(1)) throw ShapeError("attention_step: channel mismatch");
    int C = av.dim(1);
    ag::Var scores = ag::scale(ag::matmul_nt(a, b), 1.0 / std::sqrt((double)C));
    ag::Var weights = ag::softmax_rows(scores);
    if (probe) probe->record(weights.value());
    return ag::matmul(weights, b);
}

Tensor attention_step(const Tensor& a, const Tensor& b, Probe* probe) {
    ag::Tape t(false);
    return attention_step(t.leaf(a), t.leaf(b), probe).value();
}

ag::Var pmp_chain(ag::Var f, ag::Var f_pseudo, int m, Probe* probe) {
    if (m < 1) throw ConfigError("pmp_chain: M must be at least 1");
    ag::Var prev2 = f, prev1 = f_pseudo;
    ag::Var cur;
    for (int k = 1; k <= m; ++k) {
        cur = attention_step(prev2, prev1, probe);
        prev2 = prev1;
        prev1 = cur;
    }
    return cur;
}

Tensor pmp_chain(const Tensor& f, const Tensor& f_pseudo, int m, Probe* probe) {
    ag::Tape t(false);
    return pmp_chain(t.leaf(f), t.leaf(f_pseudo), m, probe).value();
}

ag::Var calibrate(ag::Var block_input, ag::Var fused, int l_cal, Probe* probe) {
    if (l_cal < 0) throw ConfigError("calibrate: layer count must be non-negative");
    if (!block_input.value().same_shape(fused.value()))
        throw ShapeError("calibrate: shape mismatch");
    if (l_cal == 0) return fused;
    return pmp_chain(block_input, fused, l_cal, probe);
}

Tensor calibrate(const Tensor& block_input, const Tensor& fused, int l_cal, Probe* probe) {
    ag::Tape t(false);
    return calibrate(t.leaf(block_input), t.leaf(fused), l_cal, probe).value();
}

}  // namespace ppt::attention
