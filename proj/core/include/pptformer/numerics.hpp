#pragma once

#include <functional>

#include "pptformer/kernels.hpp"
#include "pptformer/rng.hpp"
#include "pptformer/tensor.hpp"

namespace ppt {

// Row-stochastic softmax over a rank-2 tensor.
inline Tensor softmax_rows(const Tensor& m) { return kernels::softmax_rows(m); }

// Zero-padded "same" correlation; see kernels::conv2d_same for conventions.
inline Tensor conv2d_same(const Tensor& input, const Tensor& kernel, int stride = 1) {
    return kernels::conv2d_same(input, kernel, stride);
}

// Central-difference gradient estimate of a scalar function, coordinate by
// coordinate. The correctness oracle for every analytic gradient in the tree.
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               double h) {
    if (h <= 0) throw ConfigError("finite_diff_grad: step size must be positive");
    Tensor g(x.shape());
    Tensor probe = x;
    for (long long i = 0; i < x.size(); ++i) {
        double orig = probe[i];
        probe[i] = orig + h;
        double fp = f(probe);
        probe[i] = orig - h;
        double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_grad: function returned non-finite value");
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace ppt
