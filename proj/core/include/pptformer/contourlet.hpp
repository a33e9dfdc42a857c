#pragma once

#include <utility>
#include <vector>

#include "pptformer/autograd.hpp"
#include "pptformer/tensor.hpp"

namespace ppt::contourlet {

// One pyramid level: low-pass residual plus 2^z directional subbands of the
// high-pass band, all at that level's resolution.
struct Level {
    Tensor low_pass;
    std::vector<Tensor> subbands;
};

struct ContourletPyramid {
    std::vector<Level> levels;
    int T = 0;
    int z = 0;
};

// Laplacian pyramid step: low = decimate(blur(x)), high = x - expand(low).
std::pair<Tensor, Tensor> lp_decompose(const Tensor& x);
Tensor lp_reconstruct(const Tensor& low, const Tensor& high);

// Undecimated binary tree of orientation-selective filters, z levels deep.
// Subbands [0, 2^(z-1)) carry vertical detail, the rest horizontal.
std::vector<Tensor> dfb_decompose(const Tensor& high, int z);

// Iterated LP+DFB stack; subbands of every level are bilinearly resampled to
// the input grid and concatenated along channels. T = 0 passes F through.
Tensor contourlet_texture(const Tensor& F, int T, int z);

ContourletPyramid decompose(const Tensor& F, int T, int z);

// Differentiable counterparts (fixed filters; gradients flow to the input).
std::pair<ag::Var, ag::Var> lp_decompose(ag::Var x);
ag::Var lp_reconstruct(ag::Var low, ag::Var high);
std::vector<ag::Var> dfb_decompose(ag::Var high, int z);
ag::Var contourlet_texture(ag::Var F, int T, int z);

// Validates that a (H,W) extent admits T pyramid halvings.
void check_depth(int H, int W, int T);

}  // namespace ppt::contourlet
