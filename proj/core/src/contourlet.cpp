#include "pptformer/contourlet.hpp"

#include <cmath>

namespace ppt::contourlet {

namespace {

// Burt-Adelson 5-tap binomial, applied separably.
const Tensor& blur_col() {
    static Tensor k = Tensor::from_data({5, 1}, {1 / 16., 4 / 16., 6 / 16., 4 / 16., 1 / 16.});
    return k;
}
const Tensor& blur_row() {
    static Tensor k = Tensor::from_data({1, 5}, {1 / 16., 4 / 16., 6 / 16., 4 / 16., 1 / 16.});
    return k;
}

// Level-1 fan pair: smoothed difference across x (vertical detail) and its
// transpose (horizontal detail). Both are zero-mean.
const Tensor& fan_v() {
    static Tensor k = Tensor::from_data({3, 3}, {-.125, 0, .125, -.25, 0, .25, -.125, 0, .125});
    return k;
}
const Tensor& fan_h() {
    static Tensor k = Tensor::from_data({3, 3}, {-.125, -.25, -.125, 0, 0, 0, .125, .25, .125});
    return k;
}

// Deeper-level diagonal pair splitting each branch into finer orientations.
const Tensor& diag_a() {
    static Tensor k = Tensor::from_data({3, 3}, {.5, 0, 0, 0, 0, 0, 0, 0, -.5});
    return k;
}
const Tensor& diag_b() {
    static Tensor k = Tensor::from_data({3, 3}, {0, 0, .5, 0, 0, 0, -.5, 0, 0});
    return k;
}

ag::Var blur(ag::Var x) {
    return ag::depthwise_conv2d_fixed(ag::depthwise_conv2d_fixed(x, blur_col()), blur_row());
}

ag::Var expand(ag::Var low, int ho, int wo) {
    return ag::scale(blur(ag::zero_upsample2(low, ho, wo)), 4.0);
}

void check_lp_input(const Tensor& x) {
    if (x.rank() != 3) throw ShapeError("lp_decompose: expected (H,W,C)");
    if (x.dim(0) < 2 || x.dim(1) < 2)
        throw ShapeError("lp_decompose: spatial extents must be at least 2");
}

}  // namespace

void check_depth(int H, int W, int T) {
    int h = H, w = W;
    for (int t = 0; t < T; ++t) {
        if (h < 2 || w < 2)
            throw ConfigError("contourlet: spatial extent too small for requested levels");
        h = (h + 1) / 2;
        w = (w + 1) / 2;
    }
}

std::pair<ag::Var, ag::Var> lp_decompose(ag::Var x) {
    check_lp_input(x.value());
    int H = x.value().dim(0), W = x.value().dim(1);
    ag::Var low = ag::decimate2(blur(x));
    ag::Var high = ag::sub(x, expand(low, H, W));
    return {low, high};
}

ag::Var lp_reconstruct(ag::Var low, ag::Var high) {
    if (low.value().rank() != 3 || high.value().rank() != 3)
        throw ShapeError("lp_reconstruct: expected (H,W,C)");
    int H = high.value().dim(0), W = high.value().dim(1);
    if ((H + 1) / 2 != low.value().dim(0) || (W + 1) / 2 != low.value().dim(1) ||
        low.value().dim(2) != high.value().dim(2))
        throw ShapeError("lp_reconstruct: low/high extents inconsistent");
    return ag::add(expand(low, H, W), high);
}

std::vector<ag::Var> dfb_decompose(ag::Var high, int z) {
    if (z < 1 || z > 4) throw ConfigError("dfb_decompose: z must be in [1,4]");
    if (high.value().rank() != 3) throw ShapeError("dfb_decompose: expected (H,W,C)");
    std::vector<ag::Var> bands{ag::depthwise_conv2d_fixed(high, fan_v()),
                               ag::depthwise_conv2d_fixed(high, fan_h())};
    for (int level = 2; level <= z; ++level) {
        std::vector<ag::Var> next;
        next.reserve(bands.size() * 2);
        for (ag::Var b : bands) {
            next.push_back(ag::depthwise_conv2d_fixed(b, diag_a()));
            next.push_back(ag::depthwise_conv2d_fixed(b, diag_b()));
        }
        bands = std::move(next);
    }
    return bands;
}

ag::Var contourlet_texture(ag::Var F, int T, int z) {
    if (T < 0) throw ConfigError("contourlet_texture: T must be non-negative");
    if (T == 0) return F;
    if (F.value().rank() != 3) throw ShapeError("contourlet_texture: expected (H,W,C)");
    int H = F.value().dim(0), W = F.value().dim(1);
    check_depth(H, W, T);
    std::vector<ag::Var> parts;
    ag::Var low = F;
    for (int t = 1; t <= T; ++t) {
        auto [lo, hi] = lp_decompose(low);
        for (ag::Var b : dfb_decompose(hi, z)) {
            if (b.value().dim(0) != H || b.value().dim(1) != W)
                b = ag::bilinear_resize(b, H, W);
            parts.push_back(b);
        }
        low = lo;
    }
    return ag::concat_channels(parts);
}

std::pair<Tensor, Tensor> lp_decompose(const Tensor& x) {
    ag::Tape t(false);
    auto [lo, hi] = lp_decompose(t.leaf(x));
    return {lo.value(), hi.value()};
}

Tensor lp_reconstruct(const Tensor& low, const Tensor& high) {
    ag::Tape t(false);
    return lp_reconstruct(t.leaf(low), t.leaf(high)).value();
}

std::vector<Tensor> dfb_decompose(const Tensor& high, int z) {
    ag::Tape t(false);
    std::vector<Tensor> out;
    for (ag::Var b : dfb_decompose(t.leaf(high), z)) out.push_back(b.value());
    return out;
}

Tensor contourlet_texture(const Tensor& F, int T, int z) {
    ag::Tape t(false);
    return contourlet_texture(t.leaf(F), T, z).value();
}

ContourletPyramid decompose(const Tensor& F, int T, int z) {
    if (T < 1) throw ConfigError("decompose: T must be at least 1");
    check_depth(F.dim(0), F.dim(1), T);
    ContourletPyramid pyr;
    pyr.T = T;
    pyr.z = z;
    Tensor low = F;
    for (int t = 1; t <= T; ++t) {
        auto [lo, hi] = lp_decompose(low);
        Level lvl;
        lvl.low_pass = lo;
        lvl.subbands = dfb_decompose(hi, z);
        pyr.levels.push_back(std::move(lvl));
        low = lo;
    }
    return pyr;
}

}  // namespace ppt::contourlet
