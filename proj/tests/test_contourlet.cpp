#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pptformer/contourlet.hpp"
#include "pptformer/rng.hpp"

using namespace ppt;
namespace ct = ppt::contourlet;

TEST_CASE("laplacian step on a constant image") {
    double v = 1.3;
    Tensor x({16, 16, 1}, v);
    auto [low, high] = ct::lp_decompose(x);
    CHECK(max_abs(high) < 1e-10);
    for (long long i = 0; i < low.size(); ++i) CHECK(low[i] == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("laplacian pyramid reconstructs exactly") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = rng.normal_tensor({16, 16, 2}, 1.0);
        auto [low, high] = ct::lp_decompose(x);
        Tensor back = ct::lp_reconstruct(low, high);
        CHECK(max_abs_diff(back, x) < 1e-12);
    }
}

TEST_CASE("laplacian reconstruct with zero low band returns the high band") {
    Rng rng(2);
    Tensor high = rng.normal_tensor({8, 8, 1}, 1.0);
    Tensor low({4, 4, 1}, 0.0);
    Tensor back = ct::lp_reconstruct(low, high);
    CHECK(max_abs_diff(back, high) == 0.0);
}

TEST_CASE("laplacian high band of an impulse matches the direct formula") {
    // high = x - 4*blur(zero_upsample(decimate(blur(x)))) evaluated by hand
    // with explicit loops over the separable binomial kernel.
    Tensor x({8, 8, 1});
    x.at(3, 4, 0) = 1.0;
    const double k[5] = {1 / 16., 4 / 16., 6 / 16., 4 / 16., 1 / 16.};
    auto mirror = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i;
            if (i >= n) i = 2 * (n - 1) - i;
        }
        return i;
    };
    auto blur = [&](const Tensor& in) {
        int H = in.dim(0), W = in.dim(1);
        Tensor mid({H, W, 1}), out({H, W, 1});
        for (int y = 0; y < H; ++y)
            for (int xw = 0; xw < W; ++xw)
                for (int d = -2; d <= 2; ++d)
                    mid.at(y, xw, 0) += k[d + 2] * in.at(mirror(y + d, H), xw, 0);
        for (int y = 0; y < H; ++y)
            for (int xw = 0; xw < W; ++xw)
                for (int d = -2; d <= 2; ++d)
                    out.at(y, xw, 0) += k[d + 2] * mid.at(y, mirror(xw + d, W), 0);
        return out;
    };
    Tensor b = blur(x);
    Tensor lowref({4, 4, 1});
    for (int y = 0; y < 4; ++y)
        for (int xw = 0; xw < 4; ++xw) lowref.at(y, xw, 0) = b.at(2 * y, 2 * xw, 0);
    Tensor up({8, 8, 1});
    for (int y = 0; y < 4; ++y)
        for (int xw = 0; xw < 4; ++xw) up.at(2 * y, 2 * xw, 0) = lowref.at(y, xw, 0);
    Tensor expand = blur(up);
    Tensor highref({8, 8, 1});
    for (long long i = 0; i < highref.size(); ++i) highref[i] = x[i] - 4.0 * expand[i];

    auto [low, high] = ct::lp_decompose(x);
    CHECK(max_abs_diff(low, lowref) < 1e-14);
    CHECK(max_abs_diff(high, highref) < 1e-14);
}

TEST_CASE("laplacian step rejects degenerate inputs") {
    CHECK_THROWS_AS(ct::lp_decompose(Tensor({1, 8, 1})), ShapeError);
    CHECK_THROWS_AS(ct::lp_reconstruct(Tensor({3, 3, 1}), Tensor({8, 8, 1})), ShapeError);
}

TEST_CASE("directional filter bank yields 2^z subbands") {
    Rng rng(23);
    Tensor x = rng.normal_tensor({12, 12, 2}, 1.0);
    for (int z = 1; z <= 4; ++z) {
        auto bands = ct::dfb_decompose(x, z);
        CHECK((int)bands.size() == (1 << z));
        for (const Tensor& b : bands) {
            CHECK(b.dim(0) == 12);
            CHECK(b.dim(1) == 12);
            CHECK(b.dim(2) == 2);
        }
    }
    CHECK_THROWS_AS(ct::dfb_decompose(x, 0), ConfigError);
    CHECK_THROWS_AS(ct::dfb_decompose(x, 5), ConfigError);
}

TEST_CASE("directional subbands reject constant input") {
    Tensor x({16, 16, 1}, 2.5);
    for (int z : {1, 2, 3}) {
        auto bands = ct::dfb_decompose(x, z);
        for (const Tensor& b : bands) CHECK(max_abs(b) < 1e-10);
    }
}

static double group_energy(const std::vector<Tensor>& bands, int from, int to) {
    double e = 0;
    for (int i = from; i < to; ++i) e += sum_sq(bands[i]);
    return e;
}

TEST_CASE("axis-aligned sinusoids land in the matching subband group") {
    int H = 32, W = 32, z = 3;
    double omega = 2.0 * M_PI * 5.0 / W;

    // Varies along x: vertical stripes, i.e. vertical detail -> group [0, 4).
    Tensor vert({H, W, 1});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) vert.at(y, x, 0) = std::sin(omega * x);
    auto bands_v = ct::dfb_decompose(vert, z);
    double ev = group_energy(bands_v, 0, 4), eh = group_energy(bands_v, 4, 8);
    CHECK(ev / (ev + eh) > 0.8);

    // Varies along y: horizontal stripes -> group [4, 8).
    Tensor horiz({H, W, 1});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) horiz.at(y, x, 0) = std::sin(omega * y);
    auto bands_h = ct::dfb_decompose(horiz, z);
    double ev2 = group_energy(bands_h, 0, 4), eh2 = group_energy(bands_h, 4, 8);
    CHECK(eh2 / (ev2 + eh2) > 0.8);
}

TEST_CASE("contourlet texture is a pass-through for T=0") {
    Rng rng(31);
    Tensor x = rng.normal_tensor({8, 8, 3}, 1.0);
    Tensor out = ct::contourlet_texture(x, 0, 3);
    CHECK(max_abs_diff(out, x) == 0.0);
}

TEST_CASE("contourlet texture channel count") {
    Rng rng(37);
    Tensor x = rng.normal_tensor({32, 32, 1}, 1.0);
    Tensor out = ct::contourlet_texture(x, 2, 3);
    CHECK(out.dim(0) == 32);
    CHECK(out.dim(1) == 32);
    CHECK(out.dim(2) == 2 * 8 * 1);
}

TEST_CASE("contourlet texture T=1 equals the composed public ops") {
    Rng rng(41);
    Tensor x = rng.normal_tensor({16, 16, 2}, 1.0);
    Tensor out = ct::contourlet_texture(x, 1, 2);
    auto [low, high] = ct::lp_decompose(x);
    auto bands = ct::dfb_decompose(high, 2);
    CHECK(out.dim(2) == 4 * 2);
    for (int s = 0; s < 4; ++s)
        for (int y = 0; y < 16; ++y)
            for (int xw = 0; xw < 16; ++xw)
                for (int c = 0; c < 2; ++c)
                    CHECK(out.at(y, xw, s * 2 + c) == bands[s].at(y, xw, c));
}

TEST_CASE("contourlet texture rejects too-small inputs") {
    Tensor x({4, 4, 1}, 1.0);
    CHECK_THROWS_AS(ct::contourlet_texture(x, 3, 2), ConfigError);
}

TEST_CASE("pyramid low-pass extents halve (rounded up)") {
    Rng rng(43);
    Tensor x = rng.normal_tensor({20, 28, 1}, 1.0);
    auto pyr = ct::decompose(x, 3, 2);
    CHECK((int)pyr.levels.size() == 3);
    int h = 20, w = 28;
    for (const auto& lvl : pyr.levels) {
        CHECK((int)lvl.subbands.size() == 4);
        h = (h + 1) / 2;
        w = (w + 1) / 2;
        CHECK(lvl.low_pass.dim(0) == h);
        CHECK(lvl.low_pass.dim(1) == w);
    }
}
