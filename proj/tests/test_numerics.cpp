#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pptformer/autograd.hpp"
#include "pptformer/numerics.hpp"

using namespace ppt;

TEST_CASE("softmax of a constant row is uniform") {
    Tensor m = Tensor::from_data({1, 3}, {0, 0, 0});
    Tensor s = softmax_rows(m);
    for (int j = 0; j < 3; ++j) CHECK(s.at(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("softmax of log-integers recovers the ratios") {
    Tensor m = Tensor::from_data({1, 3}, {std::log(1.0), std::log(2.0), std::log(3.0)});
    Tensor s = softmax_rows(m);
    CHECK(s.at(0, 0) == doctest::Approx(1.0 / 6).epsilon(1e-14));
    CHECK(s.at(0, 1) == doctest::Approx(2.0 / 6).epsilon(1e-14));
    CHECK(s.at(0, 2) == doctest::Approx(3.0 / 6).epsilon(1e-14));
}

TEST_CASE("softmax survives large inputs without overflow") {
    Tensor m = Tensor::from_data({1, 3}, {1000.0, 1000.0, 999.0});
    Tensor s = softmax_rows(m);
    // Long-double evaluation of the shifted form as an independent route.
    long double e0 = expl((long double)0.0), e2 = expl((long double)-1.0);
    long double denom = e0 + e0 + e2;
    CHECK(std::isfinite(s.at(0, 0)));
    CHECK(s.at(0, 0) == doctest::Approx((double)(e0 / denom)).epsilon(1e-14));
    CHECK(s.at(0, 2) == doctest::Approx((double)(e2 / denom)).epsilon(1e-14));
    double rs = s.at(0, 0) + s.at(0, 1) + s.at(0, 2);
    CHECK(std::fabs(rs - 1.0) < 1e-12);
}

TEST_CASE("softmax rejects non-rank-2 input") {
    CHECK_THROWS_AS(softmax_rows(Tensor({2, 2, 2})), ShapeError);
}

TEST_CASE("softmax rows are stochastic for random inputs") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        int r = 1 + rng.uniform_int(6), c = 1 + rng.uniform_int(9);
        Tensor m({r, c});
        for (long long i = 0; i < m.size(); ++i) m[i] = rng.uniform(-50, 50);
        Tensor s = softmax_rows(m);
        for (int i = 0; i < r; ++i) {
            double sum = 0;
            for (int j = 0; j < c; ++j) {
                CHECK(s.at(i, j) >= 0.0);
                sum += s.at(i, j);
            }
            CHECK(std::fabs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("finite differences are exact on a quadratic") {
    auto f = [](const Tensor& x) {
        double s = 0;
        for (long long i = 0; i < x.size(); ++i) s += x[i] * x[i];
        return s;
    };
    Tensor x = Tensor::from_data({2}, {1.0, 2.0});
    Tensor g = finite_diff_grad(f, x, 1e-5);
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("finite differences of a constant vanish") {
    auto f = [](const Tensor&) { return 3.5; };
    Tensor g = finite_diff_grad(f, Tensor({4}, 1.0), 1e-5);
    for (long long i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("conv2d_same identity kernel") {
    Rng rng(3);
    Tensor x = rng.normal_tensor({6, 5, 2}, 1.0);
    Tensor k({1, 1, 2, 2});
    k.at(0, 0, 0, 0) = 1.0;
    k.at(0, 0, 1, 1) = 1.0;
    Tensor y = conv2d_same(x, k, 1);
    CHECK(max_abs_diff(x, y) == 0.0);
}

TEST_CASE("conv2d_same all-ones 3x3 on a constant image") {
    double v = 0.7;
    Tensor x({8, 8, 1}, v);
    Tensor k({3, 3, 1, 1}, 1.0);
    Tensor y = conv2d_same(x, k, 1);
    for (int i = 2; i < 6; ++i)
        for (int j = 2; j < 6; ++j) CHECK(y.at(i, j, 0) == doctest::Approx(9 * v).epsilon(1e-15));
}

// Naive quadruple-loop reference, kept deliberately separate from the kernel.
static Tensor conv_reference(const Tensor& x, const Tensor& k, int stride) {
    int H = x.dim(0), W = x.dim(1), Ci = x.dim(2);
    int kh = k.dim(0), kw = k.dim(1), Co = k.dim(3);
    int Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
    Tensor out({Ho, Wo, Co});
    for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox)
            for (int co = 0; co < Co; ++co) {
                double s = 0;
                for (int dy = 0; dy < kh; ++dy)
                    for (int dx = 0; dx < kw; ++dx)
                        for (int ci = 0; ci < Ci; ++ci) {
                            int iy = oy * stride + dy - kh / 2;
                            int ix = ox * stride + dx - kw / 2;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            s += x.at(iy, ix, ci) * k.at(dy, dx, ci, co);
                        }
                out.at(oy, ox, co) = s;
            }
    return out;
}

TEST_CASE("conv2d_same matches the loop reference") {
    Rng rng(11);
    for (int stride : {1, 2}) {
        Tensor x = rng.normal_tensor({5, 5, 3}, 1.0);
        Tensor k = rng.normal_tensor({3, 3, 3, 4}, 1.0);
        Tensor y = conv2d_same(x, k, stride);
        Tensor ref = conv_reference(x, k, stride);
        CHECK(max_abs_diff(y, ref) < 1e-12);
    }
}

TEST_CASE("conv2d_same rejects channel mismatch") {
    Tensor x({4, 4, 2});
    Tensor k({3, 3, 3, 1});
    CHECK_THROWS_AS(conv2d_same(x, k, 1), ShapeError);
}

TEST_CASE("rng streams are reproducible and forks are independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(42);
    Rng f1 = c.fork(1), f2 = c.fork(2);
    CHECK(f1.next_u64() != f2.next_u64());
}

// Gradient checks for the differentiable op layer against finite differences.
static double grad_check(const std::function<ag::Var(ag::Tape&, ag::Var)>& build, Tensor x0) {
    ag::Tape tape;
    ag::Var x = tape.leaf(x0, true);
    ag::Var out = build(tape, x);
    tape.backward(out);
    Tensor analytic = x.grad();
    auto f = [&](const Tensor& xv) {
        ag::Tape t2(false);
        return build(t2, t2.leaf(xv)).value()[0];
    };
    Tensor fd = finite_diff_grad(f, x0, 1e-5);
    double num = 0, den = 0;
    for (long long i = 0; i < fd.size(); ++i) {
        num += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
        den += fd[i] * fd[i];
    }
    return std::sqrt(num) / std::max(1e-12, std::sqrt(den));
}

TEST_CASE("autograd ops agree with finite differences") {
    Rng rng(5);

    Tensor sm_w = rng.normal_tensor({3, 4}, 1.0);
    CHECK(grad_check(
              [sm_w](ag::Tape& t, ag::Var x) {
                  return ag::sum(ag::mul(ag::softmax_rows(x), t.leaf(sm_w)));
              },
              rng.normal_tensor({3, 4}, 1.0)) < 1e-6);

    CHECK(grad_check([](ag::Tape& t, ag::Var x) { return ag::sum(ag::sigmoid(x)); },
                     rng.normal_tensor({2, 3}, 1.0)) < 1e-6);

    CHECK(grad_check(
              [](ag::Tape& t, ag::Var x) {
                  ag::Var w = t.leaf(Tensor::from_data({3, 2}, {1, -1, .5, 2, 0, 1}));
                  ag::Var b = t.leaf(Tensor::from_data({2}, {.1, -.2}));
                  return ag::sum(ag::tanh_op(ag::linear(x, w, b)));
              },
              rng.normal_tensor({4, 3}, 1.0)) < 1e-6);

    Tensor mate = rng.normal_tensor({4, 3}, 1.0);
    CHECK(grad_check(
              [mate](ag::Tape& t, ag::Var x) {
                  return ag::sum(ag::matmul_nt(x, t.leaf(mate)));
              },
              rng.normal_tensor({2, 3}, 1.0)) < 1e-6);

    CHECK(grad_check(
              [](ag::Tape& t, ag::Var x) { return ag::sum(ag::bilinear_resize(x, 7, 6)); },
              rng.normal_tensor({4, 3, 2}, 1.0)) < 1e-6);

    CHECK(grad_check(
              [](ag::Tape& t, ag::Var x) { return ag::sum(ag::l2_normalize_channels(x)); },
              rng.normal_tensor({3, 3, 4}, 1.0)) < 1e-6);

    Tensor ln_gain = rng.normal_tensor({5}, 1.0);
    Tensor ln_bias = rng.normal_tensor({5}, 1.0);
    CHECK(grad_check(
              [ln_gain, ln_bias](ag::Tape& t, ag::Var x) {
                  ag::Var g = t.leaf(ln_gain, true);
                  ag::Var b = t.leaf(ln_bias, true);
                  return ag::sum(ag::sigmoid(ag::layer_norm(x, g, b)));
              },
              rng.normal_tensor({4, 5}, 2.0)) < 1e-5);

    Tensor kern = rng.normal_tensor({3, 3, 2, 3}, 0.5);
    CHECK(grad_check(
              [kern](ag::Tape& t, ag::Var x) {
                  return ag::sum(ag::conv2d_same(x, t.leaf(kern), 2));
              },
              rng.normal_tensor({5, 5, 2}, 1.0)) < 1e-6);

    Tensor labels({4, 4});
    for (long long i = 0; i < labels.size(); ++i) labels[i] = (double)(i % 3);
    labels.at(0, 0) = 255;
    CHECK(grad_check(
              [labels](ag::Tape& t, ag::Var x) { return ag::cross_entropy(x, labels, 3); },
              rng.normal_tensor({4, 4, 3}, 1.0)) < 1e-6);
}

TEST_CASE("conv kernel gradients agree with finite differences") {
    Rng rng(9);
    Tensor x0 = rng.normal_tensor({5, 4, 2}, 1.0);
    Tensor k0 = rng.normal_tensor({3, 3, 2, 2}, 0.7);

    ag::Tape tape;
    ag::Var x = tape.leaf(x0);
    ag::Var k = tape.leaf(k0, true);
    tape.backward(ag::sum(ag::conv2d_same(x, k, 1)));
    Tensor analytic = k.grad();

    auto f = [&](const Tensor& kv) {
        ag::Tape t2(false);
        ag::Var y = ag::conv2d_same(t2.leaf(x0), t2.leaf(kv), 1);
        double s = 0;
        for (long long i = 0; i < y.value().size(); ++i) s += y.value()[i];
        return s;
    };
    Tensor fd = finite_diff_grad(f, k0, 1e-5);
    CHECK(max_abs_diff(analytic, fd) < 1e-7);
}
