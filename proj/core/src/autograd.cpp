#include "pptformer/autograd.hpp"

#include <cmath>

#include "pptformer/kernels.hpp"

namespace ppt::ag {

namespace K = ppt::kernels;

static Tape* same_tape(Var a, Var b) {
    if (a.tape() != b.tape()) throw StateError("vars from different tapes");
    return a.tape();
}

Var add(Var a, Var b) {
    Tape* t = same_tape(a, b);
    if (!a.value().same_shape(b.value())) throw ShapeError("add: shape mismatch");
    Tensor v = a.value();
    for (long long i = 0; i < v.size(); ++i) v[i] += b.value()[i];
    return t->make(std::move(v), [a, b](Tape& tp, const Tensor& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
}

Var sub(Var a, Var b) {
    Tape* t = same_tape(a, b);
    if (!a.value().same_shape(b.value())) throw ShapeError("sub: shape mismatch");
    Tensor v = a.value();
    for (long long i = 0; i < v.size(); ++i) v[i] -= b.value()[i];
    return t->make(std::move(v), [a, b](Tape& tp, const Tensor& g) {
        tp.accumulate(a, g);
        Tensor ng(g.shape());
        for (long long i = 0; i < g.size(); ++i) ng[i] = -g[i];
        tp.accumulate(b, ng);
    });
}

Var mul(Var a, Var b) {
    Tape* t = same_tape(a, b);
    if (!a.value().same_shape(b.value())) throw ShapeError("mul: shape mismatch");
    Tensor v = a.value();
    for (long long i = 0; i < v.size(); ++i) v[i] *= b.value()[i];
    return t->make(std::move(v), [a, b](Tape& tp, const Tensor& g) {
        Tensor ga(g.shape()), gb(g.shape());
        for (long long i = 0; i < g.size(); ++i) {
            ga[i] = g[i] * b.value()[i];
            gb[i] = g[i] * a.value()[i];
        }
        tp.accumulate(a, ga);
        tp.accumulate(b, gb);
    });
}

Var scale(Var a, double c) {
    Tensor v = a.value();
    for (long long i = 0; i < v.size(); ++i) v[i] *= c;
    return a.tape()->make(std::move(v), [a, c](Tape& tp, const Tensor& g) {
        Tensor ga(g.shape());
        for (long long i = 0; i < g.size(); ++i) ga[i] = g[i] * c;
        tp.accumulate(a, ga);
    });
}

Var matmul(Var a, Var b) {
    Tape* t = same_tape(a, b);
    Tensor v = K::matmul(a.value(), b.value());
    return t->make(std::move(v), [a, b](Tape& tp, const Tensor& g) {
        tp.accumulate(a, K::matmul_nt(g, b.value()));
        tp.accumulate(b, K::matmul_tn(a.value(), g));
    });
}

Var matmul_nt(Var a, Var b) {
    Tape* t = same_tape(a, b);
    Tensor v = K::matmul_nt(a.value(), b.value());
    return t->make(std::move(v), [a, b](Tape& tp, const Tensor& g) {
        tp.accumulate(a, K::matmul(g, b.value()));
        tp.accumulate(b, K::matmul_tn(g, a.value()));
    });
}

Var softmax_rows(Var m) {
    Tensor s = K::softmax_rows(m.value());
    Tensor s_copy = s;
    return m.tape()->make(std::move(s), [m, s_copy](Tape& tp, const Tensor& g) {
        int R = s_copy.dim(0), C = s_copy.dim(1);
        Tensor gm({R, C});
        for (int i = 0; i < R; ++i) {
            double dotv = 0;
            for (int j = 0; j < C; ++j) dotv += g.at(i, j) * s_copy.at(i, j);
            for (int j = 0; j < C; ++j)
                gm.at(i, j) = s_copy.at(i, j) * (g.at(i, j) - dotv);
        }
        tp.accumulate(m, gm);
    });
}

Var sigmoid(Var x) {
    Tensor v = x.value();
    for (long long i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + std::exp(-v[i]));
    Tensor y = v;
    return x.tape()->make(std::move(v), [x, y](Tape& tp, const Tensor& g) {
        Tensor gx(g.shape());
        for (long long i = 0; i < g.size(); ++i) gx[i] = g[i] * y[i] * (1.0 - y[i]);
        tp.accumulate(x, gx);
    });
}

Var tanh_op(Var x) {
    Tensor v = x.value();
    for (long long i = 0; i < v.size(); ++i) v[i] = std::tanh(v[i]);
    Tensor y = v;
    return x.tape()->make(std::move(v), [x, y](Tape& tp, const Tensor& g) {
        Tensor gx(g.shape());
        for (long long i = 0; i < g.size(); ++i) gx[i] = g[i] * (1.0 - y[i] * y[i]);
        tp.accumulate(x, gx);
    });
}

Var conv2d_same(Var input, Var kernel, int stride) {
    Tape* t = same_tape(input, kernel);
    Tensor v = K::conv2d_same(input.value(), kernel.value(), stride);
    return t->make(std::move(v), [input, kernel, stride](Tape& tp, const Tensor& g) {
        Tensor gi(input.value().shape());
        Tensor gk(kernel.value().shape());
        K::conv2d_same_backward(input.value(), kernel.value(), stride, g, &gi, &gk);
        tp.accumulate(input, gi);
        tp.accumulate(kernel, gk);
    });
}

Var depthwise_conv2d_fixed(Var input, const Tensor& kernel) {
    Tensor v = K::depthwise_conv2d(input.value(), kernel);
    Tensor kcopy = kernel;
    return input.tape()->make(std::move(v), [input, kcopy](Tape& tp, const Tensor& g) {
        Tensor gi(input.value().shape());
        K::depthwise_conv2d_backward(input.value(), kcopy, g, &gi);
        tp.accumulate(input, gi);
    });
}

Var decimate2(Var x) {
    Tensor v = K::decimate2(x.value());
    return x.tape()->make(std::move(v), [x](Tape& tp, const Tensor& g) {
        Tensor gx(x.value().shape());
        K::decimate2_backward(x.value(), g, &gx);
        tp.accumulate(x, gx);
    });
}

Var zero_upsample2(Var x, int ho, int wo) {
    Tensor v = K::zero_upsample2(x.value(), ho, wo);
    return x.tape()->make(std::move(v), [x](Tape& tp, const Tensor& g) {
        Tensor gx(x.value().shape());
        K::zero_upsample2_backward(x.value(), g, &gx);
        tp.accumulate(x, gx);
    });
}

Var bilinear_resize(Var x, int ho, int wo) {
    Tensor v = K::bilinear_resize(x.value(), ho, wo);
    return x.tape()->make(std::move(v), [x, ho, wo](Tape& tp, const Tensor& g) {
        Tensor gx(x.value().shape());
        K::bilinear_resize_backward(x.value(), ho, wo, g, &gx);
        tp.accumulate(x, gx);
    });
}

Var avgpool_blocks(Var x, int ho, int wo) {
    Tensor v = K::avgpool_blocks(x.value(), ho, wo);
    return x.tape()->make(std::move(v), [x, ho, wo](Tape& tp, const Tensor& g) {
        Tensor gx(x.value().shape());
        K::avgpool_blocks_backward(x.value(), ho, wo, g, &gx);
        tp.accumulate(x, gx);
    });
}

Var concat_channels(const std::vector<Var>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: empty input list");
    Tape* t = xs[0].tape();
    int H = xs[0].value().dim(0), W = xs[0].value().dim(1);
    int C = 0;
    for (const Var& x : xs) {
        if (x.value().rank() != 3 || x.value().dim(0) != H || x.value().dim(1) != W)
            throw ShapeError("concat_channels: spatial extents differ");
        C += x.value().dim(2);
    }
    Tensor v({H, W, C});
    int off = 0;
    for (const Var& x : xs) {
        int c = x.value().dim(2);
        for (int y = 0; y < H; ++y)
            for (int xw = 0; xw < W; ++xw)
                for (int k = 0; k < c; ++k) v.at(y, xw, off + k) = x.value().at(y, xw, k);
        off += c;
    }
    std::vector<Var> xs_copy = xs;
    return t->make(std::move(v), [xs_copy, H, W](Tape& tp, const Tensor& g) {
        int off = 0;
        for (const Var& x : xs_copy) {
            int c = x.value().dim(2);
            Tensor gx({H, W, c});
            for (int y = 0; y < H; ++y)
                for (int xw = 0; xw < W; ++xw)
                    for (int k = 0; k < c; ++k) gx.at(y, xw, k) = g.at(y, xw, off + k);
            tp.accumulate(x, gx);
            off += c;
        }
    });
}

Var channel_group_mean(Var x, int groups) {
    const Tensor& in = x.value();
    if (in.rank() != 3) throw ShapeError("channel_group_mean: expected rank-3");
    int H = in.dim(0), W = in.dim(1), C = in.dim(2);
    if (C % groups != 0) throw ShapeError("channel_group_mean: channels not divisible");
    int S = C / groups;
    double inv = 1.0 / S;
    Tensor v({H, W, groups});
    for (int y = 0; y < H; ++y)
        for (int xw = 0; xw < W; ++xw)
            for (int gI = 0; gI < groups; ++gI) {
                double s = 0;
                for (int k = 0; k < S; ++k) s += in.at(y, xw, gI * S + k);
                v.at(y, xw, gI) = s * inv;
            }
    return x.tape()->make(std::move(v), [x, H, W, groups, S, inv](Tape& tp, const Tensor& g) {
        Tensor gx({H, W, groups * S});
        for (int y = 0; y < H; ++y)
            for (int xw = 0; xw < W; ++xw)
                for (int gI = 0; gI < groups; ++gI) {
                    double gv = g.at(y, xw, gI) * inv;
                    for (int k = 0; k < S; ++k) gx.at(y, xw, gI * S + k) = gv;
                }
        tp.accumulate(x, gx);
    });
}

Var l2_normalize_channels(Var x, double eps) {
    const Tensor& in = x.value();
    if (in.rank() != 3) throw ShapeError("l2_normalize_channels: expected rank-3");
    int H = in.dim(0), W = in.dim(1), C = in.dim(2);
    Tensor v({H, W, C});
    Tensor norms({H, W, 1});
    for (int y = 0; y < H; ++y)
        for (int xw = 0; xw < W; ++xw) {
            double s = eps;
            for (int c = 0; c < C; ++c) s += in.at(y, xw, c) * in.at(y, xw, c);
            double n = std::sqrt(s);
            norms.at(y, xw, 0) = n;
            for (int c = 0; c < C; ++c) v.at(y, xw, c) = in.at(y, xw, c) / n;
        }
    Tensor y_copy = v;
    return x.tape()->make(std::move(v), [x, y_copy, norms, H, W, C](Tape& tp, const Tensor& g) {
        Tensor gx({H, W, C});
        for (int y = 0; y < H; ++y)
            for (int xw = 0; xw < W; ++xw) {
                double n = norms.at(y, xw, 0);
                double d = 0;
                for (int c = 0; c < C; ++c) d += g.at(y, xw, c) * y_copy.at(y, xw, c);
                for (int c = 0; c < C; ++c)
                    gx.at(y, xw, c) = (g.at(y, xw, c) - y_copy.at(y, xw, c) * d) / n;
            }
        tp.accumulate(x, gx);
    });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    const Tensor& in = x.value();
    if (in.rank() != 2) throw ShapeError("layer_norm: expected rank-2 (tokens, channels)");
    int N = in.dim(0), C = in.dim(1);
    if (gain.value().size() != C || bias.value().size() != C)
        throw ShapeError("layer_norm: gain/bias extent mismatch");
    Tensor y({N, C});
    Tensor inv_std({N});
    for (int i = 0; i < N; ++i) {
        double mu = 0;
        for (int j = 0; j < C; ++j) mu += in.at(i, j);
        mu /= C;
        double var = 0;
        for (int j = 0; j < C; ++j) {
            double d = in.at(i, j) - mu;
            var += d * d;
        }
        var /= C;
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (int j = 0; j < C; ++j) y.at(i, j) = (in.at(i, j) - mu) * is;
    }
    Tensor out({N, C});
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < C; ++j) out.at(i, j) = y.at(i, j) * gain.value()[j] + bias.value()[j];
    Tensor y_copy = y;
    return x.tape()->make(std::move(out), [x, gain, bias, y_copy, inv_std, N, C](
                                              Tape& tp, const Tensor& g) {
        Tensor gx({N, C}), gg({C}), gb({C});
        for (int i = 0; i < N; ++i) {
            double sum_gy = 0, sum_gyy = 0;
            for (int j = 0; j < C; ++j) {
                double gy = g.at(i, j) * gain.value()[j];
                sum_gy += gy;
                sum_gyy += gy * y_copy.at(i, j);
                gg[j] += g.at(i, j) * y_copy.at(i, j);
                gb[j] += g.at(i, j);
            }
            for (int j = 0; j < C; ++j) {
                double gy = g.at(i, j) * gain.value()[j];
                gx.at(i, j) = inv_std[i] * (gy - sum_gy / C - y_copy.at(i, j) * sum_gyy / C);
            }
        }
        tp.accumulate(x, gx);
        tp.accumulate(gain, gg);
        tp.accumulate(bias, gb);
    });
}

Var linear(Var x, Var w, Var b) {
    Tape* t = same_tape(x, w);
    Tensor v = K::matmul(x.value(), w.value());
    int N = v.dim(0), M = v.dim(1);
    if (b.value().size() != M) throw ShapeError("linear: bias extent mismatch");
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j) v.at(i, j) += b.value()[j];
    return t->make(std::move(v), [x, w, b, N, M](Tape& tp, const Tensor& g) {
        tp.accumulate(x, K::matmul_nt(g, w.value()));
        tp.accumulate(w, K::matmul_tn(x.value(), g));
        Tensor gb({M});
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < M; ++j) gb[j] += g.at(i, j);
        tp.accumulate(b, gb);
    });
}

Var add_channel_bias(Var x, Var b) {
    Tape* t = same_tape(x, b);
    const Tensor& in = x.value();
    if (in.rank() != 3) throw ShapeError("add_channel_bias: expected rank-3");
    int H = in.dim(0), W = in.dim(1), C = in.dim(2);
    if (b.value().size() != C) throw ShapeError("add_channel_bias: bias extent mismatch");
    Tensor v = in;
    for (int y = 0; y < H; ++y)
        for (int xw = 0; xw < W; ++xw)
            for (int c = 0; c < C; ++c) v.at(y, xw, c) += b.value()[c];
    return t->make(std::move(v), [x, b, H, W, C](Tape& tp, const Tensor& g) {
        tp.accumulate(x, g);
        Tensor gb({C});
        for (int y = 0; y < H; ++y)
            for (int xw = 0; xw < W; ++xw)
                for (int c = 0; c < C; ++c) gb[c] += g.at(y, xw, c);
        tp.accumulate(b, gb);
    });
}

Var reshape(Var x, std::vector<int> shape) {
    Tensor v = x.value().reshaped(shape);
    std::vector<int> orig = x.value().shape();
    return x.tape()->make(std::move(v), [x, orig](Tape& tp, const Tensor& g) {
        tp.accumulate(x, g.reshaped(orig));
    });
}

Var sum(Var x) {
    double s = 0;
    for (long long i = 0; i < x.value().size(); ++i) s += x.value()[i];
    return x.tape()->make(Tensor::from_data({1}, {s}), [x](Tape& tp, const Tensor& g) {
        Tensor gx(x.value().shape(), g[0]);
        tp.accumulate(x, gx);
    });
}

Var mean(Var x) {
    long long n = x.value().size();
    double s = 0;
    for (long long i = 0; i < n; ++i) s += x.value()[i];
    s /= n;
    return x.tape()->make(Tensor::from_data({1}, {s}), [x, n](Tape& tp, const Tensor& g) {
        Tensor gx(x.value().shape(), g[0] / n);
        tp.accumulate(x, gx);
    });
}

Var sum_sq_diff(Var a, Var b) {
    Tape* t = same_tape(a, b);
    if (!a.value().same_shape(b.value())) throw ShapeError("sum_sq_diff: shape mismatch");
    double s = 0;
    for (long long i = 0; i < a.value().size(); ++i) {
        double d = a.value()[i] - b.value()[i];
        s += d * d;
    }
    return t->make(Tensor::from_data({1}, {s}), [a, b](Tape& tp, const Tensor& g) {
        Tensor ga(a.value().shape()), gb(b.value().shape());
        for (long long i = 0; i < a.value().size(); ++i) {
            double d = 2.0 * (a.value()[i] - b.value()[i]) * g[0];
            ga[i] = d;
            gb[i] = -d;
        }
        tp.accumulate(a, ga);
        tp.accumulate(b, gb);
    });
}

Var sqrt_scalar(Var x, double eps) {
    if (x.value().size() != 1) throw ShapeError("sqrt_scalar: expected scalar");
    double y = std::sqrt(x.value()[0] + eps);
    return x.tape()->make(Tensor::from_data({1}, {y}), [x, y](Tape& tp, const Tensor& g) {
        double d = y > 0 ? g[0] / (2.0 * y) : 0.0;
        tp.accumulate(x, Tensor::from_data({1}, {d}));
    });
}

Var add_scalars(Var a, Var b) {
    Tape* t = same_tape(a, b);
    if (a.value().size() != 1 || b.value().size() != 1)
        throw ShapeError("add_scalars: expected scalars");
    double v = a.value()[0] + b.value()[0];
    return t->make(Tensor::from_data({1}, {v}), [a, b](Tape& tp, const Tensor& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
}

Var affine_scalar(Var s, double a, double b) {
    if (s.value().size() != 1) throw ShapeError("affine_scalar: expected scalar");
    double v = a + b * s.value()[0];
    return s.tape()->make(Tensor::from_data({1}, {v}), [s, b](Tape& tp, const Tensor& g) {
        tp.accumulate(s, Tensor::from_data({1}, {g[0] * b}));
    });
}

Var broadcast_mul(Var x, Var s) {
    Tape* t = same_tape(x, s);
    if (s.value().size() != 1) throw ShapeError("broadcast_mul: scale must be scalar");
    double sv = s.value()[0];
    Tensor v = x.value();
    for (long long i = 0; i < v.size(); ++i) v[i] *= sv;
    return t->make(std::move(v), [x, s, sv](Tape& tp, const Tensor& g) {
        Tensor gx(g.shape());
        double gs = 0;
        for (long long i = 0; i < g.size(); ++i) {
            gx[i] = g[i] * sv;
            gs += g[i] * x.value()[i];
        }
        tp.accumulate(x, gx);
        tp.accumulate(s, Tensor::from_data({1}, {gs}));
    });
}

Var cross_entropy(Var logits, const Tensor& labels, int num_classes) {
    const Tensor& lg = logits.value();
    if (lg.rank() != 3) throw ShapeError("cross_entropy: logits must be (H,W,K)");
    int H = lg.dim(0), W = lg.dim(1), Kc = lg.dim(2);
    if (Kc != num_classes) throw ShapeError("cross_entropy: class extent mismatch");
    if (labels.rank() != 2 || labels.dim(0) != H || labels.dim(1) != W)
        throw ShapeError("cross_entropy: label extents mismatch");
    Tensor probs({H, W, Kc});
    double loss = 0;
    long long counted = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int lab = (int)labels.at(y, x);
            if (lab == 255) continue;
            if (lab < 0 || lab >= Kc) throw DataError("cross_entropy: label out of range");
            double mx = lg.at(y, x, 0);
            for (int k = 1; k < Kc; ++k) mx = std::max(mx, lg.at(y, x, k));
            double denom = 0;
            for (int k = 0; k < Kc; ++k) {
                probs.at(y, x, k) = std::exp(lg.at(y, x, k) - mx);
                denom += probs.at(y, x, k);
            }
            for (int k = 0; k < Kc; ++k) probs.at(y, x, k) /= denom;
            loss += std::log(denom) + mx - lg.at(y, x, lab);
            ++counted;
        }
    if (counted == 0) throw DataError("cross_entropy: all pixels ignored");
    loss /= counted;
    Tensor labels_copy = labels;
    return logits.tape()->make(
        Tensor::from_data({1}, {loss}),
        [logits, probs, labels_copy, H, W, Kc, counted](Tape& tp, const Tensor& g) {
            Tensor gl({H, W, Kc});
            double scale = g[0] / counted;
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    int lab = (int)labels_copy.at(y, x);
                    if (lab == 255) continue;
                    for (int k = 0; k < Kc; ++k)
                        gl.at(y, x, k) = scale * (probs.at(y, x, k) - (k == lab ? 1.0 : 0.0));
                }
            tp.accumulate(logits, gl);
        });
}

}  // namespace ppt::ag
