#include "pptformer/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace ppt::kernels {

static void require_rank2(const Tensor& t, const char* name) {
    if (t.rank() != 2) throw ShapeError(std::string(name) + ": expected rank-2 tensor");
}

static void require_rank3(const Tensor& t, const char* name) {
    if (t.rank() != 3) throw ShapeError(std::string(name) + ": expected rank-3 (H,W,C) tensor");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    int M = a.dim(0), K = a.dim(1), N = b.dim(1);
    if (b.dim(0) != K) throw ShapeError("matmul: inner extents differ");
    Tensor out({M, N});
    for (int i = 0; i < M; ++i) {
        const double* ar = a.data() + (long long)i * K;
        double* orow = out.data() + (long long)i * N;
        for (int k = 0; k < K; ++k) {
            double av = ar[k];
            if (av == 0.0) continue;
            const double* br = b.data() + (long long)k * N;
            for (int j = 0; j < N; ++j) orow[j] += av * br[j];
        }
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_nt");
    require_rank2(b, "matmul_nt");
    int M = a.dim(0), K = a.dim(1), N = b.dim(0);
    if (b.dim(1) != K) throw ShapeError("matmul_nt: inner extents differ");
    Tensor out({M, N});
    for (int i = 0; i < M; ++i) {
        const double* ar = a.data() + (long long)i * K;
        double* orow = out.data() + (long long)i * N;
        for (int j = 0; j < N; ++j) {
            const double* br = b.data() + (long long)j * K;
            double s = 0;
            for (int k = 0; k < K; ++k) s += ar[k] * br[k];
            orow[j] = s;
        }
    }
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_tn");
    require_rank2(b, "matmul_tn");
    int K = a.dim(0), M = a.dim(1), N = b.dim(1);
    if (b.dim(0) != K) throw ShapeError("matmul_tn: inner extents differ");
    Tensor out({M, N});
    for (int k = 0; k < K; ++k) {
        const double* ar = a.data() + (long long)k * M;
        const double* br = b.data() + (long long)k * N;
        for (int i = 0; i < M; ++i) {
            double av = ar[i];
            if (av == 0.0) continue;
            double* orow = out.data() + (long long)i * N;
            for (int j = 0; j < N; ++j) orow[j] += av * br[j];
        }
    }
    return out;
}

Tensor softmax_rows(const Tensor& m) {
    require_rank2(m, "softmax_rows");
    int R = m.dim(0), C = m.dim(1);
    Tensor out({R, C});
    for (int i = 0; i < R; ++i) {
        const double* row = m.data() + (long long)i * C;
        double* orow = out.data() + (long long)i * C;
        double mx = row[0];
        for (int j = 1; j < C; ++j) mx = std::max(mx, row[j]);
        double denom = 0;
        for (int j = 0; j < C; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        for (int j = 0; j < C; ++j) orow[j] /= denom;
    }
    return out;
}

static int ceil_div(int a, int b) { return (a + b - 1) / b; }

Tensor conv2d_same(const Tensor& input, const Tensor& kernel, int stride) {
    require_rank3(input, "conv2d_same");
    if (kernel.rank() != 4) throw ShapeError("conv2d_same: kernel must be (kh,kw,Cin,Cout)");
    if (stride < 1) throw ShapeError("conv2d_same: stride must be positive");
    int H = input.dim(0), W = input.dim(1), Ci = input.dim(2);
    int kh = kernel.dim(0), kw = kernel.dim(1);
    if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("conv2d_same: kernel extents must be odd");
    if (kernel.dim(2) != Ci) throw ShapeError("conv2d_same: channel mismatch");
    int Co = kernel.dim(3);
    int Ho = ceil_div(H, stride), Wo = ceil_div(W, stride);
    int ph = kh / 2, pw = kw / 2;
    Tensor out({Ho, Wo, Co});
    for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
            double* opix = out.data() + ((long long)oy * Wo + ox) * Co;
            for (int dy = 0; dy < kh; ++dy) {
                int iy = oy * stride + dy - ph;
                if (iy < 0 || iy >= H) continue;
                for (int dx = 0; dx < kw; ++dx) {
                    int ix = ox * stride + dx - pw;
                    if (ix < 0 || ix >= W) continue;
                    const double* ipix = input.data() + ((long long)iy * W + ix) * Ci;
                    const double* kpix = kernel.data() + ((long long)dy * kw + dx) * Ci * Co;
                    for (int ci = 0; ci < Ci; ++ci) {
                        double iv = ipix[ci];
                        if (iv == 0.0) continue;
                        const double* krow = kpix + (long long)ci * Co;
                        for (int co = 0; co < Co; ++co) opix[co] += iv * krow[co];
                    }
                }
            }
        }
    }
    return out;
}

void conv2d_same_backward(const Tensor& input, const Tensor& kernel, int stride,
                          const Tensor& grad_out, Tensor* grad_input, Tensor* grad_kernel) {
    int H = input.dim(0), W = input.dim(1), Ci = input.dim(2);
    int kh = kernel.dim(0), kw = kernel.dim(1), Co = kernel.dim(3);
    int Ho = grad_out.dim(0), Wo = grad_out.dim(1);
    int ph = kh / 2, pw = kw / 2;
    for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
            const double* gpix = grad_out.data() + ((long long)oy * Wo + ox) * Co;
            for (int dy = 0; dy < kh; ++dy) {
                int iy = oy * stride + dy - ph;
                if (iy < 0 || iy >= H) continue;
                for (int dx = 0; dx < kw; ++dx) {
                    int ix = ox * stride + dx - pw;
                    if (ix < 0 || ix >= W) continue;
                    const double* ipix = input.data() + ((long long)iy * W + ix) * Ci;
                    long long koff = ((long long)dy * kw + dx) * Ci * Co;
                    for (int ci = 0; ci < Ci; ++ci) {
                        const double* krow = kernel.data() + koff + (long long)ci * Co;
                        double gi = 0;
                        for (int co = 0; co < Co; ++co) gi += gpix[co] * krow[co];
                        if (grad_input)
                            (*grad_input)[((long long)iy * W + ix) * Ci + ci] += gi;
                        if (grad_kernel) {
                            double iv = ipix[ci];
                            if (iv != 0.0) {
                                double* gk = grad_kernel->data() + koff + (long long)ci * Co;
                                for (int co = 0; co < Co; ++co) gk[co] += iv * gpix[co];
                            }
                        }
                    }
                }
            }
        }
    }
}

// Symmetric (reflect-101) index fold; fixed analysis filters extend the
// signal by mirroring so constants are preserved up to the border.
static int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel) {
    require_rank3(input, "depthwise_conv2d");
    if (kernel.rank() != 2) throw ShapeError("depthwise_conv2d: kernel must be (kh,kw)");
    int H = input.dim(0), W = input.dim(1), C = input.dim(2);
    int kh = kernel.dim(0), kw = kernel.dim(1);
    if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("depthwise_conv2d: kernel extents must be odd");
    int ph = kh / 2, pw = kw / 2;
    Tensor out({H, W, C});
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double* opix = out.data() + ((long long)y * W + x) * C;
            for (int dy = 0; dy < kh; ++dy) {
                int iy = reflect_index(y + dy - ph, H);
                for (int dx = 0; dx < kw; ++dx) {
                    int ix = reflect_index(x + dx - pw, W);
                    double kv = kernel.at(dy, dx);
                    if (kv == 0.0) continue;
                    const double* ipix = input.data() + ((long long)iy * W + ix) * C;
                    for (int c = 0; c < C; ++c) opix[c] += kv * ipix[c];
                }
            }
        }
    }
    return out;
}

void depthwise_conv2d_backward(const Tensor& input, const Tensor& kernel,
                               const Tensor& grad_out, Tensor* grad_input) {
    if (!grad_input) return;
    int H = input.dim(0), W = input.dim(1), C = input.dim(2);
    int kh = kernel.dim(0), kw = kernel.dim(1);
    int ph = kh / 2, pw = kw / 2;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double* gpix = grad_out.data() + ((long long)y * W + x) * C;
            for (int dy = 0; dy < kh; ++dy) {
                int iy = reflect_index(y + dy - ph, H);
                for (int dx = 0; dx < kw; ++dx) {
                    int ix = reflect_index(x + dx - pw, W);
                    double kv = kernel.at(dy, dx);
                    if (kv == 0.0) continue;
                    double* gi = grad_input->data() + ((long long)iy * W + ix) * C;
                    for (int c = 0; c < C; ++c) gi[c] += kv * gpix[c];
                }
            }
        }
    }
}

Tensor decimate2(const Tensor& x) {
    require_rank3(x, "decimate2");
    int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    int Ho = ceil_div(H, 2), Wo = ceil_div(W, 2);
    Tensor out({Ho, Wo, C});
    for (int y = 0; y < Ho; ++y)
        for (int xw = 0; xw < Wo; ++xw)
            for (int c = 0; c < C; ++c) out.at(y, xw, c) = x.at(2 * y, 2 * xw, c);
    return out;
}

void decimate2_backward(const Tensor& x, const Tensor& grad_out, Tensor* grad_x) {
    if (!grad_x) return;
    int Ho = grad_out.dim(0), Wo = grad_out.dim(1), C = grad_out.dim(2);
    for (int y = 0; y < Ho; ++y)
        for (int xw = 0; xw < Wo; ++xw)
            for (int c = 0; c < C; ++c) grad_x->at(2 * y, 2 * xw, c) += grad_out.at(y, xw, c);
}

Tensor zero_upsample2(const Tensor& x, int ho, int wo) {
    require_rank3(x, "zero_upsample2");
    int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    if (ceil_div(ho, 2) != H || ceil_div(wo, 2) != W)
        throw ShapeError("zero_upsample2: inconsistent target extents");
    Tensor out({ho, wo, C});
    for (int y = 0; y < H; ++y)
        for (int xw = 0; xw < W; ++xw)
            for (int c = 0; c < C; ++c) out.at(2 * y, 2 * xw, c) = x.at(y, xw, c);
    return out;
}

void zero_upsample2_backward(const Tensor& x, const Tensor& grad_out, Tensor* grad_x) {
    if (!grad_x) return;
    int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    for (int y = 0; y < H; ++y)
        for (int xw = 0; xw < W; ++xw)
            for (int c = 0; c < C; ++c) grad_x->at(y, xw, c) += grad_out.at(2 * y, 2 * xw, c);
}

// Shared sample-position helper for bilinear kernels (half-pixel centers).
struct BilinTap {
    int i0, i1;
    double w0, w1;
};

static BilinTap bilin_tap(int o, int in_extent, int out_extent) {
    double scale = (double)in_extent / out_extent;
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    if (src > in_extent - 1) src = in_extent - 1;
    int i0 = (int)std::floor(src);
    int i1 = std::min(i0 + 1, in_extent - 1);
    double f = src - i0;
    return {i0, i1, 1.0 - f, f};
}

Tensor bilinear_resize(const Tensor& x, int ho, int wo) {
    require_rank3(x, "bilinear_resize");
    int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    Tensor out({ho, wo, C});
    for (int oy = 0; oy < ho; ++oy) {
        BilinTap ty = bilin_tap(oy, H, ho);
        for (int ox = 0; ox < wo; ++ox) {
            BilinTap tx = bilin_tap(ox, W, wo);
            for (int c = 0; c < C; ++c) {
                double v = ty.w0 * (tx.w0 * x.at(ty.i0, tx.i0, c) + tx.w1 * x.at(ty.i0, tx.i1, c)) +
                           ty.w1 * (tx.w0 * x.at(ty.i1, tx.i0, c) + tx.w1 * x.at(ty.i1, tx.i1, c));
                out.at(oy, ox, c) = v;
            }
        }
    }
    return out;
}

void bilinear_resize_backward(const Tensor& x, int ho, int wo, const Tensor& grad_out,
                              Tensor* grad_x) {
    if (!grad_x) return;
    int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    for (int oy = 0; oy < ho; ++oy) {
        BilinTap ty = bilin_tap(oy, H, ho);
        for (int ox = 0; ox < wo; ++ox) {
            BilinTap tx = bilin_tap(ox, W, wo);
            for (int c = 0; c < C; ++c) {
                double g = grad_out.at(oy, ox, c);
                grad_x->at(ty.i0, tx.i0, c) += g * ty.w0 * tx.w0;
                grad_x->at(ty.i0, tx.i1, c) += g * ty.w0 * tx.w1;
                grad_x->at(ty.i1, tx.i0, c) += g * ty.w1 * tx.w0;
                grad_x->at(ty.i1, tx.i1, c) += g * ty.w1 * tx.w1;
            }
        }
    }
}

Tensor avgpool_blocks(const Tensor& x, int ho, int wo) {
    require_rank3(x, "avgpool_blocks");
    int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    if (H % ho != 0 || W % wo != 0)
        throw ShapeError("avgpool_blocks: extents must divide evenly");
    int bh = H / ho, bw = W / wo;
    double inv = 1.0 / (bh * bw);
    Tensor out({ho, wo, C});
    for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox)
            for (int dy = 0; dy < bh; ++dy)
                for (int dx = 0; dx < bw; ++dx)
                    for (int c = 0; c < C; ++c)
                        out.at(oy, ox, c) += inv * x.at(oy * bh + dy, ox * bw + dx, c);
    return out;
}

void avgpool_blocks_backward(const Tensor& x, int ho, int wo, const Tensor& grad_out,
                             Tensor* grad_x) {
    if (!grad_x) return;
    int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    int bh = H / ho, bw = W / wo;
    double inv = 1.0 / (bh * bw);
    for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox)
            for (int dy = 0; dy < bh; ++dy)
                for (int dx = 0; dx < bw; ++dx)
                    for (int c = 0; c < C; ++c)
                        grad_x->at(oy * bh + dy, ox * bw + dx, c) += inv * grad_out.at(oy, ox, c);
}

}  // namespace ppt::kernels
