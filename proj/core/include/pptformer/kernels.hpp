#pragma once

#include "pptformer/tensor.hpp"

namespace ppt::kernels {

// Dense matrix products on rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);     // (M,K)x(K,N) -> (M,N)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (M,K)x(N,K)^T -> (M,N)
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // (K,M)^T x (K,N) -> (M,N)

// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& m);

// Zero-padded "same" correlation. input (H,W,Cin), kernel (kh,kw,Cin,Cout),
// odd kh/kw; output (ceil(H/s), ceil(W/s), Cout).
Tensor conv2d_same(const Tensor& input, const Tensor& kernel, int stride);
// Accumulates input/kernel gradients for conv2d_same; either output may be null.
void conv2d_same_backward(const Tensor& input, const Tensor& kernel, int stride,
                          const Tensor& grad_out, Tensor* grad_input, Tensor* grad_kernel);

// Per-channel correlation with a single (kh,kw) kernel, stride 1, zero-padded.
Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel);
void depthwise_conv2d_backward(const Tensor& input, const Tensor& kernel,
                               const Tensor& grad_out, Tensor* grad_input);

// Keep every second pixel starting at index 0; output ceil(H/2) x ceil(W/2).
Tensor decimate2(const Tensor& x);
void decimate2_backward(const Tensor& x, const Tensor& grad_out, Tensor* grad_x);

// Place x at even coordinates of an (ho, wo) grid, zeros elsewhere.
Tensor zero_upsample2(const Tensor& x, int ho, int wo);
void zero_upsample2_backward(const Tensor& x, const Tensor& grad_out, Tensor* grad_x);

// Bilinear resize with half-pixel centers.
Tensor bilinear_resize(const Tensor& x, int ho, int wo);
void bilinear_resize_backward(const Tensor& x, int ho, int wo, const Tensor& grad_out,
                              Tensor* grad_x);

// Block average pooling; input extents must divide evenly by (ho, wo).
Tensor avgpool_blocks(const Tensor& x, int ho, int wo);
void avgpool_blocks_backward(const Tensor& x, int ho, int wo, const Tensor& grad_out,
                             Tensor* grad_x);

}  // namespace ppt::kernels
