#pragma once

#include "cosmo/tg/tensor.hpp"

namespace tg {

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar s);
Tensor add_const(const Tensor& a, Scalar c);
Tensor relu(const Tensor& x, Scalar negative_slope = Scalar(0));
Tensor tanh_op(const Tensor& x);

// ---- reductions / losses ----
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor l1_loss(const Tensor& a, const Tensor& b);        // mean |a-b|
Tensor mse_loss(const Tensor& a, const Tensor& b);       // mean (a-b)^2
Tensor mse_to_const(const Tensor& x, Scalar target);     // mean (x - target)^2

// ---- shape ----
Tensor reshape(const Tensor& x, const std::vector<int>& shape);
Tensor concat_channels(const Tensor& a, const Tensor& b);          // dim 1 of NCHW
Tensor narrow_cols(const Tensor& x, int start, int len);           // dim 1 of [N,F]

// ---- neural network layers (NCHW) ----
// weight [O,I,K,K], bias [O] (bias may be undefined)
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
// weight [I,O,K,K]; output spatial = (H-1)*stride - 2*pad + K
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor upsample_nearest2d(const Tensor& x, int factor);
// x [N,I], w [O,I], b [O]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor adaptive_avg_pool2d(const Tensor& x, int out_h, int out_w);
// per-(instance,channel) normalization with population variance
Tensor instance_norm(const Tensor& x, Scalar eps = Scalar(1e-5));
// per-(instance,channel) affine: g,b of shape [N,C]
Tensor channel_affine(const Tensor& x, const Tensor& g, const Tensor& b);
// adaptive instance normalization: channel_affine(instance_norm(x), gamma, beta)
Tensor adain(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps = Scalar(1e-5));

// Spectrally scaled weight W / sigma with sigma = u^T W v; u, v are constants
// estimated by power iteration. Works on any weight viewed as [rows, cols]
// where rows = shape[0] and cols = numel/shape[0].
Tensor spectral_norm_apply(const Tensor& w, const std::vector<Scalar>& u,
                           const std::vector<Scalar>& v);

// One power-iteration step on W viewed as [rows, cols]: updates u in place,
// writes the matching v, returns sigma = u^T W v.
Scalar power_iteration_step(const std::vector<Scalar>& w, int rows, int cols,
                            std::vector<Scalar>& u, std::vector<Scalar>& v);

// Runs `iters` power-iteration steps from a fixed deterministic start vector
// and returns W / sigma (plain data, no graph).
std::vector<Scalar> spectral_normalize(const std::vector<Scalar>& w, int rows, int cols,
                                       int iters, Scalar* sigma_out = nullptr);

}  // namespace tg
