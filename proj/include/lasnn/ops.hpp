#pragma once

#include "lasnn/rng.hpp"
#include "lasnn/tensor.hpp"

namespace lasnn::ops {

// Layer primitives. Each forward has an explicit exact backward; there is no
// autodiff tape. All maps are pure functions of their inputs.

// Cross-correlation convolution (the usual deep-learning convention, no
// kernel flip). input [N,C,H,W], kernel [F,C,kh,kw], bias [F] or null.
// Output [N,F,H',W'] with H' = (H + 2*pad - kh)/stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias,
              int stride, int pad);
// grad_input is always overwritten; weight/bias gradients overwrite unless
// accumulate is set (time-stepped training sums them across steps).
void conv2d_backward(const Tensor& grad_out, const Tensor& input,
                     const Tensor& kernel, int stride, int pad,
                     Tensor* grad_input, Tensor* grad_kernel, Tensor* grad_bias,
                     bool accumulate = false);

// input [N,D], weight [K,D], bias [K] or null -> [N,K].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor* bias);
void linear_backward(const Tensor& grad_out, const Tensor& input,
                     const Tensor& weight, Tensor* grad_input,
                     Tensor* grad_weight, Tensor* grad_bias,
                     bool accumulate = false);

// k x k mean pooling; spatial dims must be divisible by k.
Tensor avgpool2d(const Tensor& input, int k);
Tensor avgpool2d_backward(const Tensor& grad_out, int k);

// Max pooling exists so conversion validation has something real to reject;
// argmax_out records flat window offsets for the backward pass.
Tensor maxpool2d(const Tensor& input, int k, Tensor* argmax_out);
Tensor maxpool2d_backward(const Tensor& grad_out, const Tensor& argmax, int k);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

// Inverted dropout mask: entries are 0 with probability p, else 1/(1-p).
// Values are drawn from rng in element order.
Tensor dropout_mask(const Shape& shape, float p, Rng& rng);

// Corner-aligned bilinear resampling of a 2-D map. Identity when the target
// shape matches; a size-1 output dim samples index 0.
Tensor interpolate_bilinear(const Tensor& map, int out_h, int out_w);

struct BatchNormState {
  Tensor mean, invstd, xhat;  // saved by the training forward for backward
};

// Per-channel batchnorm over [N,C,H,W]. Training mode uses biased batch
// statistics and updates running stats in place with momentum; eval mode uses
// the running stats. eps = 1e-5.
Tensor batchnorm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                 Tensor& running_mean, Tensor& running_var, bool train,
                 float momentum, BatchNormState* state);
void batchnorm_backward(const Tensor& grad_out, const Tensor& input,
                        const Tensor& gamma, const BatchNormState& state,
                        Tensor* grad_input, Tensor* grad_gamma, Tensor* grad_beta);
// Backward through eval-mode batchnorm (an affine map); used for input
// sensitivity of a trained network.
void batchnorm_backward_eval(const Tensor& grad_out, const Tensor& gamma,
                             const Tensor& running_var, Tensor* grad_input);

}  // namespace lasnn::ops
