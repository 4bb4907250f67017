#include "lasnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "lasnn/kernels.hpp"

namespace lasnn::ops {
namespace {

// Grow-only per-thread scratch for im2col panels.
thread_local std::vector<float> tl_cols;

struct ConvDims {
  int N, C, H, W, F, kh, kw, oh, ow, ckk, span;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  if (input.ndim() != 4 || kernel.ndim() != 4)
    throw std::invalid_argument("conv2d: input " + shape_str(input.shape) + " and kernel " +
                                shape_str(kernel.shape) + " must be 4-D");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
  ConvDims d;
  d.N = input.dim(0); d.C = input.dim(1); d.H = input.dim(2); d.W = input.dim(3);
  d.F = kernel.dim(0); d.kh = kernel.dim(2); d.kw = kernel.dim(3);
  if (kernel.dim(1) != d.C)
    throw std::invalid_argument("conv2d: kernel channels " + std::to_string(kernel.dim(1)) +
                                " do not match input channels " + std::to_string(d.C));
  if (d.kh > d.H + 2 * pad || d.kw > d.W + 2 * pad)
    throw std::invalid_argument("conv2d: kernel " + std::to_string(d.kh) + "x" +
                                std::to_string(d.kw) + " exceeds padded input " +
                                std::to_string(d.H + 2 * pad) + "x" + std::to_string(d.W + 2 * pad));
  d.oh = (d.H + 2 * pad - d.kh) / stride + 1;
  d.ow = (d.W + 2 * pad - d.kw) / stride + 1;
  d.ckk = d.C * d.kh * d.kw;
  d.span = d.oh * d.ow;
  return d;
}

void im2col(const float* x, const ConvDims& d, int stride, int pad, float* cols) {
  for (int c = 0; c < d.C; ++c) {
    const float* xc = x + static_cast<std::size_t>(c) * d.H * d.W;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        float* crow = cols + (static_cast<std::size_t>(c * d.kh + ky) * d.kw + kx) * d.span;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          float* dst = crow + static_cast<std::size_t>(oy) * d.ow;
          if (iy < 0 || iy >= d.H) {
            std::memset(dst, 0, sizeof(float) * d.ow);
            continue;
          }
          const float* src = xc + static_cast<std::size_t>(iy) * d.W;
          if (stride == 1) {
            const int ox0 = std::max(0, pad - kx);
            const int ox1 = std::min(d.ow, d.W + pad - kx);
            if (ox0 > 0) std::memset(dst, 0, sizeof(float) * ox0);
            if (ox1 > ox0)
              std::memcpy(dst + ox0, src + ox0 - pad + kx, sizeof(float) * (ox1 - ox0));
            if (ox1 < d.ow) std::memset(dst + ox1, 0, sizeof(float) * (d.ow - ox1));
          } else {
            for (int ox = 0; ox < d.ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              dst[ox] = (ix >= 0 && ix < d.W) ? src[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, const ConvDims& d, int stride, int pad, float* x) {
  for (int c = 0; c < d.C; ++c) {
    float* xc = x + static_cast<std::size_t>(c) * d.H * d.W;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const float* crow = cols + (static_cast<std::size_t>(c * d.kh + ky) * d.kw + kx) * d.span;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= d.H) continue;
          float* dst = xc + static_cast<std::size_t>(iy) * d.W;
          const float* src = crow + static_cast<std::size_t>(oy) * d.ow;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < d.W) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias,
              int stride, int pad) {
  const ConvDims d = conv_dims(input, kernel, stride, pad);
  if (bias && bias->numel() != d.F)
    throw std::invalid_argument("conv2d: bias length " + std::to_string(bias->numel()) +
                                " does not match filter count " + std::to_string(d.F));
  Tensor out({d.N, d.F, d.oh, d.ow});
  const auto& k = kern::table();
#pragma omp parallel for schedule(static)
  for (int n = 0; n < d.N; ++n) {
    tl_cols.resize(static_cast<std::size_t>(d.ckk) * d.span);
    im2col(input.ptr() + static_cast<std::size_t>(n) * d.C * d.H * d.W, d, stride, pad,
           tl_cols.data());
    float* out_n = out.ptr() + static_cast<std::size_t>(n) * d.F * d.span;
    k.gemm_nn(d.F, d.span, d.ckk, kernel.ptr(), d.ckk, tl_cols.data(), d.span, out_n,
              d.span, false);
    if (bias) {
      for (int f = 0; f < d.F; ++f) {
        float* row = out_n + static_cast<std::size_t>(f) * d.span;
        const float bv = (*bias)[f];
        for (int s = 0; s < d.span; ++s) row[s] += bv;
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& grad_out, const Tensor& input,
                     const Tensor& kernel, int stride, int pad,
                     Tensor* grad_input, Tensor* grad_kernel, Tensor* grad_bias,
                     bool accumulate) {
  const ConvDims d = conv_dims(input, kernel, stride, pad);
  require_shape(grad_out, {d.N, d.F, d.oh, d.ow}, "conv2d_backward grad_out");
  const auto& k = kern::table();

  if (grad_input && grad_input->shape != input.shape) *grad_input = Tensor(input.shape);
  if (grad_kernel && grad_kernel->shape != kernel.shape) *grad_kernel = Tensor(kernel.shape);
  if (grad_bias && grad_bias->shape != Shape{d.F}) *grad_bias = Tensor({d.F});
  if (!accumulate) {
    if (grad_kernel) grad_kernel->fill(0.0f);
    if (grad_bias) grad_bias->fill(0.0f);
  }

  // Per-sample weight/bias partials, reduced in ascending sample order below,
  // keep gradient sums independent of the thread count.
  std::vector<float> gw_part, gb_part;
  if (grad_kernel) gw_part.assign(static_cast<std::size_t>(d.N) * d.F * d.ckk, 0.0f);
  if (grad_bias) gb_part.assign(static_cast<std::size_t>(d.N) * d.F, 0.0f);

#pragma omp parallel for schedule(static)
  for (int n = 0; n < d.N; ++n) {
    const std::size_t cols_sz = static_cast<std::size_t>(d.ckk) * d.span;
    const float* go_n = grad_out.ptr() + static_cast<std::size_t>(n) * d.F * d.span;
    if (grad_kernel || grad_input) tl_cols.resize(cols_sz * 2);
    float* cols = tl_cols.data();
    float* dcols = tl_cols.data() + cols_sz;
    if (grad_kernel) {
      im2col(input.ptr() + static_cast<std::size_t>(n) * d.C * d.H * d.W, d, stride, pad, cols);
      k.gemm_nt(d.F, d.ckk, d.span, go_n, d.span, cols, d.span,
                gw_part.data() + static_cast<std::size_t>(n) * d.F * d.ckk, d.ckk, false);
    }
    if (grad_input) {
      k.gemm_tn(d.ckk, d.span, d.F, kernel.ptr(), d.ckk, go_n, d.span, dcols, d.span, false);
      float* gx_n = grad_input->ptr() + static_cast<std::size_t>(n) * d.C * d.H * d.W;
      std::memset(gx_n, 0, sizeof(float) * d.C * d.H * d.W);
      col2im_add(dcols, d, stride, pad, gx_n);
    }
    if (grad_bias) {
      float* gb_n = gb_part.data() + static_cast<std::size_t>(n) * d.F;
      for (int f = 0; f < d.F; ++f)
        gb_n[f] = k.reduce_sum(go_n + static_cast<std::size_t>(f) * d.span,
                               static_cast<std::size_t>(d.span));
    }
  }

  if (grad_kernel) {
    for (int n = 0; n < d.N; ++n)
      kern::table().axpy(1.0f, gw_part.data() + static_cast<std::size_t>(n) * d.F * d.ckk,
                         grad_kernel->ptr(), static_cast<std::size_t>(d.F) * d.ckk);
  }
  if (grad_bias) {
    for (int n = 0; n < d.N; ++n)
      for (int f = 0; f < d.F; ++f) (*grad_bias)[f] += gb_part[static_cast<std::size_t>(n) * d.F + f];
  }
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor* bias) {
  if (input.ndim() != 2 || weight.ndim() != 2)
    throw std::invalid_argument("linear: input " + shape_str(input.shape) + " and weight " +
                                shape_str(weight.shape) + " must be 2-D");
  const int n = input.dim(0), dIn = input.dim(1), kOut = weight.dim(0);
  if (weight.dim(1) != dIn)
    throw std::invalid_argument("linear: weight inner dim " + std::to_string(weight.dim(1)) +
                                " does not match input dim " + std::to_string(dIn));
  if (bias && bias->numel() != kOut)
    throw std::invalid_argument("linear: bias length mismatch");
  Tensor out({n, kOut});
  const auto& k = kern::table();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    float* row = out.ptr() + static_cast<std::size_t>(i) * kOut;
    k.gemm_nt(1, kOut, dIn, input.ptr() + static_cast<std::size_t>(i) * dIn, dIn,
              weight.ptr(), dIn, row, kOut, false);
    if (bias)
      for (int j = 0; j < kOut; ++j) row[j] += (*bias)[j];
  }
  return out;
}

void linear_backward(const Tensor& grad_out, const Tensor& input,
                     const Tensor& weight, Tensor* grad_input,
                     Tensor* grad_weight, Tensor* grad_bias, bool accumulate) {
  const int n = input.dim(0), dIn = input.dim(1), kOut = weight.dim(0);
  require_shape(grad_out, {n, kOut}, "linear_backward grad_out");
  const auto& k = kern::table();
  if (grad_input) {
    if (grad_input->shape != input.shape) *grad_input = Tensor(input.shape);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
      k.gemm_nn(1, dIn, kOut, grad_out.ptr() + static_cast<std::size_t>(i) * kOut, kOut,
                weight.ptr(), dIn, grad_input->ptr() + static_cast<std::size_t>(i) * dIn,
                dIn, false);
  }
  if (grad_weight) {
    if (grad_weight->shape != weight.shape) *grad_weight = Tensor(weight.shape);
    k.gemm_tn(kOut, dIn, n, grad_out.ptr(), kOut, input.ptr(), dIn, grad_weight->ptr(),
              dIn, accumulate);
  }
  if (grad_bias) {
    if (grad_bias->shape != Shape{kOut}) *grad_bias = Tensor({kOut});
    if (!accumulate) grad_bias->fill(0.0f);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < kOut; ++j)
        (*grad_bias)[j] += grad_out[static_cast<std::size_t>(i) * kOut + j];
  }
}

Tensor avgpool2d(const Tensor& input, int k) {
  if (input.ndim() != 4) throw std::invalid_argument("avgpool2d: input must be 4-D");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (k < 1 || h % k != 0 || w % k != 0)
    throw std::invalid_argument("avgpool2d: spatial dims " + std::to_string(h) + "x" +
                                std::to_string(w) + " not divisible by window " + std::to_string(k));
  const int oh = h / k, ow = w / k;
  const float inv = 1.0f / static_cast<float>(k * k);
  Tensor out({n, c, oh, ow});
  for (int img = 0; img < n * c; ++img) {
    const float* src = input.ptr() + static_cast<std::size_t>(img) * h * w;
    float* dst = out.ptr() + static_cast<std::size_t>(img) * oh * ow;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        float acc = 0.0f;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            acc += src[static_cast<std::size_t>(oy * k + dy) * w + ox * k + dx];
        dst[static_cast<std::size_t>(oy) * ow + ox] = acc * inv;
      }
  }
  return out;
}

Tensor avgpool2d_backward(const Tensor& grad_out, int k) {
  const int n = grad_out.dim(0), c = grad_out.dim(1), oh = grad_out.dim(2), ow = grad_out.dim(3);
  const int h = oh * k, w = ow * k;
  const float inv = 1.0f / static_cast<float>(k * k);
  Tensor gx({n, c, h, w});
  for (int img = 0; img < n * c; ++img) {
    const float* src = grad_out.ptr() + static_cast<std::size_t>(img) * oh * ow;
    float* dst = gx.ptr() + static_cast<std::size_t>(img) * h * w;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const float g = src[static_cast<std::size_t>(oy) * ow + ox] * inv;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            dst[static_cast<std::size_t>(oy * k + dy) * w + ox * k + dx] = g;
      }
  }
  return gx;
}

Tensor maxpool2d(const Tensor& input, int k, Tensor* argmax_out) {
  if (input.ndim() != 4) throw std::invalid_argument("maxpool2d: input must be 4-D");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (k < 1 || h % k != 0 || w % k != 0)
    throw std::invalid_argument("maxpool2d: spatial dims not divisible by window");
  const int oh = h / k, ow = w / k;
  Tensor out({n, c, oh, ow});
  if (argmax_out) *argmax_out = Tensor({n, c, oh, ow});
  for (int img = 0; img < n * c; ++img) {
    const float* src = input.ptr() + static_cast<std::size_t>(img) * h * w;
    float* dst = out.ptr() + static_cast<std::size_t>(img) * oh * ow;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        float best = src[static_cast<std::size_t>(oy * k) * w + ox * k];
        int besti = 0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx) {
            const float v = src[static_cast<std::size_t>(oy * k + dy) * w + ox * k + dx];
            if (v > best) { best = v; besti = dy * k + dx; }
          }
        dst[static_cast<std::size_t>(oy) * ow + ox] = best;
        if (argmax_out)
          (*argmax_out)[static_cast<std::size_t>(img) * oh * ow + oy * ow + ox] =
              static_cast<float>(besti);
      }
  }
  return out;
}

Tensor maxpool2d_backward(const Tensor& grad_out, const Tensor& argmax, int k) {
  const int n = grad_out.dim(0), c = grad_out.dim(1), oh = grad_out.dim(2), ow = grad_out.dim(3);
  Tensor gx({n, c, oh * k, ow * k});
  const int w = ow * k;
  for (int img = 0; img < n * c; ++img) {
    const float* src = grad_out.ptr() + static_cast<std::size_t>(img) * oh * ow;
    const float* am = argmax.ptr() + static_cast<std::size_t>(img) * oh * ow;
    float* dst = gx.ptr() + static_cast<std::size_t>(img) * oh * k * w;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const int besti = static_cast<int>(am[static_cast<std::size_t>(oy) * ow + ox]);
        const int dy = besti / k, dx = besti % k;
        dst[static_cast<std::size_t>(oy * k + dy) * w + ox * k + dx] +=
            src[static_cast<std::size_t>(oy) * ow + ox];
      }
  }
  return gx;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape);
  kern::table().relu(input.ptr(), out.ptr(), input.data.size());
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  Tensor gx(input.shape);
  kern::table().relu_bwd(input.ptr(), grad_out.ptr(), gx.ptr(), input.data.size());
  return gx;
}

Tensor dropout_mask(const Shape& shape, float p, Rng& rng) {
  if (p < 0.0f || p >= 1.0f)
    throw std::invalid_argument("dropout: probability must be in [0,1)");
  Tensor mask(shape);
  const float keep_scale = 1.0f / (1.0f - p);
  for (float& m : mask.data) m = rng.next_float() >= p ? keep_scale : 0.0f;
  return mask;
}

Tensor interpolate_bilinear(const Tensor& map, int out_h, int out_w) {
  if (map.ndim() != 2) throw std::invalid_argument("interpolate_bilinear: map must be 2-D");
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("interpolate_bilinear: target dims must be >= 1");
  const int h = map.dim(0), w = map.dim(1);
  if (h == out_h && w == out_w) return map;
  Tensor out({out_h, out_w});
  const float sy = out_h > 1 ? static_cast<float>(h - 1) / static_cast<float>(out_h - 1) : 0.0f;
  const float sx = out_w > 1 ? static_cast<float>(w - 1) / static_cast<float>(out_w - 1) : 0.0f;
  for (int i = 0; i < out_h; ++i) {
    const float fy = static_cast<float>(i) * sy;
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const float wy = fy - static_cast<float>(y0);
    for (int j = 0; j < out_w; ++j) {
      const float fx = static_cast<float>(j) * sx;
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const float wx = fx - static_cast<float>(x0);
      const float top = (1.0f - wx) * map.at(y0, x0) + wx * map.at(y0, x1);
      const float bot = (1.0f - wx) * map.at(y1, x0) + wx * map.at(y1, x1);
      out.at(i, j) = (1.0f - wy) * top + wy * bot;
    }
  }
  return out;
}

Tensor batchnorm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                 Tensor& running_mean, Tensor& running_var, bool train,
                 float momentum, BatchNormState* state) {
  if (input.ndim() != 4) throw std::invalid_argument("batchnorm: input must be 4-D");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t m = static_cast<std::size_t>(n) * plane;
  constexpr float kEps = 1e-5f;
  Tensor out(input.shape);

  Tensor mean({c}), invstd({c});
  if (train) {
    // Batch statistics accumulated in double; m can exceed 1e4 elements.
    for (int ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (int img = 0; img < n; ++img) {
        const float* src = input.ptr() + (static_cast<std::size_t>(img) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += src[i];
      }
      const float mu = static_cast<float>(s / static_cast<double>(m));
      double v = 0.0;
      for (int img = 0; img < n; ++img) {
        const float* src = input.ptr() + (static_cast<std::size_t>(img) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = static_cast<double>(src[i]) - mu;
          v += d * d;
        }
      }
      const float var = static_cast<float>(v / static_cast<double>(m));
      mean[ch] = mu;
      invstd[ch] = 1.0f / std::sqrt(var + kEps);
      running_mean[ch] = (1.0f - momentum) * running_mean[ch] + momentum * mu;
      running_var[ch] = (1.0f - momentum) * running_var[ch] + momentum * var;
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean[ch];
      invstd[ch] = 1.0f / std::sqrt(running_var[ch] + kEps);
    }
  }

  Tensor xhat;
  if (train && state) xhat = Tensor(input.shape);
  for (int img = 0; img < n; ++img)
    for (int ch = 0; ch < c; ++ch) {
      const float* src = input.ptr() + (static_cast<std::size_t>(img) * c + ch) * plane;
      float* dst = out.ptr() + (static_cast<std::size_t>(img) * c + ch) * plane;
      float* xh = (train && state)
                      ? xhat.ptr() + (static_cast<std::size_t>(img) * c + ch) * plane
                      : nullptr;
      const float mu = mean[ch], is = invstd[ch], g = gamma[ch], b = beta[ch];
      for (std::size_t i = 0; i < plane; ++i) {
        const float xn = (src[i] - mu) * is;
        if (xh) xh[i] = xn;
        dst[i] = g * xn + b;
      }
    }
  if (train && state) {
    state->mean = std::move(mean);
    state->invstd = std::move(invstd);
    state->xhat = std::move(xhat);
  }
  return out;
}

void batchnorm_backward(const Tensor& grad_out, const Tensor& input,
                        const Tensor& gamma, const BatchNormState& state,
                        Tensor* grad_input, Tensor* grad_gamma, Tensor* grad_beta) {
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const double m = static_cast<double>(n) * static_cast<double>(plane);
  if (grad_input && grad_input->shape != input.shape) *grad_input = Tensor(input.shape);
  if (grad_gamma && grad_gamma->shape != Shape{c}) *grad_gamma = Tensor({c});
  if (grad_beta && grad_beta->shape != Shape{c}) *grad_beta = Tensor({c});

  for (int ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int img = 0; img < n; ++img) {
      const std::size_t off = (static_cast<std::size_t>(img) * c + ch) * plane;
      const float* dy = grad_out.ptr() + off;
      const float* xh = state.xhat.ptr() + off;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
      }
    }
    if (grad_gamma) (*grad_gamma)[ch] += static_cast<float>(sum_dy_xhat);
    if (grad_beta) (*grad_beta)[ch] += static_cast<float>(sum_dy);
    if (grad_input) {
      const float g = gamma[ch], is = state.invstd[ch];
      const float c1 = static_cast<float>(sum_dy / m);
      const float c2 = static_cast<float>(sum_dy_xhat / m);
      for (int img = 0; img < n; ++img) {
        const std::size_t off = (static_cast<std::size_t>(img) * c + ch) * plane;
        const float* dy = grad_out.ptr() + off;
        const float* xh = state.xhat.ptr() + off;
        float* dx = grad_input->ptr() + off;
        for (std::size_t i = 0; i < plane; ++i)
          dx[i] = g * is * (dy[i] - c1 - xh[i] * c2);
      }
    }
  }
}

void batchnorm_backward_eval(const Tensor& grad_out, const Tensor& gamma,
                             const Tensor& running_var, Tensor* grad_input) {
  const int n = grad_out.dim(0), c = grad_out.dim(1), h = grad_out.dim(2), w = grad_out.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  constexpr float kEps = 1e-5f;
  if (grad_input->shape != grad_out.shape) *grad_input = Tensor(grad_out.shape);
  for (int img = 0; img < n; ++img)
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = (static_cast<std::size_t>(img) * c + ch) * plane;
      const float scale = gamma[ch] / std::sqrt(running_var[ch] + kEps);
      const float* dy = grad_out.ptr() + off;
      float* dx = grad_input->ptr() + off;
      for (std::size_t i = 0; i < plane; ++i) dx[i] = scale * dy[i];
    }
}

}  // namespace lasnn::ops
