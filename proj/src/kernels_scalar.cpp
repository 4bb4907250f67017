#include "lasnn/kernels.hpp"

#include <cmath>

// Reference kernels. Every loop is plain IEEE float arithmetic in source
// order; the build disables FP contraction so these stay exact against
// independent scalar reimplementations.

namespace lasnn::kern {
namespace {

float s_dot(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void s_axpy(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_scale(float alpha, float* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void s_mul(const float* a, const float* b, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void s_mul_add(const float* a, const float* b, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

template <bool TransA>
void s_gemm_bcast(int m, int n, int k, const float* a, int lda, const float* b,
                  int ldb, float* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * ldc;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = 0.0f;
    }
    for (int p = 0; p < k; ++p) {
      const float av = TransA ? a[static_cast<std::size_t>(p) * lda + i]
                              : a[static_cast<std::size_t>(i) * lda + p];
      const float* brow = b + static_cast<std::size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void s_gemm_nn(int m, int n, int k, const float* a, int lda, const float* b,
               int ldb, float* c, int ldc, bool accumulate) {
  s_gemm_bcast<false>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void s_gemm_tn(int m, int n, int k, const float* a, int lda, const float* b,
               int ldb, float* c, int ldc, bool accumulate) {
  s_gemm_bcast<true>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void s_gemm_nt(int m, int n, int k, const float* a, int lda, const float* b,
               int ldb, float* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<std::size_t>(i) * lda;
    float* crow = c + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const float d = s_dot(arow, b + static_cast<std::size_t>(j) * ldb,
                            static_cast<std::size_t>(k));
      crow[j] = accumulate ? crow[j] + d : d;
    }
  }
}

float s_reduce_max(const float* x, std::size_t n) {
  float m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

float s_reduce_sum(const float* x, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

float s_reduce_sumsq(const float* x, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void s_relu(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void s_relu_bwd(const float* x, const float* g, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? g[i] : 0.0f;
}

void s_lif_step(float* v, const float* drive, const float* prev_spike,
                float* spike_out, std::size_t n, float leak, float theta) {
  for (std::size_t i = 0; i < n; ++i) {
    const float vi = leak * v[i] + drive[i] - theta * prev_spike[i];
    v[i] = vi;
    spike_out[i] = vi > theta ? 1.0f : 0.0f;
  }
}

void s_surrogate(const float* v, float* out, std::size_t n, float theta,
                 float gamma) {
  const float inv_theta = 1.0f / theta;
  for (std::size_t i = 0; i < n; ++i) {
    const float d = 1.0f - std::fabs(v[i] - theta) * inv_theta;
    out[i] = d > 0.0f ? gamma * d : 0.0f;
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table t = {
      "scalar",   s_dot,        s_axpy,     s_scale,     s_mul,
      s_mul_add,  s_gemm_nn,    s_gemm_nt,  s_gemm_tn,   s_reduce_max,
      s_reduce_sum, s_reduce_sumsq, s_relu, s_relu_bwd,  s_lif_step,
      s_surrogate};
  return t;
}

}  // namespace lasnn::kern
