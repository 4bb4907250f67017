#include "lasnn/kernels.hpp"

#ifdef LASNN_HAVE_AVX2

#include <immintrin.h>

#include <cmath>

// AVX2 kernels. GEMM uses explicit FMA for throughput; elementwise kernels
// deliberately use separate mul/add so their rounding matches the scalar
// reference op for op. Remainder loops are plain scalar arithmetic identical
// to the reference, so any call with n below one vector width is bit-equal
// to the scalar backend.

namespace lasnn::kern {
namespace {

inline float hsum256(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 sh = _mm_movehdup_ps(lo);
  __m128 s = _mm_add_ps(lo, sh);
  sh = _mm_movehl_ps(sh, s);
  s = _mm_add_ss(s, sh);
  return _mm_cvtss_f32(s);
}

float a_dot(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float acc = hsum256(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void a_axpy(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 t = _mm256_add_ps(_mm256_loadu_ps(y + i),
                                   _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    _mm256_storeu_ps(y + i, t);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void a_scale(float alpha, float* x, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void a_mul(const float* a, const float* b, float* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void a_mul_add(const float* a, const float* b, float* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 t = _mm256_add_ps(
        _mm256_loadu_ps(y + i),
        _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    _mm256_storeu_ps(y + i, t);
  }
  for (; i < n; ++i) y[i] += a[i] * b[i];
}

template <bool TransA>
inline float a_at(const float* a, int lda, int row, int p) {
  return TransA ? a[static_cast<std::size_t>(p) * lda + row]
                : a[static_cast<std::size_t>(row) * lda + p];
}

// Broadcast-A microkernels: a 16-column block of B stays hot in L1 while we
// sweep rows of A. Each C element accumulates over k in ascending order.
template <bool TransA>
void micro_rows_x16(int i0, int rows, int j, int k, const float* a, int lda,
                    const float* b, int ldb, float* c, int ldc, bool accumulate) {
  __m256 acc[4][2];
  for (int r = 0; r < rows; ++r) {
    float* crow = c + static_cast<std::size_t>(i0 + r) * ldc + j;
    acc[r][0] = accumulate ? _mm256_loadu_ps(crow) : _mm256_setzero_ps();
    acc[r][1] = accumulate ? _mm256_loadu_ps(crow + 8) : _mm256_setzero_ps();
  }
  for (int p = 0; p < k; ++p) {
    const float* brow = b + static_cast<std::size_t>(p) * ldb + j;
    const __m256 b0 = _mm256_loadu_ps(brow);
    const __m256 b1 = _mm256_loadu_ps(brow + 8);
    for (int r = 0; r < rows; ++r) {
      const __m256 av = _mm256_set1_ps(a_at<TransA>(a, lda, i0 + r, p));
      acc[r][0] = _mm256_fmadd_ps(av, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_ps(av, b1, acc[r][1]);
    }
  }
  for (int r = 0; r < rows; ++r) {
    float* crow = c + static_cast<std::size_t>(i0 + r) * ldc + j;
    _mm256_storeu_ps(crow, acc[r][0]);
    _mm256_storeu_ps(crow + 8, acc[r][1]);
  }
}

template <bool TransA>
void micro_rows_x8(int i0, int rows, int j, int k, const float* a, int lda,
                   const float* b, int ldb, float* c, int ldc, bool accumulate) {
  __m256 acc[4];
  for (int r = 0; r < rows; ++r) {
    float* crow = c + static_cast<std::size_t>(i0 + r) * ldc + j;
    acc[r] = accumulate ? _mm256_loadu_ps(crow) : _mm256_setzero_ps();
  }
  for (int p = 0; p < k; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + static_cast<std::size_t>(p) * ldb + j);
    for (int r = 0; r < rows; ++r) {
      const __m256 av = _mm256_set1_ps(a_at<TransA>(a, lda, i0 + r, p));
      acc[r] = _mm256_fmadd_ps(av, b0, acc[r]);
    }
  }
  for (int r = 0; r < rows; ++r)
    _mm256_storeu_ps(c + static_cast<std::size_t>(i0 + r) * ldc + j, acc[r]);
}

template <bool TransA>
void a_gemm_bcast(int m, int n, int k, const float* a, int lda, const float* b,
                  int ldb, float* c, int ldc, bool accumulate) {
  int j = 0;
  for (; j + 16 <= n; j += 16) {
    int i = 0;
    for (; i + 4 <= m; i += 4)
      micro_rows_x16<TransA>(i, 4, j, k, a, lda, b, ldb, c, ldc, accumulate);
    if (i < m)
      micro_rows_x16<TransA>(i, m - i, j, k, a, lda, b, ldb, c, ldc, accumulate);
  }
  for (; j + 8 <= n; j += 8) {
    int i = 0;
    for (; i + 4 <= m; i += 4)
      micro_rows_x8<TransA>(i, 4, j, k, a, lda, b, ldb, c, ldc, accumulate);
    if (i < m)
      micro_rows_x8<TransA>(i, m - i, j, k, a, lda, b, ldb, c, ldc, accumulate);
  }
  // Remainder columns: same arithmetic order as the scalar reference.
  for (; j < n; ++j) {
    for (int i = 0; i < m; ++i) {
      float acc = accumulate ? c[static_cast<std::size_t>(i) * ldc + j] : 0.0f;
      for (int p = 0; p < k; ++p)
        acc += a_at<TransA>(a, lda, i, p) * b[static_cast<std::size_t>(p) * ldb + j];
      c[static_cast<std::size_t>(i) * ldc + j] = acc;
    }
  }
}

void a_gemm_nn(int m, int n, int k, const float* a, int lda, const float* b,
               int ldb, float* c, int ldc, bool accumulate) {
  a_gemm_bcast<false>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void a_gemm_tn(int m, int n, int k, const float* a, int lda, const float* b,
               int ldb, float* c, int ldc, bool accumulate) {
  a_gemm_bcast<true>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void a_gemm_nt(int m, int n, int k, const float* a, int lda, const float* b,
               int ldb, float* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<std::size_t>(i) * lda;
    float* crow = c + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const float d = a_dot(arow, b + static_cast<std::size_t>(j) * ldb,
                            static_cast<std::size_t>(k));
      crow[j] = accumulate ? crow[j] + d : d;
    }
  }
}

float a_reduce_max(const float* x, std::size_t n) {
  std::size_t i = 0;
  float m = x[0];
  if (n >= 8) {
    __m256 vm = _mm256_loadu_ps(x);
    for (i = 8; i + 8 <= n; i += 8) vm = _mm256_max_ps(vm, _mm256_loadu_ps(x + i));
    __m128 lo = _mm_max_ps(_mm256_castps256_ps128(vm), _mm256_extractf128_ps(vm, 1));
    lo = _mm_max_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_max_ss(lo, _mm_movehdup_ps(lo));
    m = _mm_cvtss_f32(lo);
  }
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

float a_reduce_sum(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float s = hsum256(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

float a_reduce_sumsq(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    acc = _mm256_fmadd_ps(v, v, acc);
  }
  float s = hsum256(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

void a_relu(const float* x, float* y, std::size_t n) {
  const __m256 z = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), z));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void a_relu_bwd(const float* x, const float* g, float* y, std::size_t n) {
  const __m256 z = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), z, _CMP_GT_OQ);
    _mm256_storeu_ps(y + i, _mm256_and_ps(mask, _mm256_loadu_ps(g + i)));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? g[i] : 0.0f;
}

void a_lif_step(float* v, const float* drive, const float* prev_spike,
                float* spike_out, std::size_t n, float leak, float theta) {
  const __m256 vleak = _mm256_set1_ps(leak);
  const __m256 vtheta = _mm256_set1_ps(theta);
  const __m256 ones = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vv = _mm256_add_ps(_mm256_mul_ps(vleak, _mm256_loadu_ps(v + i)),
                              _mm256_loadu_ps(drive + i));
    vv = _mm256_sub_ps(vv, _mm256_mul_ps(vtheta, _mm256_loadu_ps(prev_spike + i)));
    _mm256_storeu_ps(v + i, vv);
    const __m256 mask = _mm256_cmp_ps(vv, vtheta, _CMP_GT_OQ);
    _mm256_storeu_ps(spike_out + i, _mm256_and_ps(mask, ones));
  }
  for (; i < n; ++i) {
    const float vi = leak * v[i] + drive[i] - theta * prev_spike[i];
    v[i] = vi;
    spike_out[i] = vi > theta ? 1.0f : 0.0f;
  }
}

void a_surrogate(const float* v, float* out, std::size_t n, float theta,
                 float gamma) {
  const float inv_theta = 1.0f / theta;
  const __m256 vinv = _mm256_set1_ps(inv_theta);
  const __m256 vtheta = _mm256_set1_ps(theta);
  const __m256 vgamma = _mm256_set1_ps(gamma);
  const __m256 ones = _mm256_set1_ps(1.0f);
  const __m256 zero = _mm256_setzero_ps();
  const __m256 absmask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7FFFFFFF));
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 d =
        _mm256_and_ps(absmask, _mm256_sub_ps(_mm256_loadu_ps(v + i), vtheta));
    const __m256 s = _mm256_sub_ps(ones, _mm256_mul_ps(d, vinv));
    _mm256_storeu_ps(out + i, _mm256_mul_ps(vgamma, _mm256_max_ps(s, zero)));
  }
  for (; i < n; ++i) {
    const float d = 1.0f - std::fabs(v[i] - theta) * inv_theta;
    out[i] = d > 0.0f ? gamma * d : 0.0f;
  }
}

}  // namespace

const Table& avx2_table() {
  static const Table t = {
      "avx2",     a_dot,        a_axpy,     a_scale,     a_mul,
      a_mul_add,  a_gemm_nn,    a_gemm_nt,  a_gemm_tn,   a_reduce_max,
      a_reduce_sum, a_reduce_sumsq, a_relu, a_relu_bwd,  a_lif_step,
      a_surrogate};
  return t;
}

}  // namespace lasnn::kern

#endif  // LASNN_HAVE_AVX2
