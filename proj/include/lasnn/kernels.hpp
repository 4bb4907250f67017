#pragma once

#include <cstddef>

namespace lasnn::kern {

// Data-parallel inner loops behind everything hot: GEMM for conv/linear,
// fused LIF membrane updates, elementwise maps and reductions.
//
// Two implementations exist: a scalar reference (plain IEEE float ops in
// source order, no FMA contraction) and an AVX2 variant using explicit FMA
// intrinsics. The active table is picked once at startup from CPU features;
// tests pin either backend and check the two agree. SIMD kernels fall back
// to the same plain-arithmetic tail loops as the scalar reference for
// remainder elements, so tiny sizes are bit-identical across backends.
//
// GEMM convention: row-major, C is M x N with leading dimension ldc.
//   gemm_nn: C (+)= A[M x K] * B[K x N]
//   gemm_nt: C (+)= A[M x K] * B[N x K]^T
//   gemm_tn: C (+)= A[K x M]^T * B[K x N]
// accumulate=false overwrites C, true adds into it. Each output element is a
// sequential sum over k in ascending order on every backend (the AVX2 nt
// kernel splits k across lanes, which is why nt is tolerance-tested only).
//
// lif_step implements the soft-reset membrane recurrence:
//   v[i] = leak * v[i] + drive[i] - theta * prev_spike[i]
//   spike[i] = v[i] > theta ? 1 : 0
// prev_spike and spike_out may alias.
//
// surrogate is the damped linear pseudo-derivative of the spike function:
//   out[i] = gamma * max(0, 1 - |v[i] - theta| * (1/theta))
// computed with a reciprocal multiply, not a divide, on all backends.

struct Table {
  const char* name;

  float (*dot)(const float* a, const float* b, std::size_t n);
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  void (*scale)(float alpha, float* x, std::size_t n);
  void (*mul)(const float* a, const float* b, float* y, std::size_t n);
  void (*mul_add)(const float* a, const float* b, float* y, std::size_t n);

  void (*gemm_nn)(int m, int n, int k, const float* a, int lda, const float* b,
                  int ldb, float* c, int ldc, bool accumulate);
  void (*gemm_nt)(int m, int n, int k, const float* a, int lda, const float* b,
                  int ldb, float* c, int ldc, bool accumulate);
  void (*gemm_tn)(int m, int n, int k, const float* a, int lda, const float* b,
                  int ldb, float* c, int ldc, bool accumulate);

  float (*reduce_max)(const float* x, std::size_t n);  // n >= 1
  float (*reduce_sum)(const float* x, std::size_t n);
  float (*reduce_sumsq)(const float* x, std::size_t n);

  void (*relu)(const float* x, float* y, std::size_t n);
  void (*relu_bwd)(const float* x, const float* g, float* y, std::size_t n);

  void (*lif_step)(float* v, const float* drive, const float* prev_spike,
                   float* spike_out, std::size_t n, float leak, float theta);
  void (*surrogate)(const float* v, float* out, std::size_t n, float theta,
                    float gamma);
};

enum class Backend { Scalar, Avx2 };

const Table& scalar_table();
bool avx2_compiled();
bool avx2_supported();

// Active table: AVX2 when the CPU has it, else scalar. LASNN_KERNELS=scalar
// or =avx2 in the environment overrides the automatic choice.
const Table& table();
Backend active_backend();
void set_backend(Backend b);  // throws if the backend is unavailable

}  // namespace lasnn::kern
