#include "lasnn/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace lasnn::kern {

#ifdef LASNN_HAVE_AVX2
const Table& avx2_table();
bool avx2_compiled() { return true; }
bool avx2_supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#else
const Table& avx2_table() { return scalar_table(); }
bool avx2_compiled() { return false; }
bool avx2_supported() { return false; }
#endif

namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("LASNN_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0) {
      if (avx2_supported()) return Backend::Avx2;
      std::fprintf(stderr, "LASNN_KERNELS=avx2 requested but AVX2 is unavailable; using scalar kernels\n");
      return Backend::Scalar;
    }
    std::fprintf(stderr, "ignoring unknown LASNN_KERNELS value '%s'\n", env);
  }
  return avx2_supported() ? Backend::Avx2 : Backend::Scalar;
}

Backend& backend_ref() {
  static Backend b = initial_backend();
  return b;
}

}  // namespace

const Table& table() {
  return backend_ref() == Backend::Avx2 ? avx2_table() : scalar_table();
}

Backend active_backend() { return backend_ref(); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_supported())
    throw std::invalid_argument("AVX2 kernel backend is not available on this machine");
  backend_ref() = b;
}

}  // namespace lasnn::kern
