#include "lasnn/rng.hpp"

#include <cmath>

namespace lasnn {

float Rng::next_gaussian() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  // Box-Muller on two uniforms; u clamped away from 0 so log stays finite.
  float u = next_float();
  if (u < 1e-12f) u = 1e-12f;
  const float v = next_float();
  const float r = std::sqrt(-2.0f * std::log(u));
  const float ang = 6.2831853071795864769f * v;
  cached_ = r * std::sin(ang);
  have_cached_ = true;
  return r * std::cos(ang);
}

}  // namespace lasnn
