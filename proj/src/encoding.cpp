#include "lasnn/encoding.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "lasnn/rng.hpp"

namespace lasnn {

void poisson_slice(const float* image, std::size_t n, int t, std::uint64_t seed,
                   float* out) {
  Rng rng(combine64(seed, static_cast<std::uint64_t>(t)));
  for (std::size_t i = 0; i < n; ++i) {
    const float p = image[i];
    const float u = rng.next_float();
    if (u < std::fabs(p))
      out[i] = p > 0.0f ? 1.0f : -1.0f;
    else
      out[i] = 0.0f;
  }
}

SpikeTrain poisson_encode(const Tensor& image, int T, std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("poisson_encode: T must be >= 1");
  if (image.ndim() != 3)
    throw std::invalid_argument("poisson_encode: image must be [C,H,W]");
  SpikeTrain st;
  st.coding = Coding::Poisson;
  st.values = Tensor({T, image.dim(0), image.dim(1), image.dim(2)});
  const std::size_t stride = image.data.size();
  for (int t = 0; t < T; ++t)
    poisson_slice(image.ptr(), stride, t, seed,
                  st.values.ptr() + static_cast<std::size_t>(t) * stride);
  return st;
}

SpikeTrain direct_encode(const Tensor& image, int T) {
  if (T < 1) throw std::invalid_argument("direct_encode: T must be >= 1");
  if (image.ndim() != 3)
    throw std::invalid_argument("direct_encode: image must be [C,H,W]");
  SpikeTrain st;
  st.coding = Coding::Direct;
  st.values = Tensor({T, image.dim(0), image.dim(1), image.dim(2)});
  const std::size_t stride = image.data.size();
  for (int t = 0; t < T; ++t)
    std::memcpy(st.values.ptr() + static_cast<std::size_t>(t) * stride, image.ptr(),
                stride * sizeof(float));
  return st;
}

BatchEncoder::BatchEncoder(Coding coding, const Tensor& images,
                           std::vector<std::uint64_t> seeds)
    : coding_(coding), images_(&images), seeds_(std::move(seeds)) {
  if (images.ndim() != 4)
    throw std::invalid_argument("BatchEncoder: images must be [N,C,H,W]");
  if (coding_ == Coding::Poisson &&
      seeds_.size() != static_cast<std::size_t>(images.dim(0)))
    throw std::invalid_argument("BatchEncoder: one seed per sample required");
}

void BatchEncoder::slice(int t, Tensor* out) const {
  if (out->shape != images_->shape) *out = Tensor(images_->shape);
  if (coding_ == Coding::Direct) {
    std::memcpy(out->ptr(), images_->ptr(), images_->data.size() * sizeof(float));
    return;
  }
  const int n = images_->dim(0);
  const std::size_t stride = images_->data.size() / static_cast<std::size_t>(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i)
    poisson_slice(images_->ptr() + static_cast<std::size_t>(i) * stride, stride, t,
                  seeds_[static_cast<std::size_t>(i)],
                  out->ptr() + static_cast<std::size_t>(i) * stride);
}

}  // namespace lasnn
