#pragma once

#include <cstdint>
#include <vector>

#include "lasnn/tensor.hpp"

namespace lasnn {

enum class Coding { Poisson, Direct };

// Spike train over T steps. Poisson entries are signed spikes in {-1,0,+1}:
// a pixel p fires sign(p) with probability |p| per step, so rates carry the
// magnitude and the spike sign carries the sign of the normalized pixel.
// Direct coding replicates the analog image at every step.
struct SpikeTrain {
  Tensor values;  // [T,C,H,W]
  Coding coding = Coding::Poisson;
  int steps() const { return values.dim(0); }
};

// The Poisson draw for (t, pixel i) comes from the counter stream
// Rng(combine64(seed, t)) consumed in pixel order, so single slices can be
// regenerated without materializing the whole train.
SpikeTrain poisson_encode(const Tensor& image, int T, std::uint64_t seed);
SpikeTrain direct_encode(const Tensor& image, int T);

// One step of the Poisson stream for n pixels into out.
void poisson_slice(const float* image, std::size_t n, int t, std::uint64_t seed,
                   float* out);

// Step-at-a-time batch encoder used by the simulation loop; sample n draws
// from its own seed, matching poisson_encode(image_n, T, seeds[n]) exactly.
class BatchEncoder {
 public:
  BatchEncoder(Coding coding, const Tensor& images, std::vector<std::uint64_t> seeds);
  // Writes the step-t input [N,C,H,W] into out.
  void slice(int t, Tensor* out) const;
  Coding coding() const { return coding_; }
  const Tensor& images() const { return *images_; }

 private:
  Coding coding_;
  const Tensor* images_;
  std::vector<std::uint64_t> seeds_;
};

}  // namespace lasnn
