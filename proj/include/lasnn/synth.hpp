#pragma once

#include <cstdint>
#include <string>

namespace lasnn {

// Procedurally rendered 28x28 ten-class digit dataset in MNIST IDX format,
// for desk-scale runs when no real dataset is on disk. Digits are stroke
// glyphs rasterized with anti-aliasing under per-sample affine jitter
// (rotation, scale, shear, shift), stroke-thickness variation, glyph variants
// and additive pixel noise, so the task is learnable but not trivial.
// Generation is a pure function of (seed, split, index): rerunning produces
// byte-identical files.

struct SynthParams {
  int train = 4000;
  int test = 2400;
  std::uint64_t seed = 857581;  // dataset identity, independent of run seeds
  float noise = 0.10f;          // gaussian pixel noise sigma
};

// Renders one sample (28*28 bytes) into out; label is index % 10.
void synth_render(std::uint64_t seed, const char* split, int index, float noise,
                  unsigned char* out);

// Writes train-images-idx3-ubyte / train-labels-idx1-ubyte and the t10k pair
// under dir (created if needed). Skips work when all four files exist unless
// overwrite is set.
void synth_write_idx(const std::string& dir, const SynthParams& params,
                     bool overwrite = false);

}  // namespace lasnn
