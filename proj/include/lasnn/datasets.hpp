#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lasnn/rng.hpp"
#include "lasnn/tensor.hpp"

namespace lasnn {

// Image with pixels normalized to [-1,1]: raw byte p maps to p/127.5 - 1,
// inverted exactly by round((x+1)*127.5).
struct LabeledImage {
  Tensor pixels;  // [C,H,W]
  int label = 0;
};

struct DatasetSpec {
  std::string name;
  int classes = 10;
  Shape image_shape;                            // [C,H,W]
  std::vector<std::string> train_paths;         // idx: {images, labels}; cifar10: batch files
  std::vector<std::string> test_paths;
  int train_subset = 0, test_subset = 0;        // 0 = full split
  std::uint64_t subset_seed = 0;
};

// MNIST-style IDX pair (big-endian headers, magics 0x803/0x801).
std::vector<LabeledImage> load_idx(const std::string& images_path,
                                   const std::string& labels_path);

// CIFAR-10 binary batches: 3073-byte records, 1 label byte + R,G,B planes.
std::vector<LabeledImage> load_cifar10(const std::vector<std::string>& batch_paths);

// Deterministic subset: a seed-keyed shuffle of the indices, first `count`
// kept in shuffled order. count <= 0 or >= size returns everything.
std::vector<LabeledImage> subset(std::vector<LabeledImage> items, int count,
                                 std::uint64_t seed);

std::vector<LabeledImage> load_split(const DatasetSpec& spec, bool train);

struct Batch {
  Tensor images;              // [N,C,H,W]
  std::vector<int> labels;
  std::vector<int> indices;   // dataset positions, for per-sample seeding
};

// Deterministic batching: the permutation is a function of (shuffle_seed,
// epoch) only; the final partial batch is kept. shuffle_seed 0 = natural
// order (evaluation).
class BatchIter {
 public:
  BatchIter(const std::vector<LabeledImage>& data, int batch_size,
            std::uint64_t shuffle_seed, int epoch);
  bool next(Batch* out);
  int batch_count() const;

 private:
  const std::vector<LabeledImage>& data_;
  std::vector<int> order_;
  int batch_size_;
  std::size_t pos_ = 0;
};

}  // namespace lasnn
