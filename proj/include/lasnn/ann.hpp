#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lasnn/datasets.hpp"
#include "lasnn/network.hpp"
#include "lasnn/ops.hpp"
#include "lasnn/rng.hpp"
#include "lasnn/tensor.hpp"

namespace lasnn {

enum class RunMode { Train, Eval };

// Bitmask of attention levels.
enum : unsigned { kLevelLow = 1u, kLevelMid = 2u, kLevelHigh = 4u, kLevelAll = 7u };
unsigned level_bit(LevelTag t);

struct AnnCache {
  std::vector<Tensor> inputs;              // input seen by each layer
  std::vector<Tensor> masks;               // dropout masks
  std::vector<Tensor> pool_argmax;         // maxpool argmax
  std::vector<ops::BatchNormState> bn;     // batchnorm saved stats
};

struct AnnResult {
  Tensor logits;       // [N,classes]
  Tensor captured[3];  // post-ReLU activations of tagged convs (low/mid/high)
  bool has(LevelTag t) const { return !captured[static_cast<int>(t) - 1].empty(); }
  const Tensor& level(LevelTag t) const { return captured[static_cast<int>(t) - 1]; }
};

// Forward pass over a batch [N,C,H,W]. Dropout fires only in Train mode and
// draws its masks from rng in layer order. capture_levels selects which
// tagged activations to keep. cache enables a later backward.
AnnResult ann_forward(Checkpoint& net, const Tensor& input, RunMode mode,
                      unsigned capture_levels = 0, Rng* dropout_rng = nullptr,
                      AnnCache* cache = nullptr);

struct AnnGrads {
  std::vector<LayerParams> layers;  // w/b gradient tensors aligned with spec
};

// Exact backward through the cached forward. Returns the gradient w.r.t. the
// network input when need_input_grad is set (used for sensitivity maps).
Tensor ann_backward(const Checkpoint& net, const AnnCache& cache, RunMode mode,
                    const Tensor& grad_logits, AnnGrads* grads, bool need_input_grad);

struct CeResult {
  double loss = 0;                    // mean over the batch
  Tensor grad_logits;                 // (p - onehot)/N
  std::vector<double> probs;          // row-major [N,classes] softmax, double
};

// Softmax cross-entropy, computed in double with max-subtraction.
CeResult cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// dL/dx of the classification loss at (input, label); net runs in eval mode.
Tensor input_gradient(Checkpoint& net, const Tensor& image, int label);

// p <- p - lr * (g + weight_decay * p)
struct SgdConfig {
  float lr = 0.01f;
  float weight_decay = 0.0f;
};
void sgd_step(Tensor& param, const Tensor& grad, const SgdConfig& cfg);

// Adam with L2 weight decay folded into the gradient:
//   t += 1;  g' = g + wd * p
//   m = b1*m + (1-b1)*g';  v = b2*v + (1-b2)*g'^2
//   p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.0f;
};
struct AdamState {
  Tensor m, v;
  int t = 0;
};
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg);

// Per-network optimizer: one slot per parameter tensor.
class Optimizer {
 public:
  Optimizer(const std::string& kind, float lr, float weight_decay);
  void step(Checkpoint& net, const AnnGrads& grads);
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
  SgdConfig sgd_;
  AdamConfig adam_;
  std::vector<AdamState> state_w_, state_b_;
};

struct AnnTrainConfig {
  std::string optimizer = "sgd";
  float lr = 0.01f;
  float weight_decay = 5e-4f;
  int epochs = 30;
  int batch_size = 16;
  std::uint64_t seed = 1;
};

struct EpochRow {
  int epoch = 0;
  double train_loss = 0;
  double test_acc = 0;
};

struct AnnTrainResult {
  Checkpoint best;       // highest test accuracy (earliest on ties)
  std::vector<EpochRow> log;
  double best_acc = 0;
};

double ann_accuracy(Checkpoint& net, const std::vector<LabeledImage>& data, int batch_size);

// Trains from scratch; throws on divergence (NaN loss) naming epoch/batch.
AnnTrainResult train_ann(const NetworkSpec& spec, const std::vector<LabeledImage>& train,
                         const std::vector<LabeledImage>& test, const AnnTrainConfig& cfg);

}  // namespace lasnn
