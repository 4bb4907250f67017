#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lasnn/ann.hpp"
#include "lasnn/encoding.hpp"
#include "lasnn/network.hpp"
#include "lasnn/tensor.hpp"

namespace lasnn {

// Time-stepped spiking execution of a converted network. Hidden weighted
// layers run soft-reset LIF dynamics:
//   v^t = leak * v^{t-1} + drive^t - theta * o^{t-1},  o^t = [v^t > theta]
// The readout layer integrates with leak 1 and never fires; the prediction is
// the softmax of its final potential. ReLU layers are skipped when a network
// runs as an SNN (spiking replaces the nonlinearity); avgpool, dropout and
// flatten apply to the spike tensors step by step. Dropout masks are drawn
// once per forward pass, not per time step, so spike statistics stay
// consistent across steps; they rescale kept units by 1/(1-p) as in the ANN.

struct SnnConfig {
  float leak = 1.0f;   // hidden lambda in (0,1]; 1 = IF neuron
  float gamma = 0.3f;  // surrogate damping in (0,1]
  int T = 100;
  bool train_dropout = false;  // true during fine-tuning, false for inference
  bool detach_reset = false;   // ablation: no credit through -theta*o^{t-1}
  bool detach_leak = false;    // ablation: no credit through leak*v^{t-1}
  void validate() const;
};

struct SpikeRecord {
  int T = 0;
  int batch = 0;
  std::vector<int> layer_indices;       // spec indices of the spiking layers
  std::vector<std::int64_t> neurons;    // per-sample neuron count per stage
  std::vector<float> thresholds;        // per stage
  // Full recording (training / SAM): per stage, per step tensors [N,...].
  std::vector<std::vector<Tensor>> v;
  std::vector<std::vector<Tensor>> o;
  // Always present: summed |spikes| per stage [N,...], last spike times
  // (-1 = never fired), final readout potential.
  std::vector<Tensor> counts;
  std::vector<Tensor> last_spike;
  Tensor out_potential;                 // [N,classes]
  std::vector<Tensor> dropout_masks;    // aligned with spec.layers
  bool full = false;

  int stage_of_layer(int layer_index) const;
};

// Membrane update + spike generation for one step (the recurrence above).
// prev_spikes may alias spikes_out.
void lif_step(Tensor& v, const Tensor& drive, const Tensor& prev_spikes,
              Tensor& spikes_out, float leak, float theta);

// gamma * max(0, 1 - |v - theta|/theta), elementwise.
Tensor surrogate_grad(const Tensor& v, float theta, float gamma);

// Softmax of each row of the final readout potential, computed in double.
// Rows are nonnegative and sum to 1 within 1e-9.
std::vector<double> predicted_distribution(const Tensor& out_potential);

// Thresholds aligned to spiking stages, pulled from the checkpoint block.
std::vector<float> stage_thresholds(const Checkpoint& net);

// Observer sees each spiking stage's drive tensor per step (calibration).
using DriveObserver = std::function<void(int stage, int t, const Tensor& drive)>;

struct SnnForwardResult {
  SpikeRecord record;
  std::vector<double> probs;  // row-major [N,classes]; empty for partial runs
};

// Engine core. thresholds may cover only the first `stage_limit` stages when
// a partial run is requested (stage_limit = number of hidden stages to run
// with full LIF dynamics; the observer still sees stage_limit's drive;
// -1 = run everything including the readout).
SnnForwardResult snn_forward_raw(Checkpoint& net, const std::vector<float>& thresholds,
                                 const BatchEncoder& enc, const SnnConfig& cfg,
                                 bool full_record, Rng* dropout_rng,
                                 const DriveObserver* observer = nullptr,
                                 int stage_limit = -1);

// Standard entry: a student-snn checkpoint with its threshold block.
SnnForwardResult snn_forward(Checkpoint& net, const BatchEncoder& enc,
                             const SnnConfig& cfg, bool full_record = false,
                             Rng* dropout_rng = nullptr);

// Extra loss gradients entering the spike path (attention terms).
struct SpikeGradInjection {
  // dL/d(spike count) per stage, added to dL/do^t at every step.
  std::vector<Tensor> per_count;
  // dL/do^T per stage, added at the final step only.
  std::vector<Tensor> final_step;
  // dL/do^t per stage per step (per-step SAM comparison).
  std::vector<std::vector<Tensor>> per_step;
  // dL/d(membrane sum) per stage, added to dL/dv^t at every step.
  std::vector<Tensor> per_membrane;
};

// Unrolled backward through the recorded forward. grad_out_potential is
// dL/dv_L^T. Credit flows through the leak recurrence and the reset term
// unless the config detaches them. Returns weight gradients aligned with the
// spec layers; the record must come from a full-record forward on `net` with
// the same encoder and config.
AnnGrads snn_backward(const Checkpoint& net, const SpikeRecord& record,
                      const BatchEncoder& enc, const SnnConfig& cfg,
                      const Tensor& grad_out_potential,
                      const SpikeGradInjection* inject = nullptr);

struct SnnEvalResult {
  double accuracy = 0;
  std::vector<int> predictions;
  std::vector<SpikeRecord> records;  // streaming records (counts only)
};

// Batched evaluation over a dataset with per-sample encoder seeds derived
// from (seed, "eval-encode", dataset index).
SnnEvalResult snn_evaluate(Checkpoint& net, const std::vector<LabeledImage>& data,
                           const SnnConfig& cfg, Coding coding, std::uint64_t seed,
                           int batch_size, bool keep_records = false);

}  // namespace lasnn
