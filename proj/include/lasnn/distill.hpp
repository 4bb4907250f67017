#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lasnn/ann.hpp"
#include "lasnn/network.hpp"
#include "lasnn/snn.hpp"
#include "lasnn/tensor.hpp"

namespace lasnn {

enum class DistillMode { Activation, Gradient, Hybrid };
DistillMode parse_distill_mode(const std::string& s);
const char* to_string(DistillMode m);

struct PairEntry {
  LevelTag level = LevelTag::None;
  int teacher_layer = -1;  // spec index of the teacher conv
  int student_layer = -1;  // spec index of the student conv
};

struct DistillConfig {
  float alpha = 0.9f;
  DistillMode mode = DistillMode::Activation;
  unsigned levels = kLevelAll;
  bool normalize_maps = true;         // Frobenius-normalize maps before the L2 difference
  bool student_use_membrane = false;  // time-summed membrane instead of spike counts
  bool sam_all_steps = false;         // gradient mode: compare SAM at every step
  std::vector<PairEntry> pairs;
};

// Pairs teacher and student convs that carry the same level tag; levels
// missing on either side are dropped. Throws if nothing pairs up.
std::vector<PairEntry> resolve_pairs(const NetworkSpec& teacher, const NetworkSpec& student,
                                     unsigned levels);

// Spatial attention map of one activation tensor [C,H,M]: channel mean of
// squared magnitudes, optionally divided by its Frobenius norm (skipped at
// zero norm).
Tensor attention_map(const Tensor& activation, bool normalize);

// Student attention from a recorded forward: the activation surrogate is the
// time-summed spike count (or membrane sum) of the layer, then attention_map.
Tensor student_attention_from_spikes(const SpikeRecord& record, int layer_index, int sample,
                                     bool use_membrane, bool normalize);

// Sum of L2 norms of map differences over already shape-matched pairs.
double attention_loss(const std::vector<std::pair<Tensor, Tensor>>& map_pairs);

// Spike activation map at step t: per location, sum over channels of
// o^t * sum_{t' <= t, spike at t'} exp(-(t - t')). Needs a full record.
Tensor sam_map(const SpikeRecord& record, int layer_index, int sample, int t);

// Teacher input-sensitivity map: channel-averaged squared input gradient,
// bilinearly resized to each requested spatial shape.
std::vector<Tensor> gradient_attention_teacher(Checkpoint& teacher, const Tensor& image,
                                               int label, const std::vector<Shape>& targets,
                                               bool normalize);

// L_total = L_ce + (alpha/2) * L_at
double total_loss(double ce, double at_loss, float alpha);

struct DistillBatchStats {
  double ce = 0, at = 0, total = 0;
};

struct DistillEpochResult {
  double ce = 0, at = 0, total = 0;  // sample-weighted means over the epoch
};

// One epoch of stage-3 training: teacher eval capture (or input gradients),
// student spiking forward with full recording, combined loss, BPTT, optimizer
// step. Hybrid mode (or alpha = 0) never touches the teacher, which makes the
// trajectory identical to plain conversion fine-tuning. Teacher weights are
// never modified.
DistillEpochResult distill_epoch(Checkpoint& teacher, Checkpoint& student,
                                 const std::vector<LabeledImage>& train,
                                 const DistillConfig& dcfg, const SnnConfig& scfg,
                                 Coding coding, Optimizer& opt, std::uint64_t seed,
                                 int epoch, int batch_size);

}  // namespace lasnn
