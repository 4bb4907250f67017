#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lasnn/rng.hpp"
#include "lasnn/tensor.hpp"

namespace lasnn {

enum class LayerKind { Conv, Linear, Relu, AvgPool, MaxPool, Dropout, BatchNorm, Flatten };
enum class LevelTag { None, Low, Mid, High };
enum class Role { Teacher, Intermediate, StudentSnn };

const char* to_string(LayerKind k);
const char* to_string(LevelTag t);
const char* to_string(Role r);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;  // conv
  int in_dim = 0, out_dim = 0;                                  // linear
  bool use_bias = false;                                        // conv/linear
  int pool_k = 0;                                               // avg/max pool
  float drop_p = 0.0f;                                          // dropout
  int channels = 0;                                             // batchnorm
  LevelTag level = LevelTag::None;                              // conv only

  static LayerSpec conv(int in_ch, int out_ch, int kernel, int stride, int pad, bool bias);
  static LayerSpec linear(int in_dim, int out_dim, bool bias);
  static LayerSpec relu();
  static LayerSpec avgpool(int k);
  static LayerSpec maxpool(int k);
  static LayerSpec dropout(float p);
  static LayerSpec batchnorm(int channels);
  static LayerSpec flatten();
};

struct NetworkSpec {
  Role role = Role::Teacher;
  Shape input;  // [C,H,W]
  int classes = 0;
  std::vector<LayerSpec> layers;
};

// Parameter tensors for one layer. conv/linear: w (+ b when use_bias);
// batchnorm: w=gamma, b=beta plus running stats. Other kinds hold nothing.
struct LayerParams {
  Tensor w, b, run_mean, run_var;
};

struct TrainMeta {
  int epoch = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

struct ThresholdEntry {
  int layer_index = 0;   // index into spec.layers
  float max_preact = 0;  // maximum observed preactivation
  float threshold = 0;   // installed firing threshold
};

struct CalibrationReport {
  std::vector<ThresholdEntry> entries;  // one per spiking layer, network order
  int samples = 0;
  int time_steps = 0;
  float percentile = 100.0f;  // 100 = plain max
};

struct Checkpoint {
  NetworkSpec spec;
  std::vector<LayerParams> params;  // aligned with spec.layers
  std::optional<CalibrationReport> thresholds;
  TrainMeta meta;
};

// Shape of one layer's output given its input shape (no batch dim); throws a
// descriptive error when the layers do not compose.
Shape layer_output_shape(const LayerSpec& layer, const Shape& in);
// Walks the whole stack; the final layer must be a linear producing the class
// count. Returns per-layer output shapes.
std::vector<Shape> check_composition(const NetworkSpec& spec);

// Indices of weighted (conv/linear) layers. The last one is the readout; the
// rest are the spiking layers when the network runs as an SNN.
std::vector<int> weighted_layer_indices(const NetworkSpec& spec);
std::vector<int> spiking_layer_indices(const NetworkSpec& spec);
int output_layer_index(const NetworkSpec& spec);

// He-initialized parameters for a spec. The rng stream per layer is derived
// from its index, so adding layers elsewhere does not shift existing init.
Checkpoint init_network(const NetworkSpec& spec, std::uint64_t seed);

// Level tags: low/mid/high are placed on the last conv of each third of the
// conv stack by default; pass 1-based conv ordinals to override (0 = auto).
// Later tags win when ordinals collide on small stacks.
void assign_level_tags(NetworkSpec& spec, int low_ord = 0, int mid_ord = 0, int high_ord = 0);

// Replaces every wide downsampling stem (kernel >= 7, stride >= 2) with three
// 3x3 stride-1 convolutions and two dropout layers in between; an avgpool of
// the original stride is appended so downstream shapes are preserved. Returns
// the number of stems replaced.
int apply_stem_transform(NetworkSpec& spec, float drop_p = 0.2f);

// Named desk-scale architectures: "teacher-cnn", "3conv2linear", "vgg5s".
NetworkSpec build_architecture(const std::string& name, const Shape& input, int classes,
                               float drop_p);

std::string serialize_spec(const NetworkSpec& spec, const TrainMeta& meta);
void parse_spec(const std::string& text, NetworkSpec* spec, TrainMeta* meta);

// Checkpoint container: magic "LASNN\x01", u32 little-endian length + spec
// document, then per-layer little-endian float32 blobs in spec order, then a
// threshold block iff role is student-snn. Byte-exact round-trip.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lasnn
