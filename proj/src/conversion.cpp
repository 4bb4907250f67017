#include "lasnn/conversion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lasnn/kernels.hpp"
#include "lasnn/snn.hpp"

namespace lasnn {

std::vector<ConversionViolation> validate_convertible(const NetworkSpec& spec) {
  std::vector<ConversionViolation> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const int idx = static_cast<int>(i);
    if ((l.kind == LayerKind::Conv || l.kind == LayerKind::Linear) && l.use_bias)
      out.push_back({idx, "layer " + std::to_string(i) + " (" + to_string(l.kind) +
                              "): bias term; conversion requires bias-free layers"});
    if (l.kind == LayerKind::BatchNorm)
      out.push_back({idx, "layer " + std::to_string(i) +
                              ": batchnorm; remove it (dropout is the allowed regularizer)"});
    if (l.kind == LayerKind::MaxPool)
      out.push_back({idx, "layer " + std::to_string(i) +
                              ": max pooling loses spike information; use average pooling"});
    if (l.kind == LayerKind::Conv && l.kernel >= 7 && l.stride >= 2)
      out.push_back({idx, "layer " + std::to_string(i) + ": wide " + std::to_string(l.kernel) +
                              "x" + std::to_string(l.kernel) + " stride-" +
                              std::to_string(l.stride) +
                              " stem; replace with three 3x3 stride-1 convolutions "
                              "(apply_stem_transform)"});
  }
  return out;
}

namespace {

float percentile_of_positive(const std::vector<float>& hist, float hist_max, float q) {
  // hist holds counts of positive preactivations binned over (0, hist_max].
  double total = 0.0;
  for (float c : hist) total += c;
  if (total <= 0.0) return 0.0f;
  const double want = total * static_cast<double>(q) / 100.0;
  double run = 0.0;
  for (std::size_t b = 0; b < hist.size(); ++b) {
    run += hist[b];
    if (run >= want)
      return hist_max * static_cast<float>(b + 1) / static_cast<float>(hist.size());
  }
  return hist_max;
}

}  // namespace

CalibrationReport balance_thresholds(Checkpoint& ann, const std::vector<LabeledImage>& calib,
                                     const CalibrationConfig& cfg) {
  const auto violations = validate_convertible(ann.spec);
  if (!violations.empty()) {
    std::string msg = "network is not convertible:";
    for (const auto& v : violations) msg += "\n  " + v.message;
    throw std::invalid_argument(msg);
  }
  if (calib.empty()) throw std::invalid_argument("balance_thresholds: empty calibration set");
  if (cfg.T < 1) throw std::invalid_argument("balance_thresholds: T must be >= 1");

  std::vector<LabeledImage> used = calib;
  if (cfg.samples > 0 && static_cast<std::size_t>(cfg.samples) < used.size())
    used.resize(static_cast<std::size_t>(cfg.samples));

  const auto spiking = spiking_layer_indices(ann.spec);
  const int S = static_cast<int>(spiking.size());
  SnnConfig run;
  run.T = cfg.T;
  run.leak = cfg.leak;
  run.train_dropout = false;

  CalibrationReport report;
  report.samples = static_cast<int>(used.size());
  report.time_steps = cfg.T;
  report.percentile = cfg.percentile;

  std::vector<float> thresholds;
  constexpr int kHistBins = 4096;
  for (int stage = 0; stage < S; ++stage) {
    float max_seen = 0.0f;
    bool any = false;
    auto sweep = [&](const DriveObserver& obs) {
      BatchIter iter(used, cfg.batch_size, 0, 0);
      Batch b;
      while (iter.next(&b)) {
        std::vector<std::uint64_t> seeds(b.indices.size());
        for (std::size_t i = 0; i < b.indices.size(); ++i)
          seeds[i] = derive_seed(cfg.seed, "calib-encode",
                                 static_cast<std::uint64_t>(b.indices[i]));
        BatchEncoder enc(cfg.coding, b.images, std::move(seeds));
        snn_forward_raw(ann, thresholds, enc, run, false, nullptr, &obs, stage);
      }
    };
    DriveObserver max_obs = [&](int s, int, const Tensor& drive) {
      if (s != stage) return;
      const float m = kern::table().reduce_max(drive.ptr(), drive.data.size());
      if (!any || m > max_seen) max_seen = m;
      any = true;
    };
    sweep(max_obs);
    if (!(max_seen > 0.0f))
      throw std::runtime_error("balance_thresholds: nonpositive maximum preactivation (" +
                               std::to_string(max_seen) + ") at layer " +
                               std::to_string(spiking[static_cast<std::size_t>(stage)]) +
                               "; the network is degenerate");
    float theta = max_seen;
    if (cfg.percentile < 100.0f) {
      std::vector<float> hist(kHistBins, 0.0f);
      DriveObserver hist_obs = [&](int s, int, const Tensor& drive) {
        if (s != stage) return;
        for (float v : drive.data) {
          if (v <= 0.0f) continue;
          int bin = static_cast<int>(v / max_seen * kHistBins);
          bin = std::min(bin, kHistBins - 1);
          hist[static_cast<std::size_t>(bin)] += 1.0f;
        }
      };
      sweep(hist_obs);
      theta = percentile_of_positive(hist, max_seen, cfg.percentile);
      if (!(theta > 0.0f)) theta = max_seen;
    }
    thresholds.push_back(theta);
    report.entries.push_back({spiking[static_cast<std::size_t>(stage)], max_seen, theta});
  }
  return report;
}

Checkpoint convert(const Checkpoint& ann, const CalibrationReport& report) {
  const auto spiking = spiking_layer_indices(ann.spec);
  if (report.entries.size() != spiking.size())
    throw std::invalid_argument("convert: report covers " + std::to_string(report.entries.size()) +
                                " layers but the network has " + std::to_string(spiking.size()) +
                                " spiking layers");
  for (std::size_t s = 0; s < spiking.size(); ++s) {
    if (report.entries[s].layer_index != spiking[s])
      throw std::invalid_argument("convert: report layer order does not match the network");
    if (!(report.entries[s].threshold > 0.0f))
      throw std::invalid_argument("convert: nonpositive threshold in report");
  }
  Checkpoint student = ann;  // weights copied verbatim
  student.spec.role = Role::StudentSnn;
  student.thresholds = report;
  return student;
}

}  // namespace lasnn
