#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lasnn/datasets.hpp"
#include "lasnn/encoding.hpp"
#include "lasnn/network.hpp"

namespace lasnn {

struct ConversionViolation {
  int layer_index = -1;
  std::string message;
};

// Reports every property that blocks ANN-to-SNN conversion: bias terms,
// batchnorm, max pooling, and wide downsampling stems (which come with a
// suggestion to apply the 3x3 stem transform). Empty result = convertible.
std::vector<ConversionViolation> validate_convertible(const NetworkSpec& spec);

struct CalibrationConfig {
  int T = 500;
  int samples = 512;          // capped by the calibration set size
  float percentile = 100.0f;  // 100 = plain max of observed preactivations
  Coding coding = Coding::Poisson;
  float leak = 1.0f;
  std::uint64_t seed = 1;
  int batch_size = 64;
};

// Threshold balancing: layers are processed front to back; each spiking
// layer's threshold is the maximum preactivation observed while running the
// spike-driven forward over the calibration set with all earlier thresholds
// already fixed. Weights are never touched. The optional percentile replaces
// the max with a quantile of the positive preactivation mass (second pass).
CalibrationReport balance_thresholds(Checkpoint& ann, const std::vector<LabeledImage>& calib,
                                     const CalibrationConfig& cfg);

// Installs the report into a copy of the ANN: weights bit-identical, role
// student-snn, thresholds attached.
Checkpoint convert(const Checkpoint& ann, const CalibrationReport& report);

}  // namespace lasnn
