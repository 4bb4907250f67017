#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lasnn/network.hpp"
#include "lasnn/snn.hpp"

namespace lasnn {

// Fraction of argmax matches; the argmax breaks ties toward the lowest class
// index. predictions are class ids.
double top1_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

struct EnergyReport {
  struct Row {
    int layer_index = 0;
    std::string kind;
    std::int64_t neurons = 0;      // per sample
    float threshold = 0;
    double avg_spikes = 0;         // spikes per neuron per sample, over T steps
  };
  std::vector<Row> rows;
  double network_avg = 0;          // total spikes / total neurons, per sample
  int T = 0;
  std::int64_t samples = 0;
};

// Aggregates spike counts from evaluation records; all records must come from
// the same network and time-step setting.
EnergyReport spike_report(const std::vector<SpikeRecord>& records, const NetworkSpec& spec);

// CSV columns: layer_index,kind,neurons,threshold,avg_spikes_per_neuron.
// Header comments carry the config hash and the report summary.
void write_energy_csv(const EnergyReport& report, const std::string& path,
                      const std::string& config_hash);
std::string energy_summary(const EnergyReport& report);

}  // namespace lasnn
