#include "lasnn/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lasnn {

double top1_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty() || predictions.size() != labels.size())
    throw std::invalid_argument("top1_accuracy: empty or mismatched inputs");
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

EnergyReport spike_report(const std::vector<SpikeRecord>& records, const NetworkSpec& spec) {
  if (records.empty()) throw std::invalid_argument("spike_report: no records");
  const SpikeRecord& first = records.front();
  EnergyReport rep;
  rep.T = first.T;
  const std::size_t stages = first.layer_indices.size();
  std::vector<double> totals(stages, 0.0);
  for (const SpikeRecord& r : records) {
    if (r.layer_indices != first.layer_indices || r.T != first.T ||
        r.neurons != first.neurons)
      throw std::invalid_argument("spike_report: heterogeneous records");
    rep.samples += r.batch;
    for (std::size_t s = 0; s < stages; ++s) {
      double acc = 0.0;
      for (float v : r.counts[s].data) acc += std::fabs(static_cast<double>(v));
      totals[s] += acc;
    }
  }
  double grand_spikes = 0.0;
  std::int64_t grand_neurons = 0;
  for (std::size_t s = 0; s < stages; ++s) {
    EnergyReport::Row row;
    row.layer_index = first.layer_indices[s];
    row.kind = to_string(spec.layers[static_cast<std::size_t>(row.layer_index)].kind);
    row.neurons = first.neurons[s];
    row.threshold = s < first.thresholds.size() ? first.thresholds[s] : 0.0f;
    row.avg_spikes = totals[s] / (static_cast<double>(row.neurons) *
                                  static_cast<double>(rep.samples));
    rep.rows.push_back(row);
    grand_spikes += totals[s];
    grand_neurons += row.neurons;
  }
  rep.network_avg =
      grand_spikes / (static_cast<double>(grand_neurons) * static_cast<double>(rep.samples));
  return rep;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_energy_csv(const EnergyReport& report, const std::string& path,
                      const std::string& config_hash) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write energy report: " + path);
  os << "# config=" << config_hash << "\n";
  os << "# network_avg=" << fmt(report.network_avg) << " T=" << report.T
     << " samples=" << report.samples << "\n";
  os << "layer_index,kind,neurons,threshold,avg_spikes_per_neuron\n";
  for (const auto& row : report.rows)
    os << row.layer_index << "," << row.kind << "," << row.neurons << ","
       << fmt(static_cast<double>(row.threshold)) << "," << fmt(row.avg_spikes) << "\n";
  if (!os) throw std::runtime_error("energy report write failed: " + path);
}

std::string energy_summary(const EnergyReport& report) {
  std::ostringstream os;
  os << "spike activity over " << report.samples << " samples, T=" << report.T << "\n";
  for (const auto& row : report.rows)
    os << "  layer " << row.layer_index << " (" << row.kind << ", " << row.neurons
       << " neurons, theta=" << row.threshold << "): " << row.avg_spikes
       << " spikes/neuron\n";
  os << "  network average: " << report.network_avg << " spikes/neuron";
  return os.str();
}

}  // namespace lasnn
