#include "lasnn/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lasnn/rng.hpp"

namespace lasnn {
namespace {

// The full key catalog with desk-scale defaults. Values straight from the
// reference setup (teacher/intermediate SGD lr 0.01 wd 5e-4; distillation
// Adam lr 1e-4 wd 5e-4, alpha 0.9, T 100, batch 16, gamma 0.3) stay as they
// are; epoch counts and the conversion time budget are scaled down but remain
// plain config values.
const std::pair<const char*, const char*> kDefaults[] = {
    {"seed", "42"},
    {"out", "runs"},

    {"dataset.name", "synth"},
    {"dataset.dir", "data"},
    {"dataset.classes", "10"},
    {"dataset.train_images", ""},
    {"dataset.train_labels", ""},
    {"dataset.test_images", ""},
    {"dataset.test_labels", ""},
    {"dataset.train_files", ""},
    {"dataset.test_files", ""},
    {"dataset.train_subset", "1000"},
    {"dataset.test_subset", "1000"},
    {"dataset.subset_seed", "9001"},
    {"dataset.synth_train", "4000"},
    {"dataset.synth_test", "2400"},
    {"dataset.synth_noise", "0.1"},

    {"arch.teacher", "teacher-cnn"},
    {"arch.student", "3conv2linear"},
    {"arch.dropout", "0.2"},

    {"levels.teacher.low", "0"},
    {"levels.teacher.mid", "0"},
    {"levels.teacher.high", "0"},
    {"levels.student.low", "0"},
    {"levels.student.mid", "0"},
    {"levels.student.high", "0"},

    {"teacher.optimizer", "sgd"},
    {"teacher.lr", "0.01"},
    {"teacher.weight_decay", "0.0005"},
    {"teacher.epochs", "30"},
    {"teacher.batch", "16"},

    {"intermediate.optimizer", "sgd"},
    {"intermediate.lr", "0.01"},
    {"intermediate.weight_decay", "0.0005"},
    {"intermediate.epochs", "30"},
    {"intermediate.batch", "16"},

    {"convert.T", "500"},
    {"convert.samples", "512"},
    {"convert.percentile", "100"},
    {"convert.batch", "64"},
    {"convert.encoding", "poisson"},

    {"distill.mode", "activation"},
    {"distill.alpha", "0.9"},
    {"distill.T", "100"},
    {"distill.gamma", "0.3"},
    {"distill.leak", "1.0"},
    {"distill.optimizer", "adam"},
    {"distill.lr", "0.0001"},
    {"distill.weight_decay", "0.0005"},
    {"distill.epochs", "10"},
    {"distill.batch", "16"},
    {"distill.encoding", "poisson"},
    {"distill.normalize_maps", "1"},
    {"distill.student_activation", "counts"},
    {"distill.sam_all_steps", "0"},
    {"distill.detach_reset", "0"},
    {"distill.detach_leak", "0"},

    {"pair.low", "auto"},
    {"pair.mid", "auto"},
    {"pair.high", "auto"},

    {"eval.T", "100"},
    {"eval.batch", "64"},
    {"eval.encoding", "poisson"},
    {"eval.samples", "0"},

    {"energy.samples", "2000"},
};

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config::Config() {
  for (const auto& [k, v] : kDefaults) values_[k] = v;
}

Config Config::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config file: " + path);
  Config cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    cfg.apply_line(line, path + ":" + std::to_string(lineno));
  }
  return cfg;
}

void Config::apply_line(const std::string& line, const std::string& where) {
  const std::size_t hash = line.find('#');
  const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
  if (body.empty()) return;
  const std::size_t eq = body.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument(where + ": expected 'key = value', got '" + body + "'");
  const std::string key = trim(body.substr(0, eq));
  const std::string value = trim(body.substr(eq + 1));
  set(key, value);
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("unknown config key '" + key + "'");
  return it->second;
}

int Config::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': '" + v + "' is not an integer");
  }
}

float Config::get_float(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const float out = std::stof(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': '" + v + "' is not a number");
  }
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw std::invalid_argument("config key '" + key + "': '" + v + "' is not a boolean");
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': '" + v + "' is not an unsigned integer");
  }
}

std::string Config::canonical() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

std::string Config::hash() const {
  const std::uint64_t h = fnv1a64(canonical());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lasnn
