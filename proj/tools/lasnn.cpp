// Command-line driver for the three-stage pipeline: teacher training,
// ANN-to-SNN conversion by threshold balancing, and layer-wise attention
// distillation, plus evaluation and spike-energy reporting.

#include <CLI11.hpp>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <unistd.h>

#include "lasnn/ann.hpp"
#include "lasnn/config.hpp"
#include "lasnn/conversion.hpp"
#include "lasnn/datasets.hpp"
#include "lasnn/distill.hpp"
#include "lasnn/metrics.hpp"
#include "lasnn/network.hpp"
#include "lasnn/snn.hpp"
#include "lasnn/synth.hpp"

namespace fs = std::filesystem;
using namespace lasnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--config", opts->config_path, "config file (key = value lines)");
  cmd->add_option("--out", opts->out, "output directory (default from config)");
  cmd->add_option("--seed", opts->seed, "global seed override");
  cmd->add_option("--override", opts->overrides, "config override key=value (repeatable)")
      ->take_all();
}

Config make_config(const CommonOpts& opts) {
  Config cfg = opts.config_path.empty() ? Config() : Config::from_file(opts.config_path);
  for (const std::string& ov : opts.overrides) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw UsageError("--override expects key=value, got '" + ov + "'");
    cfg.apply_line(ov, "--override");
  }
  if (opts.seed >= 0) cfg.set("seed", std::to_string(opts.seed));
  if (!opts.out.empty()) cfg.set("out", opts.out);
  return cfg;
}

// One writer per output directory, enforced with an exclusive lock file.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(dir + "/.lasnn.lock") {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw UsageError("output directory is locked by another run (" + path_ +
                       " exists); remove the stale lock if no run is active");
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

DatasetSpec dataset_from_config(const Config& cfg) {
  DatasetSpec spec;
  spec.name = cfg.get("dataset.name");
  spec.classes = cfg.get_int("dataset.classes");
  spec.train_subset = cfg.get_int("dataset.train_subset");
  spec.test_subset = cfg.get_int("dataset.test_subset");
  spec.subset_seed = cfg.get_u64("dataset.subset_seed");
  const std::string dir = cfg.get("dataset.dir");
  auto pick = [&](const char* key, const std::string& fallback) {
    const std::string v = cfg.get(key);
    return v.empty() ? dir + "/" + fallback : v;
  };
  if (spec.name == "cifar10") {
    spec.image_shape = {3, 32, 32};
    auto split_list = [](const std::string& s) {
      std::vector<std::string> out;
      std::size_t start = 0;
      while (start < s.size()) {
        std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        if (comma > start) out.push_back(s.substr(start, comma - start));
        start = comma + 1;
      }
      return out;
    };
    spec.train_paths = split_list(cfg.get("dataset.train_files"));
    spec.test_paths = split_list(cfg.get("dataset.test_files"));
    if (spec.train_paths.empty() || spec.test_paths.empty())
      throw UsageError("cifar10 needs dataset.train_files and dataset.test_files");
  } else if (spec.name == "mnist" || spec.name == "synth") {
    spec.image_shape = {1, 28, 28};
    spec.train_paths = {pick("dataset.train_images", "train-images-idx3-ubyte"),
                        pick("dataset.train_labels", "train-labels-idx1-ubyte")};
    spec.test_paths = {pick("dataset.test_images", "t10k-images-idx3-ubyte"),
                       pick("dataset.test_labels", "t10k-labels-idx1-ubyte")};
    if (spec.name == "synth") {
      SynthParams sp;
      sp.train = cfg.get_int("dataset.synth_train");
      sp.test = cfg.get_int("dataset.synth_test");
      sp.noise = cfg.get_float("dataset.synth_noise");
      synth_write_idx(dir, sp);
    }
  } else {
    throw UsageError("unknown dataset.name '" + spec.name + "'");
  }
  for (const auto& p : spec.train_paths)
    if (!fs::exists(p)) throw UsageError("dataset file missing: " + p);
  for (const auto& p : spec.test_paths)
    if (!fs::exists(p)) throw UsageError("dataset file missing: " + p);
  return spec;
}

NetworkSpec build_spec(const Config& cfg, bool teacher) {
  const DatasetSpec ds = dataset_from_config(cfg);
  NetworkSpec spec = build_architecture(cfg.get(teacher ? "arch.teacher" : "arch.student"),
                                        ds.image_shape, ds.classes,
                                        cfg.get_float("arch.dropout"));
  const std::string pfx = teacher ? "levels.teacher." : "levels.student.";
  assign_level_tags(spec, cfg.get_int(pfx + "low"), cfg.get_int(pfx + "mid"),
                    cfg.get_int(pfx + "high"));
  return spec;
}

std::vector<PairEntry> pairs_from_config(const Config& cfg, const NetworkSpec& teacher,
                                         const NetworkSpec& student) {
  auto conv_index = [](const NetworkSpec& spec, int ordinal) {
    int seen = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
      if (spec.layers[i].kind == LayerKind::Conv && ++seen == ordinal)
        return static_cast<int>(i);
    throw UsageError("pairing references conv #" + std::to_string(ordinal) +
                     " which does not exist");
  };
  std::vector<PairEntry> pairs;
  const struct {
    const char* key;
    LevelTag tag;
  } levels[] = {{"pair.low", LevelTag::Low},
                {"pair.mid", LevelTag::Mid},
                {"pair.high", LevelTag::High}};
  for (const auto& lv : levels) {
    const std::string v = cfg.get(lv.key);
    if (v == "auto") {
      auto found = resolve_pairs(teacher, student, level_bit(lv.tag));
      pairs.push_back(found[0]);
    } else if (v == "off") {
      continue;
    } else {
      const std::size_t colon = v.find(':');
      if (colon == std::string::npos)
        throw UsageError(std::string(lv.key) + " expects 'auto', 'off' or T:S conv ordinals");
      PairEntry p;
      p.level = lv.tag;
      p.teacher_layer = conv_index(teacher, std::stoi(v.substr(0, colon)));
      p.student_layer = conv_index(student, std::stoi(v.substr(colon + 1)));
      pairs.push_back(p);
    }
  }
  if (pairs.empty()) throw UsageError("all attention pairs are off");
  return pairs;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_csv(const std::string& path, const Config& cfg) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "# config=" << cfg.hash() << "\n";
  return os;
}

AnnTrainConfig ann_cfg_from(const Config& cfg, const char* section) {
  AnnTrainConfig tc;
  const std::string s(section);
  tc.optimizer = cfg.get(s + ".optimizer");
  tc.lr = cfg.get_float(s + ".lr");
  tc.weight_decay = cfg.get_float(s + ".weight_decay");
  tc.epochs = cfg.get_int(s + ".epochs");
  tc.batch_size = cfg.get_int(s + ".batch");
  tc.seed = cfg.get_u64("seed");
  return tc;
}

int cmd_train_ann(const Config& cfg, bool teacher) {
  const std::string out = cfg.get("out");
  DirLock lock(out);
  const DatasetSpec ds = dataset_from_config(cfg);
  const auto train = load_split(ds, true);
  const auto test = load_split(ds, false);
  NetworkSpec spec = build_spec(cfg, teacher);
  spec.role = teacher ? Role::Teacher : Role::Intermediate;
  if (!teacher) {
    const auto violations = validate_convertible(spec);
    if (!violations.empty()) {
      std::cerr << "intermediate architecture is not convertible:\n";
      for (const auto& v : violations) std::cerr << "  " << v.message << "\n";
      return kExitUsage;
    }
  }
  const AnnTrainConfig tc = ann_cfg_from(cfg, teacher ? "teacher" : "intermediate");
  std::cout << "training " << (teacher ? "teacher" : "intermediate") << " ("
            << cfg.get(teacher ? "arch.teacher" : "arch.student") << ") on " << train.size()
            << "/" << test.size() << " samples, " << tc.epochs << " epochs\n";
  AnnTrainResult res = train_ann(spec, train, test, tc);
  const std::string stem = teacher ? "teacher" : "intermediate";
  std::ofstream log = open_csv(out + "/" + stem + "_log.csv", cfg);
  log << "epoch,train_loss,test_acc\n";
  for (const EpochRow& row : res.log)
    log << row.epoch << "," << fmt(row.train_loss) << "," << fmt(row.test_acc) << "\n";
  res.best.meta.config_hash = cfg.hash();
  save_checkpoint(res.best, out + "/" + stem + ".ckpt");
  std::cout << "best test accuracy " << res.best_acc << " at epoch " << res.best.meta.epoch
            << "; wrote " << out << "/" << stem << ".ckpt\n";
  return kExitOk;
}

int cmd_convert(const Config& cfg, const std::string& ann_path) {
  const std::string out = cfg.get("out");
  DirLock lock(out);
  Checkpoint ann = load_checkpoint(ann_path);
  const auto violations = validate_convertible(ann.spec);
  if (!violations.empty()) {
    std::cerr << "checkpoint is not convertible:\n";
    for (const auto& v : violations) std::cerr << "  " << v.message << "\n";
    return kExitUsage;
  }
  const DatasetSpec ds = dataset_from_config(cfg);
  const auto train = load_split(ds, true);
  CalibrationConfig cc;
  cc.T = cfg.get_int("convert.T");
  cc.samples = cfg.get_int("convert.samples");
  cc.percentile = cfg.get_float("convert.percentile");
  cc.batch_size = cfg.get_int("convert.batch");
  cc.coding = cfg.get("convert.encoding") == "direct" ? Coding::Direct : Coding::Poisson;
  cc.seed = cfg.get_u64("seed");
  std::cout << "balancing thresholds over " << std::min<std::size_t>(train.size(),
                                                                     static_cast<std::size_t>(cc.samples))
            << " samples at T=" << cc.T << "\n";
  CalibrationReport rep = balance_thresholds(ann, train, cc);
  Checkpoint student = convert(ann, rep);
  student.meta.config_hash = cfg.hash();
  save_checkpoint(student, out + "/student.ckpt");
  std::cout << "calibration report (samples=" << rep.samples << ", T=" << rep.time_steps
            << ", percentile=" << rep.percentile << "):\n";
  for (const auto& e : rep.entries)
    std::cout << "  layer " << e.layer_index << ": max_preact=" << e.max_preact
              << " threshold=" << e.threshold << "\n";
  std::cout << "wrote " << out << "/student.ckpt\n";
  return kExitOk;
}

SnnConfig snn_cfg_from(const Config& cfg, int T) {
  SnnConfig sc;
  sc.T = T;
  sc.leak = cfg.get_float("distill.leak");
  sc.gamma = cfg.get_float("distill.gamma");
  sc.detach_reset = cfg.get_bool("distill.detach_reset");
  sc.detach_leak = cfg.get_bool("distill.detach_leak");
  sc.validate();
  return sc;
}

int cmd_distill(const Config& cfg, const std::string& teacher_path,
                const std::string& student_path) {
  const std::string out = cfg.get("out");
  DirLock lock(out);
  Checkpoint teacher = load_checkpoint(teacher_path);
  Checkpoint student = load_checkpoint(student_path);
  if (student.spec.role != Role::StudentSnn)
    throw UsageError("distill expects a converted student checkpoint (role student-snn)");
  const DatasetSpec ds = dataset_from_config(cfg);
  const auto train = load_split(ds, true);
  const auto test = load_split(ds, false);

  DistillConfig dc;
  dc.alpha = cfg.get_float("distill.alpha");
  dc.mode = parse_distill_mode(cfg.get("distill.mode"));
  dc.normalize_maps = cfg.get_bool("distill.normalize_maps");
  dc.student_use_membrane = cfg.get("distill.student_activation") == "membrane";
  dc.sam_all_steps = cfg.get_bool("distill.sam_all_steps");
  if (dc.mode != DistillMode::Hybrid && dc.alpha != 0.0f)
    dc.pairs = pairs_from_config(cfg, teacher.spec, student.spec);
  const SnnConfig sc = snn_cfg_from(cfg, cfg.get_int("distill.T"));
  const Coding coding =
      cfg.get("distill.encoding") == "direct" ? Coding::Direct : Coding::Poisson;
  const int epochs = cfg.get_int("distill.epochs");
  const int batch = cfg.get_int("distill.batch");
  const std::uint64_t seed = cfg.get_u64("seed");
  Optimizer opt(cfg.get("distill.optimizer"), cfg.get_float("distill.lr"),
                cfg.get_float("distill.weight_decay"));
  // alpha = 0 runs are plain conversion fine-tuning; label them as such
  const std::string mode_label =
      (dc.mode == DistillMode::Hybrid || dc.alpha == 0.0f)
          ? "hybrid"
          : std::string("lasnn-") + to_string(dc.mode);

  std::cout << "distilling (" << mode_label << ", alpha=" << dc.alpha << ", T=" << sc.T
            << ") for " << epochs << " epochs on " << train.size() << " samples\n";
  std::ofstream log = open_csv(out + "/distill_log.csv", cfg);
  log << "epoch,mode,ce,at,total,test_acc\n";

  Checkpoint best = student;
  double best_acc = -1.0;
  int best_epoch = -1;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    DistillEpochResult r =
        distill_epoch(teacher, student, train, dc, sc, coding, opt, seed, epoch, batch);
    SnnEvalResult ev = snn_evaluate(student, test, sc, coding, seed, 64, false);
    log << epoch << "," << mode_label << "," << fmt(r.ce) << "," << fmt(r.at) << ","
        << fmt(r.total) << "," << fmt(ev.accuracy) << "\n";
    std::cout << "epoch " << epoch << ": ce=" << r.ce << " at=" << r.at
              << " total=" << r.total << " test_acc=" << ev.accuracy << "\n";
    if (ev.accuracy > best_acc) {
      best_acc = ev.accuracy;
      best = student;
      best_epoch = epoch;
    }
  }
  best.meta.epoch = best_epoch;
  best.meta.seed = seed;
  best.meta.config_hash = cfg.hash();
  save_checkpoint(best, out + "/distilled.ckpt");
  std::cout << "best test accuracy " << best_acc << " at epoch " << best_epoch << "; wrote "
            << out << "/distilled.ckpt\n";
  return kExitOk;
}

int cmd_evaluate(const Config& cfg, const std::string& ckpt_path, bool energy_only) {
  const std::string out = cfg.get("out");
  DirLock lock(out);
  Checkpoint net = load_checkpoint(ckpt_path);
  const DatasetSpec ds = dataset_from_config(cfg);
  auto test = load_split(ds, false);
  const int want = energy_only ? cfg.get_int("energy.samples") : cfg.get_int("eval.samples");
  if (want > 0 && static_cast<std::size_t>(want) < test.size())
    test.resize(static_cast<std::size_t>(want));

  if (net.spec.role != Role::StudentSnn) {
    if (energy_only) throw UsageError("energy-report needs a spiking (student-snn) checkpoint");
    const double acc = ann_accuracy(net, test, cfg.get_int("eval.batch"));
    std::ofstream csv = open_csv(out + "/eval.csv", cfg);
    csv << "role,samples,T,encoding,accuracy\n";
    csv << to_string(net.spec.role) << "," << test.size() << ",0,-," << fmt(acc) << "\n";
    std::cout << "ann accuracy over " << test.size() << " samples: " << acc << "\n";
    return kExitOk;
  }

  const SnnConfig sc = snn_cfg_from(cfg, cfg.get_int("eval.T"));
  const Coding coding =
      cfg.get("eval.encoding") == "direct" ? Coding::Direct : Coding::Poisson;
  SnnEvalResult ev = snn_evaluate(net, test, sc, coding, cfg.get_u64("seed"),
                                  cfg.get_int("eval.batch"), true);
  EnergyReport rep = spike_report(ev.records, net.spec);
  if (!energy_only) {
    std::ofstream csv = open_csv(out + "/eval.csv", cfg);
    csv << "role,samples,T,encoding,accuracy\n";
    csv << "student-snn," << test.size() << "," << sc.T << ","
        << (coding == Coding::Direct ? "direct" : "poisson") << "," << fmt(ev.accuracy)
        << "\n";
  }
  write_energy_csv(rep, out + "/energy.csv", cfg.hash());
  std::cout << "snn accuracy over " << test.size() << " samples at T=" << sc.T << ": "
            << ev.accuracy << "\n";
  std::cout << energy_summary(rep) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LaSNN pipeline: teacher training, threshold-balancing conversion, "
               "layer-wise attention distillation"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string ann_path, teacher_path, student_path, ckpt_path;

  CLI::App* c_teacher = app.add_subcommand("train-teacher", "train the teacher ANN");
  add_common(c_teacher, &opts);
  CLI::App* c_inter =
      app.add_subcommand("train-intermediate", "train the conversion-ready intermediate ANN");
  add_common(c_inter, &opts);
  CLI::App* c_convert =
      app.add_subcommand("convert", "threshold-balance an intermediate ANN into a student SNN");
  add_common(c_convert, &opts);
  c_convert->add_option("--ann", ann_path, "intermediate ANN checkpoint")->required();
  CLI::App* c_distill = app.add_subcommand("distill", "stage-3 layer-wise distillation");
  add_common(c_distill, &opts);
  c_distill->add_option("--teacher", teacher_path, "teacher checkpoint")->required();
  c_distill->add_option("--student", student_path, "converted student checkpoint")->required();
  CLI::App* c_eval = app.add_subcommand("evaluate", "accuracy (+ spike report for SNNs)");
  add_common(c_eval, &opts);
  c_eval->add_option("--ckpt", ckpt_path, "checkpoint to evaluate")->required();
  CLI::App* c_energy = app.add_subcommand("energy-report", "spike-count energy proxy report");
  add_common(c_energy, &opts);
  c_energy->add_option("--ckpt", ckpt_path, "student-snn checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    const Config cfg = make_config(opts);
    if (app.got_subcommand(c_teacher)) return cmd_train_ann(cfg, true);
    if (app.got_subcommand(c_inter)) return cmd_train_ann(cfg, false);
    if (app.got_subcommand(c_convert)) return cmd_convert(cfg, ann_path);
    if (app.got_subcommand(c_distill)) return cmd_distill(cfg, teacher_path, student_path);
    if (app.got_subcommand(c_eval)) return cmd_evaluate(cfg, ckpt_path, false);
    if (app.got_subcommand(c_energy)) return cmd_evaluate(cfg, ckpt_path, true);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
