#include "lasnn/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lasnn {

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Linear: return "linear";
    case LayerKind::Relu: return "relu";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

const char* to_string(LevelTag t) {
  switch (t) {
    case LevelTag::None: return "none";
    case LevelTag::Low: return "low";
    case LevelTag::Mid: return "mid";
    case LevelTag::High: return "high";
  }
  return "?";
}

const char* to_string(Role r) {
  switch (r) {
    case Role::Teacher: return "teacher";
    case Role::Intermediate: return "intermediate";
    case Role::StudentSnn: return "student-snn";
  }
  return "?";
}

LayerSpec LayerSpec::conv(int in_ch, int out_ch, int kernel, int stride, int pad, bool bias) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.in_ch = in_ch; l.out_ch = out_ch; l.kernel = kernel; l.stride = stride; l.pad = pad;
  l.use_bias = bias;
  return l;
}
LayerSpec LayerSpec::linear(int in_dim, int out_dim, bool bias) {
  LayerSpec l;
  l.kind = LayerKind::Linear;
  l.in_dim = in_dim; l.out_dim = out_dim; l.use_bias = bias;
  return l;
}
LayerSpec LayerSpec::relu() { LayerSpec l; l.kind = LayerKind::Relu; return l; }
LayerSpec LayerSpec::avgpool(int k) { LayerSpec l; l.kind = LayerKind::AvgPool; l.pool_k = k; return l; }
LayerSpec LayerSpec::maxpool(int k) { LayerSpec l; l.kind = LayerKind::MaxPool; l.pool_k = k; return l; }
LayerSpec LayerSpec::dropout(float p) { LayerSpec l; l.kind = LayerKind::Dropout; l.drop_p = p; return l; }
LayerSpec LayerSpec::batchnorm(int channels) { LayerSpec l; l.kind = LayerKind::BatchNorm; l.channels = channels; return l; }
LayerSpec LayerSpec::flatten() { LayerSpec l; l.kind = LayerKind::Flatten; return l; }

Shape layer_output_shape(const LayerSpec& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::Conv: {
      if (in.size() != 3)
        throw std::invalid_argument("conv expects [C,H,W] input, got " + shape_str(in));
      if (in[0] != layer.in_ch)
        throw std::invalid_argument("conv expects " + std::to_string(layer.in_ch) +
                                    " channels, got " + std::to_string(in[0]));
      const int oh = (in[1] + 2 * layer.pad - layer.kernel) / layer.stride + 1;
      const int ow = (in[2] + 2 * layer.pad - layer.kernel) / layer.stride + 1;
      if (oh < 1 || ow < 1)
        throw std::invalid_argument("conv output collapses on input " + shape_str(in));
      return {layer.out_ch, oh, ow};
    }
    case LayerKind::Linear: {
      if (in.size() != 1)
        throw std::invalid_argument("linear expects flattened input, got " + shape_str(in));
      if (in[0] != layer.in_dim)
        throw std::invalid_argument("linear expects dim " + std::to_string(layer.in_dim) +
                                    ", got " + std::to_string(in[0]));
      return {layer.out_dim};
    }
    case LayerKind::AvgPool:
    case LayerKind::MaxPool: {
      if (in.size() != 3)
        throw std::invalid_argument("pool expects [C,H,W] input, got " + shape_str(in));
      if (in[1] % layer.pool_k != 0 || in[2] % layer.pool_k != 0)
        throw std::invalid_argument("pool window " + std::to_string(layer.pool_k) +
                                    " does not divide spatial dims " + shape_str(in));
      return {in[0], in[1] / layer.pool_k, in[2] / layer.pool_k};
    }
    case LayerKind::BatchNorm:
      if (in.size() != 3 || in[0] != layer.channels)
        throw std::invalid_argument("batchnorm over " + std::to_string(layer.channels) +
                                    " channels cannot follow " + shape_str(in));
      return in;
    case LayerKind::Flatten: {
      int n = 1;
      for (int d : in) n *= d;
      return {n};
    }
    case LayerKind::Relu:
    case LayerKind::Dropout:
      return in;
  }
  throw std::logic_error("unhandled layer kind");
}

std::vector<Shape> check_composition(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw std::invalid_argument("network has no layers");
  std::vector<Shape> shapes;
  Shape cur = spec.input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      cur = layer_output_shape(spec.layers[i], cur);
    } catch (const std::exception& e) {
      throw std::invalid_argument("layer " + std::to_string(i) + " (" +
                                  to_string(spec.layers[i].kind) + "): " + e.what());
    }
    shapes.push_back(cur);
  }
  const LayerSpec& last = spec.layers.back();
  if (last.kind != LayerKind::Linear || last.out_dim != spec.classes)
    throw std::invalid_argument("network must end in a linear layer with " +
                                std::to_string(spec.classes) + " outputs");
  return shapes;
}

std::vector<int> weighted_layer_indices(const NetworkSpec& spec) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
    if (spec.layers[i].kind == LayerKind::Conv || spec.layers[i].kind == LayerKind::Linear)
      idx.push_back(static_cast<int>(i));
  return idx;
}

std::vector<int> spiking_layer_indices(const NetworkSpec& spec) {
  auto idx = weighted_layer_indices(spec);
  if (!idx.empty()) idx.pop_back();
  return idx;
}

int output_layer_index(const NetworkSpec& spec) {
  const auto idx = weighted_layer_indices(spec);
  if (idx.empty()) throw std::invalid_argument("network has no weighted layers");
  return idx.back();
}

Checkpoint init_network(const NetworkSpec& spec, std::uint64_t seed) {
  check_composition(spec);
  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.meta.seed = seed;
  ckpt.params.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerParams& p = ckpt.params[i];
    Rng rng(derive_seed(seed, "init", i));
    if (l.kind == LayerKind::Conv) {
      p.w = Tensor({l.out_ch, l.in_ch, l.kernel, l.kernel});
      const float std = std::sqrt(2.0f / static_cast<float>(l.in_ch * l.kernel * l.kernel));
      for (float& v : p.w.data) v = std * rng.next_gaussian();
      if (l.use_bias) p.b = Tensor({l.out_ch});
    } else if (l.kind == LayerKind::Linear) {
      p.w = Tensor({l.out_dim, l.in_dim});
      const float std = std::sqrt(2.0f / static_cast<float>(l.in_dim));
      for (float& v : p.w.data) v = std * rng.next_gaussian();
      if (l.use_bias) p.b = Tensor({l.out_dim});
    } else if (l.kind == LayerKind::BatchNorm) {
      p.w = Tensor({l.channels}, 1.0f);
      p.b = Tensor({l.channels});
      p.run_mean = Tensor({l.channels});
      p.run_var = Tensor({l.channels}, 1.0f);
    }
  }
  return ckpt;
}

void assign_level_tags(NetworkSpec& spec, int low_ord, int mid_ord, int high_ord) {
  std::vector<int> convs;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::Conv) {
      spec.layers[i].level = LevelTag::None;
      convs.push_back(static_cast<int>(i));
    }
  }
  if (convs.empty()) return;
  const int nc = static_cast<int>(convs.size());
  const int lo = low_ord > 0 ? low_ord : (nc + 2) / 3;
  const int mi = mid_ord > 0 ? mid_ord : (2 * nc + 2) / 3;
  const int hi = high_ord > 0 ? high_ord : nc;
  auto tag = [&](int ord, LevelTag t) {
    if (ord >= 1 && ord <= nc) spec.layers[convs[ord - 1]].level = t;
  };
  tag(lo, LevelTag::Low);
  tag(mi, LevelTag::Mid);
  tag(hi, LevelTag::High);
}

int apply_stem_transform(NetworkSpec& spec, float drop_p) {
  int replaced = 0;
  std::vector<LayerSpec> out;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerKind::Conv && l.kernel >= 7 && l.stride >= 2) {
      out.push_back(LayerSpec::conv(l.in_ch, l.out_ch, 3, 1, 1, l.use_bias));
      out.push_back(LayerSpec::dropout(drop_p));
      out.push_back(LayerSpec::conv(l.out_ch, l.out_ch, 3, 1, 1, l.use_bias));
      out.push_back(LayerSpec::dropout(drop_p));
      out.push_back(LayerSpec::conv(l.out_ch, l.out_ch, 3, 1, 1, l.use_bias));
      out.push_back(LayerSpec::avgpool(l.stride));
      ++replaced;
    } else {
      out.push_back(l);
    }
  }
  spec.layers = std::move(out);
  return replaced;
}

NetworkSpec build_architecture(const std::string& name, const Shape& input, int classes,
                               float drop_p) {
  if (input.size() != 3) throw std::invalid_argument("architecture input must be [C,H,W]");
  const int c = input[0], h = input[1], w = input[2];
  NetworkSpec spec;
  spec.input = input;
  spec.classes = classes;
  auto& L = spec.layers;
  if (name == "teacher-cnn") {
    spec.role = Role::Teacher;
    L.push_back(LayerSpec::conv(c, 16, 3, 1, 1, true));
    L.push_back(LayerSpec::batchnorm(16));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::conv(16, 16, 3, 1, 1, true));
    L.push_back(LayerSpec::batchnorm(16));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::avgpool(2));
    L.push_back(LayerSpec::conv(16, 32, 3, 1, 1, true));
    L.push_back(LayerSpec::batchnorm(32));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::conv(32, 32, 3, 1, 1, true));
    L.push_back(LayerSpec::batchnorm(32));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::avgpool(2));
    L.push_back(LayerSpec::conv(32, 48, 3, 1, 1, true));
    L.push_back(LayerSpec::batchnorm(48));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::conv(48, 48, 3, 1, 1, true));
    L.push_back(LayerSpec::batchnorm(48));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::flatten());
    L.push_back(LayerSpec::linear(48 * (h / 4) * (w / 4), 128, true));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::dropout(drop_p));
    L.push_back(LayerSpec::linear(128, classes, true));
  } else if (name == "3conv2linear") {
    spec.role = Role::Intermediate;
    L.push_back(LayerSpec::conv(c, 8, 3, 1, 1, false));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::avgpool(2));
    L.push_back(LayerSpec::dropout(drop_p));
    L.push_back(LayerSpec::conv(8, 16, 3, 1, 1, false));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::avgpool(2));
    L.push_back(LayerSpec::dropout(drop_p));
    L.push_back(LayerSpec::conv(16, 16, 3, 1, 1, false));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::flatten());
    L.push_back(LayerSpec::linear(16 * (h / 4) * (w / 4), 64, false));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::dropout(drop_p));
    L.push_back(LayerSpec::linear(64, classes, false));
  } else if (name == "vgg5s") {
    spec.role = Role::Intermediate;
    L.push_back(LayerSpec::conv(c, 8, 3, 1, 1, false));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::conv(8, 8, 3, 1, 1, false));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::avgpool(2));
    L.push_back(LayerSpec::dropout(drop_p));
    L.push_back(LayerSpec::conv(8, 16, 3, 1, 1, false));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::avgpool(2));
    L.push_back(LayerSpec::dropout(drop_p));
    L.push_back(LayerSpec::conv(16, 16, 3, 1, 1, false));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::flatten());
    L.push_back(LayerSpec::linear(16 * (h / 4) * (w / 4), 64, false));
    L.push_back(LayerSpec::relu());
    L.push_back(LayerSpec::dropout(drop_p));
    L.push_back(LayerSpec::linear(64, classes, false));
  } else {
    throw std::invalid_argument("unknown architecture '" + name + "'");
  }
  assign_level_tags(spec);
  check_composition(spec);
  return spec;
}

namespace {

std::string fmt_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

Role parse_role(const std::string& s) {
  if (s == "teacher") return Role::Teacher;
  if (s == "intermediate") return Role::Intermediate;
  if (s == "student-snn") return Role::StudentSnn;
  throw std::invalid_argument("unknown role '" + s + "'");
}

LevelTag parse_level(const std::string& s) {
  if (s == "none") return LevelTag::None;
  if (s == "low") return LevelTag::Low;
  if (s == "mid") return LevelTag::Mid;
  if (s == "high") return LevelTag::High;
  throw std::invalid_argument("unknown level '" + s + "'");
}

}  // namespace

std::string serialize_spec(const NetworkSpec& spec, const TrainMeta& meta) {
  std::ostringstream os;
  os << "lasnn-spec v1\n";
  os << "role " << to_string(spec.role) << "\n";
  os << "input " << spec.input[0] << " " << spec.input[1] << " " << spec.input[2] << "\n";
  os << "classes " << spec.classes << "\n";
  os << "epoch " << meta.epoch << "\n";
  os << "seed " << meta.seed << "\n";
  os << "config " << (meta.config_hash.empty() ? "-" : meta.config_hash) << "\n";
  for (const LayerSpec& l : spec.layers) {
    os << "layer " << to_string(l.kind);
    switch (l.kind) {
      case LayerKind::Conv:
        os << " in " << l.in_ch << " out " << l.out_ch << " k " << l.kernel << " s "
           << l.stride << " p " << l.pad << " bias " << (l.use_bias ? 1 : 0) << " level "
           << to_string(l.level);
        break;
      case LayerKind::Linear:
        os << " in " << l.in_dim << " out " << l.out_dim << " bias " << (l.use_bias ? 1 : 0);
        break;
      case LayerKind::AvgPool:
      case LayerKind::MaxPool:
        os << " k " << l.pool_k;
        break;
      case LayerKind::Dropout:
        os << " p " << fmt_float(l.drop_p);
        break;
      case LayerKind::BatchNorm:
        os << " ch " << l.channels;
        break;
      default:
        break;
    }
    os << "\n";
  }
  os << "end\n";
  return os.str();
}

void parse_spec(const std::string& text, NetworkSpec* spec, TrainMeta* meta) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "lasnn-spec v1")
    throw std::runtime_error("spec document: bad header");
  NetworkSpec out;
  TrainMeta m;
  bool ended = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end") { ended = true; break; }
    if (key == "role") {
      std::string r; ls >> r;
      out.role = parse_role(r);
    } else if (key == "input") {
      int c, h, w;
      if (!(ls >> c >> h >> w)) throw std::runtime_error("spec document: bad input line");
      out.input = {c, h, w};
    } else if (key == "classes") {
      ls >> out.classes;
    } else if (key == "epoch") {
      ls >> m.epoch;
    } else if (key == "seed") {
      ls >> m.seed;
    } else if (key == "config") {
      ls >> m.config_hash;
      if (m.config_hash == "-") m.config_hash.clear();
    } else if (key == "layer") {
      std::string kind;
      ls >> kind;
      LayerSpec l;
      auto expect = [&](const char* want) {
        std::string tok;
        if (!(ls >> tok) || tok != want)
          throw std::runtime_error("spec document: expected '" + std::string(want) +
                                   "' in line: " + line);
      };
      if (kind == "conv") {
        int bias; std::string level;
        expect("in"); ls >> l.in_ch;
        expect("out"); ls >> l.out_ch;
        expect("k"); ls >> l.kernel;
        expect("s"); ls >> l.stride;
        expect("p"); ls >> l.pad;
        expect("bias"); ls >> bias;
        expect("level"); ls >> level;
        l.kind = LayerKind::Conv;
        l.use_bias = bias != 0;
        l.level = parse_level(level);
      } else if (kind == "linear") {
        int bias;
        expect("in"); ls >> l.in_dim;
        expect("out"); ls >> l.out_dim;
        expect("bias"); ls >> bias;
        l.kind = LayerKind::Linear;
        l.use_bias = bias != 0;
      } else if (kind == "relu") {
        l.kind = LayerKind::Relu;
      } else if (kind == "avgpool" || kind == "maxpool") {
        expect("k"); ls >> l.pool_k;
        l.kind = kind == "avgpool" ? LayerKind::AvgPool : LayerKind::MaxPool;
      } else if (kind == "dropout") {
        expect("p"); ls >> l.drop_p;
        l.kind = LayerKind::Dropout;
      } else if (kind == "batchnorm") {
        expect("ch"); ls >> l.channels;
        l.kind = LayerKind::BatchNorm;
      } else if (kind == "flatten") {
        l.kind = LayerKind::Flatten;
      } else {
        throw std::runtime_error("spec document: unknown layer kind '" + kind + "'");
      }
      if (!ls) throw std::runtime_error("spec document: malformed layer line: " + line);
      out.layers.push_back(l);
    } else {
      throw std::runtime_error("spec document: unknown key '" + key + "'");
    }
  }
  if (!ended) throw std::runtime_error("spec document: missing 'end'");
  check_composition(out);
  if (spec) *spec = std::move(out);
  if (meta) *meta = std::move(m);
}

namespace {

constexpr char kMagic[6] = {'L', 'A', 'S', 'N', 'N', '\x01'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint: truncated u32");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

float read_f32(std::istream& is) {
  const std::uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void write_blob(std::ostream& os, const Tensor& t) {
  for (float v : t.data) write_f32(os, v);
}

void read_blob(std::istream& is, Tensor& t) {
  for (float& v : t.data) v = read_f32(is);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  const std::string doc = serialize_spec(ckpt.spec, ckpt.meta);
  write_u32(os, static_cast<std::uint32_t>(doc.size()));
  os.write(doc.data(), static_cast<std::streamsize>(doc.size()));
  for (std::size_t i = 0; i < ckpt.spec.layers.size(); ++i) {
    const LayerSpec& l = ckpt.spec.layers[i];
    const LayerParams& p = ckpt.params[i];
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::Linear) {
      write_blob(os, p.w);
      if (l.use_bias) write_blob(os, p.b);
    } else if (l.kind == LayerKind::BatchNorm) {
      write_blob(os, p.w);
      write_blob(os, p.b);
      write_blob(os, p.run_mean);
      write_blob(os, p.run_var);
    }
  }
  if (ckpt.spec.role == Role::StudentSnn) {
    if (!ckpt.thresholds)
      throw std::runtime_error("student-snn checkpoint is missing its threshold block");
    const CalibrationReport& r = *ckpt.thresholds;
    write_u32(os, static_cast<std::uint32_t>(r.entries.size()));
    for (const ThresholdEntry& e : r.entries) {
      write_u32(os, static_cast<std::uint32_t>(e.layer_index));
      write_f32(os, e.max_preact);
      write_f32(os, e.threshold);
    }
    write_u32(os, static_cast<std::uint32_t>(r.samples));
    write_u32(os, static_cast<std::uint32_t>(r.time_steps));
    write_f32(os, r.percentile);
  } else if (ckpt.thresholds) {
    throw std::runtime_error("threshold block present but role is " +
                             std::string(to_string(ckpt.spec.role)));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[6];
  if (!is.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0)
    throw std::runtime_error("not a checkpoint file (bad magic): " + path);
  const std::uint32_t doc_len = read_u32(is);
  std::string doc(doc_len, '\0');
  if (!is.read(doc.data(), doc_len)) throw std::runtime_error("checkpoint: truncated spec");
  Checkpoint ckpt;
  parse_spec(doc, &ckpt.spec, &ckpt.meta);
  ckpt.params.resize(ckpt.spec.layers.size());
  for (std::size_t i = 0; i < ckpt.spec.layers.size(); ++i) {
    const LayerSpec& l = ckpt.spec.layers[i];
    LayerParams& p = ckpt.params[i];
    if (l.kind == LayerKind::Conv) {
      p.w = Tensor({l.out_ch, l.in_ch, l.kernel, l.kernel});
      read_blob(is, p.w);
      if (l.use_bias) { p.b = Tensor({l.out_ch}); read_blob(is, p.b); }
    } else if (l.kind == LayerKind::Linear) {
      p.w = Tensor({l.out_dim, l.in_dim});
      read_blob(is, p.w);
      if (l.use_bias) { p.b = Tensor({l.out_dim}); read_blob(is, p.b); }
    } else if (l.kind == LayerKind::BatchNorm) {
      p.w = Tensor({l.channels});
      p.b = Tensor({l.channels});
      p.run_mean = Tensor({l.channels});
      p.run_var = Tensor({l.channels});
      read_blob(is, p.w);
      read_blob(is, p.b);
      read_blob(is, p.run_mean);
      read_blob(is, p.run_var);
    }
  }
  if (ckpt.spec.role == Role::StudentSnn) {
    CalibrationReport r;
    const std::uint32_t count = read_u32(is);
    r.entries.resize(count);
    for (ThresholdEntry& e : r.entries) {
      e.layer_index = static_cast<int>(read_u32(is));
      e.max_preact = read_f32(is);
      e.threshold = read_f32(is);
    }
    r.samples = static_cast<int>(read_u32(is));
    r.time_steps = static_cast<int>(read_u32(is));
    r.percentile = read_f32(is);
    ckpt.thresholds = std::move(r);
  }
  is.peek();
  if (!is.eof()) throw std::runtime_error("checkpoint has trailing bytes: " + path);
  return ckpt;
}

}  // namespace lasnn
