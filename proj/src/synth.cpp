#include "lasnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "lasnn/rng.hpp"

namespace lasnn {
namespace {

struct Pt {
  float x, y;
};

using Stroke = std::vector<Pt>;

// Digit glyphs as polylines in the unit square (x right, y down).
std::vector<Stroke> glyph_for(int digit, Rng& rng) {
  auto ring = [](float cx, float cy, float rx, float ry, int n) {
    Stroke s;
    for (int i = 0; i <= n; ++i) {
      const float a = 6.2831853f * static_cast<float>(i) / static_cast<float>(n);
      s.push_back({cx + rx * std::sin(a), cy - ry * std::cos(a)});
    }
    return s;
  };
  switch (digit) {
    case 0:
      return {ring(0.5f, 0.5f, 0.26f, 0.37f, 12)};
    case 1: {
      std::vector<Stroke> s = {{{0.36f, 0.26f}, {0.55f, 0.12f}, {0.55f, 0.88f}}};
      if (rng.next_float() < 0.5f) s.push_back({{0.36f, 0.88f}, {0.74f, 0.88f}});
      return s;
    }
    case 2:
      return {{{0.26f, 0.32f}, {0.32f, 0.16f}, {0.52f, 0.11f}, {0.70f, 0.18f},
               {0.74f, 0.34f}, {0.60f, 0.54f}, {0.26f, 0.88f}},
              {{0.26f, 0.88f}, {0.76f, 0.88f}}};
    case 3:
      return {{{0.27f, 0.16f}, {0.58f, 0.12f}, {0.73f, 0.26f}, {0.52f, 0.46f},
               {0.73f, 0.64f}, {0.62f, 0.86f}, {0.27f, 0.84f}}};
    case 4:
      return {{{0.60f, 0.10f}, {0.23f, 0.62f}, {0.80f, 0.62f}},
              {{0.62f, 0.30f}, {0.62f, 0.90f}}};
    case 5:
      return {{{0.72f, 0.12f}, {0.31f, 0.12f}, {0.28f, 0.46f}},
              {{0.28f, 0.46f}, {0.58f, 0.42f}, {0.74f, 0.60f}, {0.60f, 0.84f},
               {0.28f, 0.80f}}};
    case 6:
      return {{{0.66f, 0.12f}, {0.42f, 0.30f}, {0.31f, 0.55f}, {0.35f, 0.80f},
               {0.58f, 0.88f}, {0.72f, 0.70f}, {0.60f, 0.52f}, {0.33f, 0.58f}}};
    case 7: {
      std::vector<Stroke> s = {{{0.24f, 0.14f}, {0.76f, 0.13f}, {0.45f, 0.88f}}};
      if (rng.next_float() < 0.5f) s.push_back({{0.34f, 0.50f}, {0.62f, 0.50f}});
      return s;
    }
    case 8:
      return {ring(0.5f, 0.30f, 0.18f, 0.19f, 10), ring(0.5f, 0.68f, 0.22f, 0.21f, 10)};
    case 9:
      return {ring(0.5f, 0.32f, 0.20f, 0.20f, 10),
              {{0.69f, 0.36f}, {0.67f, 0.66f}, {0.58f, 0.88f}}};
  }
  throw std::invalid_argument("digit out of range");
}

float seg_dist(Pt p, Pt a, Pt b) {
  const float dx = b.x - a.x, dy = b.y - a.y;
  const float len2 = dx * dx + dy * dy;
  float t = len2 > 0.0f ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0f;
  t = std::clamp(t, 0.0f, 1.0f);
  const float ex = p.x - (a.x + t * dx), ey = p.y - (a.y + t * dy);
  return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

void synth_render(std::uint64_t seed, const char* split, int index, float noise,
                  unsigned char* out) {
  constexpr int kSize = 28;
  const int digit = index % 10;
  Rng rng(derive_seed(seed, "synth", fnv1a64(split), static_cast<std::uint64_t>(index)));
  const std::vector<Stroke> strokes = glyph_for(digit, rng);

  const float thick = rng.next_float(0.050f, 0.085f);
  const float rot = rng.next_float(-0.30f, 0.30f);
  const float sx = rng.next_float(0.72f, 1.02f);
  const float sy = rng.next_float(0.72f, 1.02f);
  const float shear = rng.next_float(-0.20f, 0.20f);
  const float tx = rng.next_float(-0.08f, 0.08f);
  const float ty = rng.next_float(-0.08f, 0.08f);
  const float wob_amp = rng.next_float(0.0f, 0.03f);
  const float wob_freq = rng.next_float(1.0f, 3.0f);
  const float wob_phase = rng.next_float(0.0f, 6.2831853f);
  const float cr = std::cos(rot), sr = std::sin(rot);

  // screen -> glyph inverse map; rendering samples the distance field
  auto to_glyph = [&](float px, float py) {
    float x = px - 0.5f - tx;
    float y = py - 0.5f - ty;
    const float rx = cr * x + sr * y;
    const float ry = -sr * x + cr * y;
    float gx = rx / sx;
    float gy = ry / sy;
    gx -= shear * gy;
    gx += wob_amp * std::sin(6.2831853f * wob_freq * gy + wob_phase);
    return Pt{gx + 0.5f, gy + 0.5f};
  };

  const float aa = 0.035f;
  std::vector<float> img(kSize * kSize, 0.0f);
  for (int py = 0; py < kSize; ++py)
    for (int px = 0; px < kSize; ++px) {
      const Pt g = to_glyph((static_cast<float>(px) + 0.5f) / kSize,
                            (static_cast<float>(py) + 0.5f) / kSize);
      float best = 1e9f;
      for (const Stroke& s : strokes)
        for (std::size_t i = 0; i + 1 < s.size(); ++i)
          best = std::min(best, seg_dist(g, s[i], s[i + 1]));
      const float cov = std::clamp((thick - best) / aa + 0.5f, 0.0f, 1.0f);
      img[static_cast<std::size_t>(py) * kSize + px] = cov;
    }

  for (int i = 0; i < kSize * kSize; ++i) {
    float v = img[static_cast<std::size_t>(i)] + noise * rng.next_gaussian();
    v = std::clamp(v, 0.0f, 1.0f);
    out[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
}

namespace {

void be32(std::ofstream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_split(const std::string& images_path, const std::string& labels_path,
                 const char* split, int count, const SynthParams& p) {
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab)
    throw std::runtime_error("cannot write dataset files under " + images_path);
  be32(img, 0x803);
  be32(img, static_cast<std::uint32_t>(count));
  be32(img, 28);
  be32(img, 28);
  be32(lab, 0x801);
  be32(lab, static_cast<std::uint32_t>(count));
  std::vector<unsigned char> buf(28 * 28);
  for (int i = 0; i < count; ++i) {
    synth_render(p.seed, split, i, p.noise, buf.data());
    img.write(reinterpret_cast<const char*>(buf.data()), 28 * 28);
    lab.put(static_cast<char>(i % 10));
  }
  if (!img || !lab) throw std::runtime_error("dataset write failed");
}

}  // namespace

void synth_write_idx(const std::string& dir, const SynthParams& params, bool overwrite) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string ti = dir + "/train-images-idx3-ubyte";
  const std::string tl = dir + "/train-labels-idx1-ubyte";
  const std::string ei = dir + "/t10k-images-idx3-ubyte";
  const std::string el = dir + "/t10k-labels-idx1-ubyte";
  if (!overwrite && fs::exists(ti) && fs::exists(tl) && fs::exists(ei) && fs::exists(el))
    return;
  write_split(ti, tl, "train", params.train, params);
  write_split(ei, el, "test", params.test, params);
}

}  // namespace lasnn
