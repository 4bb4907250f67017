#include "lasnn/distill.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "lasnn/kernels.hpp"
#include "lasnn/ops.hpp"

namespace lasnn {

DistillMode parse_distill_mode(const std::string& s) {
  if (s == "activation") return DistillMode::Activation;
  if (s == "gradient") return DistillMode::Gradient;
  if (s == "hybrid") return DistillMode::Hybrid;
  throw std::invalid_argument("unknown distill mode '" + s + "'");
}

const char* to_string(DistillMode m) {
  switch (m) {
    case DistillMode::Activation: return "activation";
    case DistillMode::Gradient: return "gradient";
    case DistillMode::Hybrid: return "hybrid";
  }
  return "?";
}

std::vector<PairEntry> resolve_pairs(const NetworkSpec& teacher, const NetworkSpec& student,
                                     unsigned levels) {
  auto find_tag = [](const NetworkSpec& spec, LevelTag t) {
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
      if (spec.layers[i].kind == LayerKind::Conv && spec.layers[i].level == t)
        return static_cast<int>(i);
    return -1;
  };
  std::vector<PairEntry> pairs;
  for (LevelTag t : {LevelTag::Low, LevelTag::Mid, LevelTag::High}) {
    if (!(levels & level_bit(t))) continue;
    const int ti = find_tag(teacher, t);
    const int si = find_tag(student, t);
    if (ti >= 0 && si >= 0) pairs.push_back({t, ti, si});
  }
  if (pairs.empty())
    throw std::invalid_argument("no attention level pairs up between teacher and student");
  return pairs;
}

namespace {

// Channel mean of squares into an [H,M] map; raw (unnormalized).
Tensor raw_map(const float* act, int c, int h, int m) {
  Tensor map({h, m});
  const std::size_t plane = static_cast<std::size_t>(h) * m;
  const float invc = 1.0f / static_cast<float>(c);
  for (int ch = 0; ch < c; ++ch) {
    const float* src = act + static_cast<std::size_t>(ch) * plane;
    float* dst = map.ptr();
    for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i] * src[i] * invc;
  }
  return map;
}

double frob_norm(const Tensor& t) {
  double s = 0.0;
  for (float v : t.data) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

void normalize_in_place(Tensor& map) {
  const double r = frob_norm(map);
  if (r > 0.0) {
    const float inv = static_cast<float>(1.0 / r);
    kern::table().scale(inv, map.ptr(), map.data.size());
  }
}

}  // namespace

Tensor attention_map(const Tensor& activation, bool normalize) {
  if (activation.ndim() != 3)
    throw std::invalid_argument("attention_map: activation must be [C,H,M], got " +
                                shape_str(activation.shape));
  activation.check_finite("attention_map input");
  Tensor map = raw_map(activation.ptr(), activation.dim(0), activation.dim(1), activation.dim(2));
  if (normalize) normalize_in_place(map);
  return map;
}

Tensor student_attention_from_spikes(const SpikeRecord& record, int layer_index, int sample,
                                     bool use_membrane, bool normalize) {
  const int stage = record.stage_of_layer(layer_index);
  const Tensor& counts = record.counts[static_cast<std::size_t>(stage)];
  if (counts.ndim() != 4)
    throw std::invalid_argument("student attention needs a conv layer, got shape " +
                                shape_str(counts.shape));
  const int c = counts.dim(1), h = counts.dim(2), w = counts.dim(3);
  const std::size_t per = static_cast<std::size_t>(c) * h * w;
  Tensor act({c, h, w});
  if (!use_membrane) {
    std::memcpy(act.ptr(), counts.ptr() + static_cast<std::size_t>(sample) * per,
                per * sizeof(float));
  } else {
    if (!record.full)
      throw std::invalid_argument("membrane attention needs a full-record forward");
    for (int t = 0; t < record.T; ++t)
      kern::table().axpy(1.0f,
                         record.v[static_cast<std::size_t>(stage)][static_cast<std::size_t>(t)].ptr() +
                             static_cast<std::size_t>(sample) * per,
                         act.ptr(), per);
  }
  return attention_map(act, normalize);
}

double attention_loss(const std::vector<std::pair<Tensor, Tensor>>& map_pairs) {
  double total = 0.0;
  for (const auto& [a, b] : map_pairs) {
    if (!same_shape(a, b))
      throw std::invalid_argument("attention_loss: map shapes differ, " + shape_str(a.shape) +
                                  " vs " + shape_str(b.shape));
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      const double d = static_cast<double>(a.data[i]) - b.data[i];
      s += d * d;
    }
    total += std::sqrt(s);
  }
  return total;
}

Tensor sam_map(const SpikeRecord& record, int layer_index, int sample, int t) {
  if (!record.full) throw std::invalid_argument("sam_map needs a full-record forward");
  if (t < 0 || t >= record.T) throw std::invalid_argument("sam_map: step out of range");
  const int stage = record.stage_of_layer(layer_index);
  const auto& o = record.o[static_cast<std::size_t>(stage)];
  if (o[0].ndim() != 4)
    throw std::invalid_argument("sam_map needs a conv layer");
  const int c = o[0].dim(1), h = o[0].dim(2), w = o[0].dim(3);
  const std::size_t per = static_cast<std::size_t>(c) * h * w;
  const std::size_t base = static_cast<std::size_t>(sample) * per;
  Tensor map({h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t idx = base + (static_cast<std::size_t>(ch) * h + y) * w + x;
        if (o[static_cast<std::size_t>(t)][static_cast<std::int64_t>(idx)] == 0.0f) continue;
        double acc = 0.0;
        for (int tp = 0; tp <= t; ++tp)
          if (o[static_cast<std::size_t>(tp)][static_cast<std::int64_t>(idx)] != 0.0f)
            acc += std::exp(-static_cast<double>(t - tp));
        map.at(y, x) += static_cast<float>(acc);
      }
  }
  return map;
}

std::vector<Tensor> gradient_attention_teacher(Checkpoint& teacher, const Tensor& image,
                                               int label, const std::vector<Shape>& targets,
                                               bool normalize) {
  Tensor g = input_gradient(teacher, image, label);
  Tensor base = attention_map(g, false);
  std::vector<Tensor> out;
  for (const Shape& s : targets) {
    Tensor m = ops::interpolate_bilinear(base, s[0], s[1]);
    if (normalize) normalize_in_place(m);
    out.push_back(std::move(m));
  }
  return out;
}

double total_loss(double ce, double at_loss, float alpha) {
  return ce + 0.5 * static_cast<double>(alpha) * at_loss;
}

namespace {

// Gradient of ||M̂ - target||_2 w.r.t. the raw (pre-normalization) map,
// scaled by `weight`. M̂ = raw / ||raw|| when normalizing. Returns the loss
// term and writes d(raw) into draw.
double map_difference_grad(const Tensor& raw, const Tensor& target, bool normalize,
                           float weight, Tensor* draw) {
  Tensor m = raw;
  const double r = frob_norm(raw);
  if (normalize && r > 0.0)
    kern::table().scale(static_cast<float>(1.0 / r), m.ptr(), m.data.size());
  double s = 0.0;
  Tensor dm(m.shape);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    const double d = static_cast<double>(m.data[i]) - target.data[i];
    s += d * d;
  }
  const double dist = std::sqrt(s);
  if (dist > 0.0) {
    const float inv = static_cast<float>(1.0 / dist) * weight;
    for (std::size_t i = 0; i < m.data.size(); ++i)
      dm.data[i] = (m.data[i] - target.data[i]) * inv;
  }
  if (normalize && r > 0.0) {
    // d(raw) = dm/r - raw * <raw, dm> / r^3
    double dot = 0.0;
    for (std::size_t i = 0; i < m.data.size(); ++i)
      dot += static_cast<double>(raw.data[i]) * dm.data[i];
    const float c1 = static_cast<float>(1.0 / r);
    const float c2 = static_cast<float>(dot / (r * r * r));
    *draw = Tensor(m.shape);
    for (std::size_t i = 0; i < m.data.size(); ++i)
      draw->data[i] = dm.data[i] * c1 - raw.data[i] * c2;
  } else {
    *draw = std::move(dm);
  }
  return dist;
}

struct StageView {
  int stage = -1;
  int c = 0, h = 0, w = 0;
  std::size_t per = 0;
};

StageView stage_view(const SpikeRecord& rec, int layer_index) {
  StageView v;
  v.stage = rec.stage_of_layer(layer_index);
  const Tensor& counts = rec.counts[static_cast<std::size_t>(v.stage)];
  if (counts.ndim() != 4)
    throw std::invalid_argument("attention pairing requires conv layers");
  v.c = counts.dim(1);
  v.h = counts.dim(2);
  v.w = counts.dim(3);
  v.per = static_cast<std::size_t>(v.c) * v.h * v.w;
  return v;
}

}  // namespace

DistillEpochResult distill_epoch(Checkpoint& teacher, Checkpoint& student,
                                 const std::vector<LabeledImage>& train,
                                 const DistillConfig& dcfg, const SnnConfig& scfg,
                                 Coding coding, Optimizer& opt, std::uint64_t seed,
                                 int epoch, int batch_size) {
  if (student.spec.role != Role::StudentSnn)
    throw std::invalid_argument("distill_epoch: student must be a converted student-snn");
  const bool use_attention = dcfg.mode != DistillMode::Hybrid && dcfg.alpha != 0.0f;
  if (use_attention && dcfg.pairs.empty())
    throw std::invalid_argument("distill_epoch: no layer pairs configured");
  for (const PairEntry& p : dcfg.pairs) {
    if (use_attention &&
        (p.teacher_layer < 0 ||
         p.teacher_layer >= static_cast<int>(teacher.spec.layers.size()) ||
         p.student_layer < 0 ||
         p.student_layer >= static_cast<int>(student.spec.layers.size())))
      throw std::invalid_argument("distill_epoch: pairing references a missing layer");
  }

  SnnConfig cfg = scfg;
  cfg.train_dropout = true;
  const std::size_t n_stages = spiking_layer_indices(student.spec).size();

  DistillEpochResult res;
  double ce_sum = 0, at_sum = 0, total_sum = 0;
  std::int64_t seen = 0;

  BatchIter iter(train, batch_size, derive_seed(seed, "order"), epoch);
  Batch b;
  int batch_idx = 0;
  while (iter.next(&b)) {
    const int n = static_cast<int>(b.labels.size());
    std::vector<std::uint64_t> enc_seeds(b.indices.size());
    for (std::size_t i = 0; i < b.indices.size(); ++i)
      enc_seeds[i] = derive_seed(seed, "train-encode", static_cast<std::uint64_t>(b.indices[i]),
                                 static_cast<std::uint64_t>(epoch));
    BatchEncoder enc(coding, b.images, std::move(enc_seeds));
    Rng drop_rng(derive_seed(seed, "snn-dropout", static_cast<std::uint64_t>(epoch),
                             static_cast<std::uint64_t>(batch_idx)));
    SnnForwardResult fwd = snn_forward(student, enc, cfg, true, &drop_rng);
    CeResult ce = cross_entropy(fwd.record.out_potential, b.labels);

    double at_batch = 0.0;
    SpikeGradInjection inject;
    if (use_attention) {
      inject.per_count.assign(n_stages, Tensor{});
      inject.final_step.assign(n_stages, Tensor{});
      const float weight = 0.5f * dcfg.alpha / static_cast<float>(n);

      if (dcfg.mode == DistillMode::Activation) {
        if (dcfg.student_use_membrane) inject.per_membrane.assign(n_stages, Tensor{});
        unsigned mask = 0;
        for (const PairEntry& p : dcfg.pairs)
          mask |= level_bit(teacher.spec.layers[static_cast<std::size_t>(p.teacher_layer)].level);
        AnnResult tfwd = ann_forward(teacher, b.images, RunMode::Eval, mask, nullptr, nullptr);
        for (const PairEntry& p : dcfg.pairs) {
          const LevelTag lvl = teacher.spec.layers[static_cast<std::size_t>(p.teacher_layer)].level;
          const Tensor& tact = tfwd.level(lvl);
          const StageView sv = stage_view(fwd.record, p.student_layer);
          // student activation surrogate: spike counts, or the membrane sum
          Tensor vsum;
          const Tensor* act = &fwd.record.counts[static_cast<std::size_t>(sv.stage)];
          if (dcfg.student_use_membrane) {
            vsum = Tensor(act->shape);
            for (int t = 0; t < fwd.record.T; ++t)
              kern::table().axpy(1.0f,
                                 fwd.record.v[static_cast<std::size_t>(sv.stage)]
                                            [static_cast<std::size_t>(t)].ptr(),
                                 vsum.ptr(), vsum.data.size());
            act = &vsum;
          }
          Tensor& dact_out = dcfg.student_use_membrane
                                 ? inject.per_membrane[static_cast<std::size_t>(sv.stage)]
                                 : inject.per_count[static_cast<std::size_t>(sv.stage)];
          if (dact_out.empty()) dact_out = Tensor(act->shape);
          const int tc = tact.dim(1), th = tact.dim(2), tw = tact.dim(3);
          const std::size_t tper = static_cast<std::size_t>(tc) * th * tw;
          for (int i = 0; i < n; ++i) {
            Tensor tmap = raw_map(tact.ptr() + static_cast<std::size_t>(i) * tper, tc, th, tw);
            Tensor target = ops::interpolate_bilinear(tmap, sv.h, sv.w);
            if (dcfg.normalize_maps) normalize_in_place(target);

            const float* cs = act->ptr() + static_cast<std::size_t>(i) * sv.per;
            Tensor sraw = raw_map(cs, sv.c, sv.h, sv.w);
            Tensor draw;
            at_batch += map_difference_grad(sraw, target, dcfg.normalize_maps, weight, &draw);
            // d(raw)/d(act[c,h,w]) = (2/C) * act[c,h,w] at that (h,w)
            float* out = dact_out.ptr() + static_cast<std::size_t>(i) * sv.per;
            const float twoc = 2.0f / static_cast<float>(sv.c);
            for (int ch = 0; ch < sv.c; ++ch)
              for (std::size_t hw = 0; hw < static_cast<std::size_t>(sv.h) * sv.w; ++hw) {
                const std::size_t idx = static_cast<std::size_t>(ch) * sv.h * sv.w + hw;
                out[idx] += draw[static_cast<std::int64_t>(hw)] * twoc * cs[idx];
              }
          }
        }
      } else {  // gradient-based attention (SAM)
        // Per-sample teacher input gradients: one batched eval backward with
        // unaveraged CE gradients.
        AnnCache cache;
        AnnResult tfwd = ann_forward(teacher, b.images, RunMode::Eval, 0, nullptr, &cache);
        CeResult tce = cross_entropy(tfwd.logits, b.labels);
        Tensor grad_rows = tce.grad_logits;
        kern::table().scale(static_cast<float>(n), grad_rows.ptr(), grad_rows.data.size());
        Tensor gin = ann_backward(teacher, cache, RunMode::Eval, grad_rows, nullptr, true);
        const std::size_t iper = gin.data.size() / static_cast<std::size_t>(n);

        // Recency traces per stage: trace^t = e^{-1} * trace^{t-1} + o^t.
        const float decay = std::exp(-1.0f);
        std::vector<std::vector<Tensor>> step_traces;  // [stage][t] when per-step
        std::vector<Tensor> traces(n_stages);
        if (dcfg.sam_all_steps) {
          inject.per_step.assign(n_stages, {});
          step_traces.assign(n_stages, {});
        }
        for (const PairEntry& p : dcfg.pairs) {
          const StageView sv = stage_view(fwd.record, p.student_layer);
          Tensor& tr = traces[static_cast<std::size_t>(sv.stage)];
          if (tr.empty()) {
            tr = Tensor(fwd.record.counts[static_cast<std::size_t>(sv.stage)].shape);
            for (int t = 0; t < fwd.record.T; ++t) {
              kern::table().scale(decay, tr.ptr(), tr.data.size());
              kern::table().axpy(1.0f,
                                 fwd.record.o[static_cast<std::size_t>(sv.stage)]
                                            [static_cast<std::size_t>(t)].ptr(),
                                 tr.ptr(), tr.data.size());
              if (dcfg.sam_all_steps)
                step_traces[static_cast<std::size_t>(sv.stage)].push_back(tr);
            }
          }
        }

        for (const PairEntry& p : dcfg.pairs) {
          const StageView sv = stage_view(fwd.record, p.student_layer);
          const auto& o_stage = fwd.record.o[static_cast<std::size_t>(sv.stage)];
          for (int i = 0; i < n; ++i) {
            Tensor base = raw_map(gin.ptr() + static_cast<std::size_t>(i) * iper,
                                  teacher.spec.input[0], teacher.spec.input[1],
                                  teacher.spec.input[2]);
            Tensor target = ops::interpolate_bilinear(base, sv.h, sv.w);
            if (dcfg.normalize_maps) normalize_in_place(target);

            auto sam_at = [&](const Tensor& trace, const Tensor& o_t, Tensor* raw) {
              *raw = Tensor({sv.h, sv.w});
              const float* tp = trace.ptr() + static_cast<std::size_t>(i) * sv.per;
              const float* op = o_t.ptr() + static_cast<std::size_t>(i) * sv.per;
              for (int ch = 0; ch < sv.c; ++ch)
                for (std::size_t hw = 0; hw < static_cast<std::size_t>(sv.h) * sv.w; ++hw) {
                  const std::size_t idx = static_cast<std::size_t>(ch) * sv.h * sv.w + hw;
                  raw->data[hw] += op[idx] * tp[idx];
                }
            };
            auto inject_from = [&](const Tensor& trace, const Tensor& o_t, const Tensor& draw,
                                   Tensor& dst) {
              // dSAM/do^t treats the recency trace as a constant weight.
              if (dst.empty()) dst = Tensor(o_t.shape);
              float* out = dst.ptr() + static_cast<std::size_t>(i) * sv.per;
              const float* tp = trace.ptr() + static_cast<std::size_t>(i) * sv.per;
              for (int ch = 0; ch < sv.c; ++ch)
                for (std::size_t hw = 0; hw < static_cast<std::size_t>(sv.h) * sv.w; ++hw) {
                  const std::size_t idx = static_cast<std::size_t>(ch) * sv.h * sv.w + hw;
                  out[idx] += draw[static_cast<std::int64_t>(hw)] * tp[idx];
                }
            };

            if (!dcfg.sam_all_steps) {
              Tensor raw, draw;
              sam_at(traces[static_cast<std::size_t>(sv.stage)], o_stage.back(), &raw);
              at_batch += map_difference_grad(raw, target, dcfg.normalize_maps, weight, &draw);
              inject_from(traces[static_cast<std::size_t>(sv.stage)], o_stage.back(), draw,
                          inject.final_step[static_cast<std::size_t>(sv.stage)]);
            } else {
              auto& steps = inject.per_step[static_cast<std::size_t>(sv.stage)];
              if (steps.empty()) steps.assign(static_cast<std::size_t>(fwd.record.T), Tensor{});
              const float wt = weight / static_cast<float>(fwd.record.T);
              double acc = 0.0;
              for (int t = 0; t < fwd.record.T; ++t) {
                Tensor raw, draw;
                const Tensor& tr =
                    step_traces[static_cast<std::size_t>(sv.stage)][static_cast<std::size_t>(t)];
                sam_at(tr, o_stage[static_cast<std::size_t>(t)], &raw);
                acc += map_difference_grad(raw, target, dcfg.normalize_maps, wt, &draw);
                inject_from(tr, o_stage[static_cast<std::size_t>(t)], draw,
                            steps[static_cast<std::size_t>(t)]);
              }
              at_batch += acc / fwd.record.T;
            }
          }
        }
      }
      at_batch /= n;
    }

    const double total = total_loss(ce.loss, at_batch, use_attention ? dcfg.alpha : 0.0f);
    if (!std::isfinite(total))
      throw std::runtime_error("distillation diverged: loss not finite at epoch " +
                               std::to_string(epoch) + " batch " + std::to_string(batch_idx));
    AnnGrads grads = snn_backward(student, fwd.record, enc, cfg, ce.grad_logits,
                                  use_attention ? &inject : nullptr);
    opt.step(student, grads);

    ce_sum += ce.loss * n;
    at_sum += at_batch * n;
    total_sum += total * n;
    seen += n;
    ++batch_idx;
  }
  res.ce = ce_sum / static_cast<double>(seen);
  res.at = at_sum / static_cast<double>(seen);
  res.total = total_sum / static_cast<double>(seen);
  return res;
}

}  // namespace lasnn
