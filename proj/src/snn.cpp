#include "lasnn/snn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lasnn/kernels.hpp"
#include "lasnn/ops.hpp"

namespace lasnn {

void SnnConfig::validate() const {
  if (!(leak > 0.0f && leak <= 1.0f))
    throw std::invalid_argument("snn: leak must be in (0,1]");
  // gamma = 0 is allowed as the ablation that removes all spike-path credit.
  if (!(gamma >= 0.0f && gamma <= 1.0f))
    throw std::invalid_argument("snn: gamma must be in [0,1]");
  if (T < 1) throw std::invalid_argument("snn: T must be >= 1");
}

int SpikeRecord::stage_of_layer(int layer_index) const {
  for (std::size_t s = 0; s < layer_indices.size(); ++s)
    if (layer_indices[s] == layer_index) return static_cast<int>(s);
  throw std::invalid_argument("layer " + std::to_string(layer_index) +
                              " is not a recorded spiking layer");
}

void lif_step(Tensor& v, const Tensor& drive, const Tensor& prev_spikes,
              Tensor& spikes_out, float leak, float theta) {
  if (!same_shape(v, drive) || !same_shape(v, prev_spikes))
    throw std::invalid_argument("lif_step: shape mismatch between v " + shape_str(v.shape) +
                                ", drive " + shape_str(drive.shape) + ", spikes " +
                                shape_str(prev_spikes.shape));
  if (spikes_out.shape != v.shape) spikes_out = Tensor(v.shape);
  kern::table().lif_step(v.ptr(), drive.ptr(), prev_spikes.ptr(), spikes_out.ptr(),
                         v.data.size(), leak, theta);
}

Tensor surrogate_grad(const Tensor& v, float theta, float gamma) {
  if (theta <= 0.0f) throw std::invalid_argument("surrogate_grad: theta must be positive");
  Tensor out(v.shape);
  kern::table().surrogate(v.ptr(), out.ptr(), v.data.size(), theta, gamma);
  return out;
}

std::vector<double> predicted_distribution(const Tensor& out_potential) {
  const int n = out_potential.dim(0), c = out_potential.dim(1);
  std::vector<double> probs(static_cast<std::size_t>(n) * c);
  for (int i = 0; i < n; ++i) {
    const float* row = out_potential.ptr() + static_cast<std::size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double denom = 0.0;
    for (int j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
    double* prow = probs.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) prow[j] = std::exp(static_cast<double>(row[j]) - mx) / denom;
  }
  return probs;
}

std::vector<float> stage_thresholds(const Checkpoint& net) {
  if (!net.thresholds)
    throw std::invalid_argument("checkpoint has no threshold block; run conversion first");
  const auto spiking = spiking_layer_indices(net.spec);
  const auto& entries = net.thresholds->entries;
  if (entries.size() != spiking.size())
    throw std::invalid_argument("threshold block covers " + std::to_string(entries.size()) +
                                " layers, network has " + std::to_string(spiking.size()) +
                                " spiking layers");
  std::vector<float> th(spiking.size());
  for (std::size_t s = 0; s < spiking.size(); ++s) {
    if (entries[s].layer_index != spiking[s])
      throw std::invalid_argument("threshold entry order does not match spiking layers");
    th[s] = entries[s].threshold;
  }
  return th;
}

namespace {

struct Program {
  struct Stage {
    std::vector<int> pre_ops;  // avgpool/dropout/flatten spec indices
    int widx = -1;             // weighted layer spec index
  };
  std::vector<Stage> stages;     // hidden spiking stages, then the readout
  std::vector<Shape> out_shapes; // batchless output shape per spec layer
};

Program compile(const NetworkSpec& spec) {
  Program prog;
  prog.out_shapes = check_composition(spec);
  Program::Stage cur;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::Linear:
        if (l.use_bias)
          throw std::invalid_argument("layer " + std::to_string(i) +
                                      ": bias terms are not executable as an SNN");
        cur.widx = static_cast<int>(i);
        prog.stages.push_back(std::move(cur));
        cur = {};
        break;
      case LayerKind::Relu:
        break;  // spiking replaces the nonlinearity
      case LayerKind::AvgPool:
      case LayerKind::Dropout:
      case LayerKind::Flatten:
        cur.pre_ops.push_back(static_cast<int>(i));
        break;
      case LayerKind::MaxPool:
        throw std::invalid_argument("max pooling is not executable as an SNN");
      case LayerKind::BatchNorm:
        throw std::invalid_argument("batchnorm is not executable as an SNN");
    }
  }
  if (!cur.pre_ops.empty())
    throw std::invalid_argument("network must end with its readout layer");
  if (prog.stages.size() < 1)
    throw std::invalid_argument("network has no weighted layers");
  return prog;
}

Shape with_batch(int n, const Shape& s) {
  Shape out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

Shape layer_input_shape(const NetworkSpec& spec, const Program& prog, int layer_idx) {
  return layer_idx == 0 ? spec.input
                        : prog.out_shapes[static_cast<std::size_t>(layer_idx) - 1];
}

// Applies one pre-op to *cur, storing the result in scratch when a new tensor
// is produced; returns the tensor to read next.
const Tensor* apply_pre_op(const NetworkSpec& spec, const std::vector<Tensor>& masks,
                           int op_idx, const Tensor* cur, Tensor* scratch) {
  const LayerSpec& l = spec.layers[static_cast<std::size_t>(op_idx)];
  switch (l.kind) {
    case LayerKind::AvgPool:
      *scratch = ops::avgpool2d(*cur, l.pool_k);
      return scratch;
    case LayerKind::Dropout: {
      const Tensor& mask = masks[static_cast<std::size_t>(op_idx)];
      if (mask.empty()) return cur;  // inference: identity
      Tensor out(cur->shape);
      kern::table().mul(cur->ptr(), mask.ptr(), out.ptr(), out.data.size());
      *scratch = std::move(out);
      return scratch;
    }
    case LayerKind::Flatten:
      *scratch = cur->reshaped({cur->dim(0), static_cast<int>(cur->numel() / cur->dim(0))});
      return scratch;
    default:
      throw std::logic_error("unexpected pre-op kind");
  }
}

Tensor weighted_forward(const Checkpoint& net, int widx, const Tensor& x) {
  const LayerSpec& l = net.spec.layers[static_cast<std::size_t>(widx)];
  const LayerParams& p = net.params[static_cast<std::size_t>(widx)];
  if (l.kind == LayerKind::Conv) return ops::conv2d(x, p.w, nullptr, l.stride, l.pad);
  return ops::linear(x, p.w, nullptr);
}

void draw_dropout_masks(const NetworkSpec& spec, const Program& prog, int batch,
                        const SnnConfig& cfg, Rng* rng, std::vector<Tensor>* masks) {
  masks->assign(spec.layers.size(), Tensor{});
  if (!cfg.train_dropout) return;
  if (!rng) throw std::invalid_argument("snn: train_dropout requires an rng");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.kind != LayerKind::Dropout || l.drop_p <= 0.0f) continue;
    const Shape in = layer_input_shape(spec, prog, static_cast<int>(i));
    (*masks)[i] = ops::dropout_mask(with_batch(batch, in), l.drop_p, *rng);
  }
}

void update_last_spike(Tensor& last, const Tensor& spikes, int t) {
  float* lp = last.ptr();
  const float* sp = spikes.ptr();
  const float ft = static_cast<float>(t);
  for (std::size_t i = 0; i < last.data.size(); ++i)
    if (sp[i] != 0.0f) lp[i] = ft;
}

}  // namespace

SnnForwardResult snn_forward_raw(Checkpoint& net, const std::vector<float>& thresholds,
                                 const BatchEncoder& enc, const SnnConfig& cfg,
                                 bool full_record, Rng* dropout_rng,
                                 const DriveObserver* observer, int stage_limit) {
  cfg.validate();
  const NetworkSpec& spec = net.spec;
  const Program prog = compile(spec);
  const int n_hidden = static_cast<int>(prog.stages.size()) - 1;
  const int limit = stage_limit < 0 ? n_hidden : stage_limit;
  if (limit > n_hidden) throw std::invalid_argument("snn: stage_limit out of range");
  const int run_full = limit == n_hidden;
  if (static_cast<int>(thresholds.size()) < limit)
    throw std::invalid_argument("snn: need " + std::to_string(limit) + " thresholds, got " +
                                std::to_string(thresholds.size()));
  for (int s = 0; s < limit; ++s)
    if (!(thresholds[static_cast<std::size_t>(s)] > 0.0f))
      throw std::invalid_argument("snn: threshold of stage " + std::to_string(s) +
                                  " must be positive");
  const int batch = enc.images().dim(0);
  require_shape(enc.images(), with_batch(batch, spec.input), "snn input");

  SpikeRecord rec;
  rec.T = cfg.T;
  rec.batch = batch;
  rec.full = full_record;
  for (int s = 0; s < n_hidden; ++s)
    rec.layer_indices.push_back(prog.stages[static_cast<std::size_t>(s)].widx);
  rec.thresholds.assign(thresholds.begin(),
                        thresholds.begin() + std::min<std::size_t>(thresholds.size(),
                                                                   static_cast<std::size_t>(n_hidden)));
  draw_dropout_masks(spec, prog, batch, cfg, dropout_rng, &rec.dropout_masks);

  const int active = std::min(limit, n_hidden);
  std::vector<Tensor> v(static_cast<std::size_t>(active));
  std::vector<Tensor> o_cur(static_cast<std::size_t>(active));
  std::vector<Tensor> o_zero(static_cast<std::size_t>(active));
  rec.counts.resize(static_cast<std::size_t>(active));
  rec.last_spike.resize(static_cast<std::size_t>(active));
  if (full_record) {
    rec.v.resize(static_cast<std::size_t>(active));
    rec.o.resize(static_cast<std::size_t>(active));
  }
  for (int s = 0; s < active; ++s) {
    const Shape shape =
        with_batch(batch, prog.out_shapes[static_cast<std::size_t>(
                              prog.stages[static_cast<std::size_t>(s)].widx)]);
    v[static_cast<std::size_t>(s)] = Tensor(shape);
    o_cur[static_cast<std::size_t>(s)] = Tensor(shape);
    o_zero[static_cast<std::size_t>(s)] = Tensor(shape);
    rec.counts[static_cast<std::size_t>(s)] = Tensor(shape);
    rec.last_spike[static_cast<std::size_t>(s)] = Tensor(shape, -1.0f);
    rec.neurons.push_back(shape_numel(shape) / batch);
    if (full_record) {
      rec.v[static_cast<std::size_t>(s)].reserve(static_cast<std::size_t>(cfg.T));
      rec.o[static_cast<std::size_t>(s)].reserve(static_cast<std::size_t>(cfg.T));
    }
  }
  Tensor v_out;
  if (run_full) v_out = Tensor({batch, spec.classes});

  Tensor input_slice(enc.images().shape);
  const auto& kt = kern::table();
  for (int t = 0; t < cfg.T; ++t) {
    enc.slice(t, &input_slice);
    const Tensor* cur = &input_slice;
    for (int s = 0; s <= limit; ++s) {
      const bool is_readout = s == n_hidden;
      if (s == limit && !run_full && !observer && !is_readout) break;
      const Program::Stage& stage = prog.stages[static_cast<std::size_t>(s)];
      Tensor scratch;
      for (int op : stage.pre_ops)
        cur = apply_pre_op(spec, rec.dropout_masks, op, cur, &scratch);
      Tensor drive = weighted_forward(net, stage.widx, *cur);
      if (observer && !is_readout) (*observer)(s, t, drive);
      if (is_readout) {
        // Readout integrates with leak 1 and never fires (loss lives on the
        // final potential).
        kt.axpy(1.0f, drive.ptr(), v_out.ptr(), v_out.data.size());
        break;
      }
      if (s == limit) break;  // partial run: drive observed, dynamics not needed
      Tensor& vs = v[static_cast<std::size_t>(s)];
      const Tensor& o_prev =
          full_record ? (t == 0 ? o_zero[static_cast<std::size_t>(s)]
                                : rec.o[static_cast<std::size_t>(s)].back())
                      : o_cur[static_cast<std::size_t>(s)];
      Tensor o_new;
      if (!full_record) {
        // streaming: overwrite the previous spike tensor in place
        lif_step(vs, drive, o_prev, o_cur[static_cast<std::size_t>(s)], cfg.leak,
                 thresholds[static_cast<std::size_t>(s)]);
      } else {
        o_new = Tensor(vs.shape);
        lif_step(vs, drive, o_prev, o_new, cfg.leak, thresholds[static_cast<std::size_t>(s)]);
      }
      const Tensor& o_now = full_record ? o_new : o_cur[static_cast<std::size_t>(s)];
      kt.axpy(1.0f, o_now.ptr(), rec.counts[static_cast<std::size_t>(s)].ptr(),
              o_now.data.size());
      update_last_spike(rec.last_spike[static_cast<std::size_t>(s)], o_now, t);
      if (full_record) {
        rec.v[static_cast<std::size_t>(s)].push_back(vs);  // snapshot copy
        rec.o[static_cast<std::size_t>(s)].push_back(std::move(o_new));
        cur = &rec.o[static_cast<std::size_t>(s)].back();
      } else {
        cur = &o_cur[static_cast<std::size_t>(s)];
      }
    }
  }

  SnnForwardResult res;
  if (run_full) {
    res.probs = predicted_distribution(v_out);
    rec.out_potential = std::move(v_out);
  }
  res.record = std::move(rec);
  return res;
}

SnnForwardResult snn_forward(Checkpoint& net, const BatchEncoder& enc,
                             const SnnConfig& cfg, bool full_record, Rng* dropout_rng) {
  if (net.spec.role != Role::StudentSnn)
    throw std::invalid_argument("snn_forward: checkpoint role must be student-snn");
  return snn_forward_raw(net, stage_thresholds(net), enc, cfg, full_record, dropout_rng);
}

AnnGrads snn_backward(const Checkpoint& net, const SpikeRecord& record,
                      const BatchEncoder& enc, const SnnConfig& cfg,
                      const Tensor& grad_out_potential,
                      const SpikeGradInjection* inject) {
  if (!record.full)
    throw std::invalid_argument("snn_backward needs a full-record forward pass");
  const NetworkSpec& spec = net.spec;
  const Program prog = compile(spec);
  const int n_hidden = static_cast<int>(prog.stages.size()) - 1;
  if (static_cast<int>(record.layer_indices.size()) != n_hidden)
    throw std::invalid_argument("snn_backward: record does not match this network");
  for (int s = 0; s < n_hidden; ++s)
    if (record.layer_indices[static_cast<std::size_t>(s)] !=
        prog.stages[static_cast<std::size_t>(s)].widx)
      throw std::invalid_argument("snn_backward: record stage layout mismatch");
  const int batch = record.batch;
  require_shape(grad_out_potential, {batch, spec.classes}, "snn_backward grad_out_potential");

  AnnGrads grads;
  grads.layers.assign(spec.layers.size(), LayerParams{});
  for (const auto& stage : prog.stages) {
    const LayerParams& p = net.params[static_cast<std::size_t>(stage.widx)];
    grads.layers[static_cast<std::size_t>(stage.widx)].w = Tensor(p.w.shape);
  }

  std::vector<Tensor> dv_next(static_cast<std::size_t>(n_hidden));
  for (int s = 0; s < n_hidden; ++s)
    dv_next[static_cast<std::size_t>(s)] =
        Tensor(record.v[static_cast<std::size_t>(s)][0].shape);

  const auto& kt = kern::table();
  Tensor input_slice(enc.images().shape);
  std::vector<const Tensor*> stage_inputs(prog.stages.size());
  std::vector<Tensor> stage_scratch(prog.stages.size());

  for (int t = record.T - 1; t >= 0; --t) {
    // Recompute each weighted layer's input at step t from the stored spikes
    // (pool/dropout/flatten replay only; these need no saved activations).
    enc.slice(t, &input_slice);
    const Tensor* cur = &input_slice;
    for (std::size_t s = 0; s < prog.stages.size(); ++s) {
      Tensor scratch;
      for (int op : prog.stages[s].pre_ops)
        cur = apply_pre_op(spec, record.dropout_masks, op, cur, &scratch);
      stage_scratch[s] = (cur == &scratch) ? std::move(scratch) : *cur;
      stage_inputs[s] = &stage_scratch[s];
      if (s < static_cast<std::size_t>(n_hidden)) cur = &record.o[s][static_cast<std::size_t>(t)];
    }

    // Readout: v_out^t = v_out^{t-1} + W x^t, so dL/dv_out^t is constant in t.
    Tensor dx;
    {
      const int widx = prog.stages.back().widx;
      const LayerSpec& l = spec.layers[static_cast<std::size_t>(widx)];
      const LayerParams& p = net.params[static_cast<std::size_t>(widx)];
      Tensor* gw = &grads.layers[static_cast<std::size_t>(widx)].w;
      const Tensor& xin = *stage_inputs.back();
      if (l.kind == LayerKind::Linear)
        ops::linear_backward(grad_out_potential, xin, p.w, n_hidden > 0 ? &dx : nullptr, gw,
                             nullptr, true);
      else
        ops::conv2d_backward(grad_out_potential, xin, p.w, l.stride, l.pad,
                             n_hidden > 0 ? &dx : nullptr, gw, nullptr, true);
    }

    for (int s = n_hidden - 1; s >= 0; --s) {
      // dx currently holds dL/d(input of stage s+1); walk it back through the
      // pre-ops of stage s+1 to reach dL/do_s^t.
      const Program::Stage& above = prog.stages[static_cast<std::size_t>(s) + 1];
      for (auto it = above.pre_ops.rbegin(); it != above.pre_ops.rend(); ++it) {
        const LayerSpec& l = spec.layers[static_cast<std::size_t>(*it)];
        if (l.kind == LayerKind::AvgPool) {
          dx = ops::avgpool2d_backward(dx, l.pool_k);
        } else if (l.kind == LayerKind::Dropout) {
          const Tensor& mask = record.dropout_masks[static_cast<std::size_t>(*it)];
          if (!mask.empty()) {
            Tensor g(dx.shape);
            kt.mul(dx.ptr(), mask.ptr(), g.ptr(), g.data.size());
            dx = std::move(g);
          }
        } else {  // flatten
          const Shape in = layer_input_shape(spec, prog, *it);
          dx = dx.reshaped(with_batch(batch, in));
        }
      }

      Tensor do_t = std::move(dx);
      if (inject) {
        if (!inject->per_count.empty() && !inject->per_count[static_cast<std::size_t>(s)].empty())
          kt.axpy(1.0f, inject->per_count[static_cast<std::size_t>(s)].ptr(), do_t.ptr(),
                  do_t.data.size());
        if (t == record.T - 1 && !inject->final_step.empty() &&
            !inject->final_step[static_cast<std::size_t>(s)].empty())
          kt.axpy(1.0f, inject->final_step[static_cast<std::size_t>(s)].ptr(), do_t.ptr(),
                  do_t.data.size());
        if (!inject->per_step.empty() &&
            !inject->per_step[static_cast<std::size_t>(s)].empty() &&
            !inject->per_step[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)].empty())
          kt.axpy(1.0f,
                  inject->per_step[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)].ptr(),
                  do_t.ptr(), do_t.data.size());
      }
      const float theta = record.thresholds[static_cast<std::size_t>(s)];
      if (!cfg.detach_reset && t < record.T - 1)
        kt.axpy(-theta, dv_next[static_cast<std::size_t>(s)].ptr(), do_t.ptr(),
                do_t.data.size());

      const Tensor& vs = record.v[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)];
      Tensor dv(vs.shape);
      kt.surrogate(vs.ptr(), dv.ptr(), vs.data.size(), theta, cfg.gamma);
      {
        Tensor tmp(vs.shape);
        kt.mul(do_t.ptr(), dv.ptr(), tmp.ptr(), tmp.data.size());
        dv = std::move(tmp);
      }
      if (!cfg.detach_leak && t < record.T - 1)
        kt.axpy(cfg.leak, dv_next[static_cast<std::size_t>(s)].ptr(), dv.ptr(),
                dv.data.size());
      if (inject && !inject->per_membrane.empty() &&
          !inject->per_membrane[static_cast<std::size_t>(s)].empty())
        kt.axpy(1.0f, inject->per_membrane[static_cast<std::size_t>(s)].ptr(), dv.ptr(),
                dv.data.size());

      const int widx = prog.stages[static_cast<std::size_t>(s)].widx;
      const LayerSpec& l = spec.layers[static_cast<std::size_t>(widx)];
      const LayerParams& p = net.params[static_cast<std::size_t>(widx)];
      Tensor* gw = &grads.layers[static_cast<std::size_t>(widx)].w;
      const Tensor& xin = *stage_inputs[static_cast<std::size_t>(s)];
      Tensor gx;
      const bool need_gx = s > 0;
      if (l.kind == LayerKind::Linear)
        ops::linear_backward(dv, xin, p.w, need_gx ? &gx : nullptr, gw, nullptr, true);
      else
        ops::conv2d_backward(dv, xin, p.w, l.stride, l.pad, need_gx ? &gx : nullptr, gw,
                             nullptr, true);
      dx = std::move(gx);
      dv_next[static_cast<std::size_t>(s)] = std::move(dv);
    }
  }
  return grads;
}

SnnEvalResult snn_evaluate(Checkpoint& net, const std::vector<LabeledImage>& data,
                           const SnnConfig& cfg, Coding coding, std::uint64_t seed,
                           int batch_size, bool keep_records) {
  SnnEvalResult res;
  BatchIter iter(data, batch_size, 0, 0);
  Batch b;
  std::int64_t correct = 0;
  SnnConfig eval_cfg = cfg;
  eval_cfg.train_dropout = false;
  while (iter.next(&b)) {
    std::vector<std::uint64_t> seeds(b.indices.size());
    for (std::size_t i = 0; i < b.indices.size(); ++i)
      seeds[i] = derive_seed(seed, "eval-encode", static_cast<std::uint64_t>(b.indices[i]));
    BatchEncoder enc(coding, b.images, std::move(seeds));
    SnnForwardResult fwd = snn_forward(net, enc, eval_cfg, false, nullptr);
    const int classes = net.spec.classes;
    for (std::size_t i = 0; i < b.labels.size(); ++i) {
      const double* row = fwd.probs.data() + i * static_cast<std::size_t>(classes);
      int best = 0;
      for (int j = 1; j < classes; ++j)
        if (row[j] > row[best]) best = j;
      res.predictions.push_back(best);
      if (best == b.labels[i]) ++correct;
    }
    if (keep_records) res.records.push_back(std::move(fwd.record));
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return res;
}

}  // namespace lasnn
