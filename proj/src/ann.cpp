#include "lasnn/ann.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lasnn/kernels.hpp"

namespace lasnn {

unsigned level_bit(LevelTag t) {
  switch (t) {
    case LevelTag::Low: return kLevelLow;
    case LevelTag::Mid: return kLevelMid;
    case LevelTag::High: return kLevelHigh;
    default: return 0;
  }
}

namespace {

Shape with_batch(int n, const Shape& s) {
  Shape out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

AnnResult ann_forward(Checkpoint& net, const Tensor& input, RunMode mode,
                      unsigned capture_levels, Rng* dropout_rng, AnnCache* cache) {
  const NetworkSpec& spec = net.spec;
  require_shape(input, with_batch(input.dim(0), spec.input), "ann_forward input");
  if (mode == RunMode::Train && !dropout_rng) {
    for (const LayerSpec& l : spec.layers)
      if (l.kind == LayerKind::Dropout && l.drop_p > 0.0f)
        throw std::invalid_argument("ann_forward: train mode with dropout needs an rng");
  }
  const std::size_t nl = spec.layers.size();
  if (cache) {
    cache->inputs.assign(nl, Tensor{});
    cache->masks.assign(nl, Tensor{});
    cache->pool_argmax.assign(nl, Tensor{});
    cache->bn.assign(nl, ops::BatchNormState{});
  }

  AnnResult res;
  Tensor x = input;
  LevelTag pending = LevelTag::None;
  for (std::size_t i = 0; i < nl; ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerParams& p = net.params[i];
    if (cache) cache->inputs[i] = x;
    switch (l.kind) {
      case LayerKind::Conv:
        pending = l.level;
        x = ops::conv2d(x, p.w, l.use_bias ? &p.b : nullptr, l.stride, l.pad);
        break;
      case LayerKind::Linear:
        pending = LevelTag::None;
        x = ops::linear(x, p.w, l.use_bias ? &p.b : nullptr);
        break;
      case LayerKind::Relu:
        x = ops::relu(x);
        if (pending != LevelTag::None && (capture_levels & level_bit(pending)))
          res.captured[static_cast<int>(pending) - 1] = x;
        pending = LevelTag::None;
        break;
      case LayerKind::AvgPool:
        x = ops::avgpool2d(x, l.pool_k);
        break;
      case LayerKind::MaxPool: {
        Tensor argmax;
        x = ops::maxpool2d(x, l.pool_k, cache ? &argmax : nullptr);
        if (cache) cache->pool_argmax[i] = std::move(argmax);
        break;
      }
      case LayerKind::Dropout:
        if (mode == RunMode::Train && l.drop_p > 0.0f) {
          Tensor mask = ops::dropout_mask(x.shape, l.drop_p, *dropout_rng);
          Tensor y(x.shape);
          kern::table().mul(x.ptr(), mask.ptr(), y.ptr(), x.data.size());
          x = std::move(y);
          if (cache) cache->masks[i] = std::move(mask);
        }
        break;
      case LayerKind::BatchNorm: {
        ops::BatchNormState st;
        x = ops::batchnorm(x, p.w, p.b, p.run_mean, p.run_var, mode == RunMode::Train,
                           0.1f, cache ? &st : nullptr);
        if (cache) cache->bn[i] = std::move(st);
        break;
      }
      case LayerKind::Flatten:
        x = x.reshaped({x.dim(0), static_cast<int>(x.numel() / x.dim(0))});
        break;
    }
  }
  res.logits = std::move(x);
  return res;
}

Tensor ann_backward(const Checkpoint& net, const AnnCache& cache, RunMode mode,
                    const Tensor& grad_logits, AnnGrads* grads, bool need_input_grad) {
  const NetworkSpec& spec = net.spec;
  if (cache.inputs.size() != spec.layers.size())
    throw std::invalid_argument("ann_backward: cache does not match network");
  if (grads) grads->layers.assign(spec.layers.size(), LayerParams{});

  Tensor g = grad_logits;
  for (int i = static_cast<int>(spec.layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& l = spec.layers[static_cast<std::size_t>(i)];
    const LayerParams& p = net.params[static_cast<std::size_t>(i)];
    const Tensor& xin = cache.inputs[static_cast<std::size_t>(i)];
    const bool last = i == 0 && !need_input_grad;
    switch (l.kind) {
      case LayerKind::Conv: {
        Tensor gx;
        ops::conv2d_backward(g, xin, p.w, l.stride, l.pad, last ? nullptr : &gx,
                             grads ? &grads->layers[static_cast<std::size_t>(i)].w : nullptr,
                             (grads && l.use_bias)
                                 ? &grads->layers[static_cast<std::size_t>(i)].b
                                 : nullptr);
        g = std::move(gx);
        break;
      }
      case LayerKind::Linear: {
        Tensor gx;
        ops::linear_backward(g, xin, p.w, last ? nullptr : &gx,
                             grads ? &grads->layers[static_cast<std::size_t>(i)].w : nullptr,
                             (grads && l.use_bias)
                                 ? &grads->layers[static_cast<std::size_t>(i)].b
                                 : nullptr);
        g = std::move(gx);
        break;
      }
      case LayerKind::Relu:
        g = ops::relu_backward(xin, g);
        break;
      case LayerKind::AvgPool:
        g = ops::avgpool2d_backward(g, l.pool_k);
        break;
      case LayerKind::MaxPool:
        g = ops::maxpool2d_backward(g, cache.pool_argmax[static_cast<std::size_t>(i)], l.pool_k);
        break;
      case LayerKind::Dropout:
        if (!cache.masks[static_cast<std::size_t>(i)].empty()) {
          Tensor gx(g.shape);
          kern::table().mul(g.ptr(), cache.masks[static_cast<std::size_t>(i)].ptr(), gx.ptr(),
                            g.data.size());
          g = std::move(gx);
        }
        break;
      case LayerKind::BatchNorm: {
        Tensor gx;
        if (mode == RunMode::Train) {
          ops::batchnorm_backward(
              g, xin, p.w, cache.bn[static_cast<std::size_t>(i)], last ? nullptr : &gx,
              grads ? &grads->layers[static_cast<std::size_t>(i)].w : nullptr,
              grads ? &grads->layers[static_cast<std::size_t>(i)].b : nullptr);
        } else {
          ops::batchnorm_backward_eval(g, p.w, p.run_var, &gx);
        }
        g = std::move(gx);
        break;
      }
      case LayerKind::Flatten:
        g = g.reshaped(xin.shape);
        break;
    }
  }
  return need_input_grad ? g : Tensor{};
}

CeResult cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  const int n = logits.dim(0), c = logits.dim(1);
  if (static_cast<std::size_t>(n) != labels.size())
    throw std::invalid_argument("cross_entropy: batch size mismatch");
  CeResult res;
  res.grad_logits = Tensor(logits.shape);
  res.probs.resize(static_cast<std::size_t>(n) * c);
  double total = 0.0;
  const float invn = 1.0f / static_cast<float>(n);
  for (int i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] < 0 || labels[static_cast<std::size_t>(i)] >= c)
      throw std::invalid_argument("cross_entropy: label out of range");
    const float* row = logits.ptr() + static_cast<std::size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double denom = 0.0;
    for (int j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
    double* prow = res.probs.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) prow[j] = std::exp(static_cast<double>(row[j]) - mx) / denom;
    const int y = labels[static_cast<std::size_t>(i)];
    total += -std::log(std::max(prow[y], 1e-300));
    float* grow = res.grad_logits.ptr() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j)
      grow[j] = (static_cast<float>(prow[j]) - (j == y ? 1.0f : 0.0f)) * invn;
  }
  res.loss = total / static_cast<double>(n);
  return res;
}

Tensor input_gradient(Checkpoint& net, const Tensor& image, int label) {
  Tensor batch = image.reshaped(with_batch(1, net.spec.input));
  AnnCache cache;
  AnnResult fwd = ann_forward(net, batch, RunMode::Eval, 0, nullptr, &cache);
  CeResult ce = cross_entropy(fwd.logits, {label});
  Tensor g = ann_backward(net, cache, RunMode::Eval, ce.grad_logits, nullptr, true);
  return g.reshaped(net.spec.input);
}

void sgd_step(Tensor& param, const Tensor& grad, const SgdConfig& cfg) {
  const std::size_t n = param.data.size();
  float* p = param.ptr();
  const float* g = grad.ptr();
  for (std::size_t i = 0; i < n; ++i)
    p[i] -= cfg.lr * (g[i] + cfg.weight_decay * p[i]);
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    state.m = Tensor(param.shape);
    state.v = Tensor(param.shape);
    state.t = 0;
  }
  state.t += 1;
  const float b1t = 1.0f - std::pow(cfg.beta1, static_cast<float>(state.t));
  const float b2t = 1.0f - std::pow(cfg.beta2, static_cast<float>(state.t));
  const std::size_t n = param.data.size();
  float* p = param.ptr();
  const float* g = grad.ptr();
  float* m = state.m.ptr();
  float* v = state.v.ptr();
  for (std::size_t i = 0; i < n; ++i) {
    const float gi = g[i] + cfg.weight_decay * p[i];
    m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * gi;
    v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * gi * gi;
    const float mhat = m[i] / b1t;
    const float vhat = v[i] / b2t;
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

Optimizer::Optimizer(const std::string& kind, float lr, float weight_decay) : kind_(kind) {
  if (kind == "sgd") {
    sgd_.lr = lr;
    sgd_.weight_decay = weight_decay;
  } else if (kind == "adam") {
    adam_.lr = lr;
    adam_.weight_decay = weight_decay;
  } else {
    throw std::invalid_argument("unknown optimizer '" + kind + "'");
  }
}

void Optimizer::step(Checkpoint& net, const AnnGrads& grads) {
  if (state_w_.empty()) {
    state_w_.resize(net.params.size());
    state_b_.resize(net.params.size());
  }
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    const LayerParams& g = grads.layers[i];
    LayerParams& p = net.params[i];
    if (g.w.empty() && g.b.empty()) continue;
    if (kind_ == "sgd") {
      if (!g.w.empty()) sgd_step(p.w, g.w, sgd_);
      if (!g.b.empty()) sgd_step(p.b, g.b, sgd_);
    } else {
      if (!g.w.empty()) adam_step(p.w, g.w, state_w_[i], adam_);
      if (!g.b.empty()) adam_step(p.b, g.b, state_b_[i], adam_);
    }
  }
}

double ann_accuracy(Checkpoint& net, const std::vector<LabeledImage>& data, int batch_size) {
  BatchIter iter(data, batch_size, 0, 0);
  Batch b;
  std::int64_t correct = 0;
  while (iter.next(&b)) {
    AnnResult r = ann_forward(net, b.images, RunMode::Eval);
    const int c = r.logits.dim(1);
    for (int i = 0; i < r.logits.dim(0); ++i) {
      const float* row = r.logits.ptr() + static_cast<std::size_t>(i) * c;
      int best = 0;
      for (int j = 1; j < c; ++j)
        if (row[j] > row[best]) best = j;
      if (best == b.labels[static_cast<std::size_t>(i)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

AnnTrainResult train_ann(const NetworkSpec& spec, const std::vector<LabeledImage>& train,
                         const std::vector<LabeledImage>& test, const AnnTrainConfig& cfg) {
  Checkpoint net = init_network(spec, cfg.seed);
  Optimizer opt(cfg.optimizer, cfg.lr, cfg.weight_decay);
  AnnTrainResult result;
  result.best_acc = -1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    BatchIter iter(train, cfg.batch_size, derive_seed(cfg.seed, "order"), epoch);
    Batch b;
    double loss_sum = 0.0;
    std::int64_t seen = 0;
    int batch_idx = 0;
    while (iter.next(&b)) {
      Rng drop_rng(derive_seed(cfg.seed, "ann-dropout", static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(batch_idx)));
      AnnCache cache;
      AnnResult fwd = ann_forward(net, b.images, RunMode::Train, 0, &drop_rng, &cache);
      CeResult ce = cross_entropy(fwd.logits, b.labels);
      if (!std::isfinite(ce.loss))
        throw std::runtime_error("training diverged: loss is not finite at epoch " +
                                 std::to_string(epoch) + " batch " + std::to_string(batch_idx));
      AnnGrads grads;
      ann_backward(net, cache, RunMode::Train, ce.grad_logits, &grads, false);
      opt.step(net, grads);
      loss_sum += ce.loss * b.labels.size();
      seen += static_cast<std::int64_t>(b.labels.size());
      ++batch_idx;
    }
    EpochRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.test_acc = ann_accuracy(net, test, 64);
    result.log.push_back(row);
    if (row.test_acc > result.best_acc) {
      result.best_acc = row.test_acc;
      result.best = net;
      result.best.meta.epoch = epoch;
      result.best.meta.seed = cfg.seed;
    }
  }
  return result;
}

}  // namespace lasnn
