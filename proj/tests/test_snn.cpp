#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lasnn/kernels.hpp"
#include "lasnn/snn.hpp"
#include "oracles.hpp"

using namespace lasnn;

namespace {

Tensor random_tensor(Rng& rng, Shape s, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(s));
  for (float& v : t.data) v = rng.next_float(lo, hi);
  return t;
}

// Engine checkpoint for a fully-connected toy with hidden LIF layers.
Checkpoint toy_checkpoint(const oracle::ToyNet& net, int input_dim) {
  NetworkSpec spec;
  spec.role = Role::StudentSnn;
  spec.input = {1, 1, input_dim};
  spec.classes = static_cast<int>(net.w.back().size());
  spec.layers.push_back(LayerSpec::flatten());
  int d = input_dim;
  for (const auto& layer : net.w) {
    spec.layers.push_back(LayerSpec::linear(d, static_cast<int>(layer.size()), false));
    d = static_cast<int>(layer.size());
  }
  Checkpoint ckpt = init_network(spec, 1);
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    Tensor& w = ckpt.params[l + 1].w;
    for (std::size_t i = 0; i < net.w[l].size(); ++i)
      for (std::size_t j = 0; j < net.w[l][i].size(); ++j)
        w.at(static_cast<int>(i), static_cast<int>(j)) = net.w[l][i][j];
  }
  CalibrationReport rep;
  const auto spiking = spiking_layer_indices(spec);
  for (std::size_t s = 0; s < spiking.size(); ++s)
    rep.entries.push_back({spiking[s], net.theta[s], net.theta[s]});
  rep.samples = 1;
  rep.time_steps = 1;
  ckpt.thresholds = rep;
  return ckpt;
}

}  // namespace

TEST_CASE("lif_step hand traces") {
  // lambda=1, theta=1, constant drive 0.6: v = 0.6, 1.2(spike), 0.8, 1.4(spike)
  Tensor v({1}), drive({1}, 0.6f), prev({1}), sp({1});
  lif_step(v, drive, prev, sp, 1.0f, 1.0f);
  CHECK(v[0] == doctest::Approx(0.6f));
  CHECK(sp[0] == 0.0f);
  prev = sp;
  lif_step(v, drive, prev, sp, 1.0f, 1.0f);
  CHECK(v[0] == doctest::Approx(1.2f));
  CHECK(sp[0] == 1.0f);
  prev = sp;
  lif_step(v, drive, prev, sp, 1.0f, 1.0f);
  CHECK(v[0] == doctest::Approx(0.8f));
  CHECK(sp[0] == 0.0f);
  prev = sp;
  lif_step(v, drive, prev, sp, 1.0f, 1.0f);
  CHECK(v[0] == doctest::Approx(1.4f));
  CHECK(sp[0] == 1.0f);

  // lambda=0.5, single impulse 0.4 < theta: v decays 0.4, 0.2, 0.1 with no spikes
  Tensor v2({1}), imp({1}, 0.4f), zero({1}), sp2({1});
  lif_step(v2, imp, zero, sp2, 0.5f, 1.0f);
  CHECK(v2[0] == doctest::Approx(0.4f));
  CHECK(sp2[0] == 0.0f);
  Tensor nodrive({1});
  lif_step(v2, nodrive, zero, sp2, 0.5f, 1.0f);
  CHECK(v2[0] == doctest::Approx(0.2f));
  lif_step(v2, nodrive, zero, sp2, 0.5f, 1.0f);
  CHECK(v2[0] == doctest::Approx(0.1f));
  CHECK(sp2[0] == 0.0f);

  // zero input from rest stays silent forever
  Tensor v3({4}), d3({4}), p3({4}), s3({4});
  for (int i = 0; i < 10; ++i) {
    lif_step(v3, d3, p3, s3, 0.9f, 0.7f);
    for (float x : v3.data) CHECK(x == 0.0f);
    for (float x : s3.data) CHECK(x == 0.0f);
  }
}

TEST_CASE("surrogate gradient values") {
  Tensor v({4});
  v[0] = 0.8f;   // v = theta -> gamma
  v[1] = 0.0f;   // support boundary -> 0
  v[2] = 1.6f;   // v = 2*theta -> 0
  v[3] = 1.2f;   // v = 1.5*theta -> gamma/2
  Tensor s = surrogate_grad(v, 0.8f, 0.3f);
  CHECK(s[0] == doctest::Approx(0.3f));
  CHECK(s[1] == doctest::Approx(0.0f));
  CHECK(s[2] == doctest::Approx(0.0f));
  CHECK(s[3] == doctest::Approx(0.15f));
  CHECK_THROWS(surrogate_grad(v, 0.0f, 0.3f));
}

TEST_CASE("snn config validation") {
  SnnConfig c;
  c.leak = 1.5f;
  CHECK_THROWS(c.validate());
  c.leak = 1.0f;
  c.T = 0;
  CHECK_THROWS(c.validate());
  c.T = 10;
  c.gamma = -0.1f;
  CHECK_THROWS(c.validate());
  c.gamma = 0.0f;  // ablation value is legal
  c.validate();
}

TEST_CASE("zero-weight snn yields the uniform distribution") {
  oracle::ToyNet net;
  net.w = {{{0, 0}, {0, 0}}, {{0, 0}, {0, 0}, {0, 0}}};  // 2 hidden, 3 classes
  net.theta = {1.0f};
  Checkpoint ckpt = toy_checkpoint(net, 2);
  Rng rng(3);
  Tensor img = random_tensor(rng, {1, 1, 1, 2});
  BatchEncoder enc(Coding::Poisson, img, {77});
  SnnConfig cfg;
  cfg.T = 20;
  SnnForwardResult out = snn_forward(ckpt, enc, cfg);
  double sum = 0;
  for (double p : out.probs) {
    CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    sum += p;
  }
  CHECK(std::fabs(sum - 1.0) < 1e-9);
}

TEST_CASE("T=1 direct-encoded linear snn reproduces ann logits bitwise") {
  NetworkSpec spec;
  spec.role = Role::StudentSnn;
  spec.input = {1, 2, 3};
  spec.classes = 4;
  spec.layers.push_back(LayerSpec::flatten());
  spec.layers.push_back(LayerSpec::linear(6, 4, false));
  Checkpoint snn = init_network(spec, 9);
  snn.thresholds = CalibrationReport{};  // no spiking layers

  Rng rng(10);
  Tensor img = random_tensor(rng, {2, 1, 2, 3});
  BatchEncoder enc(Coding::Direct, img, {});
  SnnConfig cfg;
  cfg.T = 1;
  SnnForwardResult out = snn_forward(snn, enc, cfg);

  Checkpoint ann = snn;
  ann.spec.role = Role::Intermediate;
  ann.thresholds.reset();
  AnnResult ref = ann_forward(ann, img, RunMode::Eval);
  CHECK(out.record.out_potential.data == ref.logits.data);

  // and the distribution is softmax of those logits
  CeResult ce = cross_entropy(ref.logits, {0, 0});
  for (std::size_t i = 0; i < out.probs.size(); ++i)
    CHECK(out.probs[i] == doctest::Approx(ce.probs[i]).epsilon(1e-12));
}

TEST_CASE("two-neuron two-step handcrafted forward matches hand computation") {
  oracle::ToyNet net;
  net.w = {{{1, 0}, {0, 1}}, {{1, 2}, {3, 4}}};
  net.theta = {1.0f};
  net.leak = 1.0f;
  Checkpoint ckpt = toy_checkpoint(net, 2);
  Tensor img({1, 1, 1, 2});
  img[0] = 0.8f;
  img[1] = 0.6f;
  BatchEncoder enc(Coding::Direct, img, {});
  SnnConfig cfg;
  cfg.T = 2;
  SnnForwardResult out = snn_forward(ckpt, enc, cfg, true);
  const SpikeRecord& r = out.record;
  // t=0: v=(0.8,0.6) no spikes; t=1: v=(1.6,1.2) both spike
  CHECK(r.v[0][0][0] == 0.8f);
  CHECK(r.v[0][0][1] == 0.6f);
  CHECK(r.o[0][0][0] == 0.0f);
  CHECK(r.o[0][0][1] == 0.0f);
  CHECK(r.v[0][1][0] == 0.8f + 0.8f);
  CHECK(r.v[0][1][1] == 0.6f + 0.6f);
  CHECK(r.o[0][1][0] == 1.0f);
  CHECK(r.o[0][1][1] == 1.0f);
  // readout integrates W2 * spikes: only t=1 contributes
  CHECK(r.out_potential[0] == 1.0f + 2.0f);
  CHECK(r.out_potential[1] == 3.0f + 4.0f);
  // spike times recorded
  CHECK(r.last_spike[0][0] == 1.0f);
  CHECK(r.counts[0][0] == 1.0f);
}

TEST_CASE("hidden spikes are binary, last-spike times are consistent") {
  oracle::ToyNet net;
  Rng rng(11);
  net.w = {{{0.9f, -0.4f, 0.3f}, {0.2f, 0.8f, -0.1f}},
           {{0.5f, -0.5f}, {0.25f, 0.75f}}};
  net.theta = {0.75f};
  Checkpoint ckpt = toy_checkpoint(net, 3);
  Tensor img = random_tensor(rng, {1, 1, 1, 3});
  BatchEncoder enc(Coding::Poisson, img, {5});
  SnnConfig cfg;
  cfg.T = 12;
  SnnForwardResult out = snn_forward(ckpt, enc, cfg, true);
  const SpikeRecord& r = out.record;
  float last_seen[2] = {-1.0f, -1.0f};
  for (int t = 0; t < cfg.T; ++t)
    for (int i = 0; i < 2; ++i) {
      const float o = r.o[0][static_cast<std::size_t>(t)][i];
      CHECK((o == 0.0f || o == 1.0f));
      if (o == 1.0f) last_seen[i] = static_cast<float>(t);
    }
  for (int i = 0; i < 2; ++i) CHECK(r.last_spike[0][i] == last_seen[i]);
}

TEST_CASE("forward is bit-deterministic for identical seeds") {
  oracle::ToyNet net;
  net.w = {{{0.9f, -0.4f}, {0.2f, 0.8f}}, {{0.5f, -0.5f}, {0.25f, 0.75f}}};
  net.theta = {0.6f};
  Checkpoint ckpt = toy_checkpoint(net, 2);
  Rng rng(13);
  Tensor img = random_tensor(rng, {3, 1, 1, 2});
  BatchEncoder enc1(Coding::Poisson, img, {1, 2, 3});
  BatchEncoder enc2(Coding::Poisson, img, {1, 2, 3});
  SnnConfig cfg;
  cfg.T = 25;
  SnnForwardResult a = snn_forward(ckpt, enc1, cfg, true);
  SnnForwardResult b = snn_forward(ckpt, enc2, cfg, true);
  CHECK(a.record.out_potential.data == b.record.out_potential.data);
  for (int t = 0; t < cfg.T; ++t)
    CHECK(a.record.o[0][static_cast<std::size_t>(t)].data ==
          b.record.o[0][static_cast<std::size_t>(t)].data);
  CHECK(a.record.counts[0].data == b.record.counts[0].data);
}

TEST_CASE("bptt matches the scalar unrolled-graph oracle on 100 random toys") {
  // Criterion-level check: abs err < 1e-10 (the arithmetic is mirrored, so
  // the comparison is expected to be exactly zero).
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int input_dim = 1 + static_cast<int>(rng.next_below(4));
    const int hidden_layers = 1 + static_cast<int>(rng.next_below(2));
    const int T = 1 + static_cast<int>(rng.next_below(5));
    oracle::ToyNet net;
    net.leak = rng.next_float() < 0.5f ? 1.0f : 0.5f;
    net.gamma = rng.next_float() < 0.5f ? 0.3f : 0.25f;
    int d = input_dim;
    for (int l = 0; l < hidden_layers; ++l) {
      const int width = 1 + static_cast<int>(rng.next_below(4));
      std::vector<std::vector<float>> w(static_cast<std::size_t>(width),
                                        std::vector<float>(static_cast<std::size_t>(d)));
      for (auto& row : w)
        for (float& x : row) x = rng.next_float(-1.0f, 1.0f);
      net.w.push_back(std::move(w));
      const float thetas[] = {0.5f, 1.0f, 1.5f};
      net.theta.push_back(thetas[rng.next_below(3)]);
      d = width;
    }
    const int classes = 2 + static_cast<int>(rng.next_below(2));
    std::vector<std::vector<float>> ro(static_cast<std::size_t>(classes),
                                       std::vector<float>(static_cast<std::size_t>(d)));
    for (auto& row : ro)
      for (float& x : row) x = rng.next_float(-1.0f, 1.0f);
    net.w.push_back(std::move(ro));

    Checkpoint ckpt = toy_checkpoint(net, input_dim);
    Tensor img = random_tensor(rng, {1, 1, 1, input_dim});
    const std::uint64_t enc_seed = rng.next_u64();
    BatchEncoder enc(Coding::Poisson, img, {enc_seed});
    SnnConfig cfg;
    cfg.T = T;
    cfg.leak = net.leak;
    cfg.gamma = net.gamma;
    SnnForwardResult fwd = snn_forward(ckpt, enc, cfg, true);

    Tensor gout = random_tensor(rng, {1, classes});
    AnnGrads grads = snn_backward(ckpt, fwd.record, enc, cfg, gout);

    // oracle sees the exact same spike train
    Tensor one_img({1, 1, input_dim});
    std::copy(img.data.begin(), img.data.end(), one_img.data.begin());
    SpikeTrain st = poisson_encode(one_img, T, enc_seed);
    std::vector<std::vector<float>> input(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t)
      input[static_cast<std::size_t>(t)] =
          std::vector<float>(st.values.data.begin() + t * input_dim,
                             st.values.data.begin() + (t + 1) * input_dim);
    std::vector<float> go(gout.data.begin(), gout.data.end());
    oracle::ToyResult ref = oracle::toy_bptt(net, input, go);

    for (std::size_t i = 0; i < ref.out_potential.size(); ++i)
      worst = std::max(worst, std::fabs(static_cast<double>(ref.out_potential[i]) -
                                        fwd.record.out_potential[static_cast<std::int64_t>(i)]));
    for (std::size_t l = 0; l < net.w.size(); ++l) {
      const Tensor& gw = grads.layers[l + 1].w;
      for (std::size_t i = 0; i < net.w[l].size(); ++i)
        for (std::size_t j = 0; j < net.w[l][i].size(); ++j)
          worst = std::max(worst,
                           std::fabs(static_cast<double>(ref.dw[l][i][j]) -
                                     gw.at(static_cast<int>(i), static_cast<int>(j))));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("gamma = 0 kills all spike-path gradients, readout still learns") {
  oracle::ToyNet net;
  net.w = {{{0.9f, -0.4f}, {0.2f, 0.8f}}, {{0.5f, -0.5f}, {0.25f, 0.75f}}};
  net.theta = {0.5f};
  Checkpoint ckpt = toy_checkpoint(net, 2);
  Rng rng(17);
  Tensor img({1, 1, 1, 2});
  img[0] = 0.9f;
  img[1] = 0.7f;
  BatchEncoder enc(Coding::Poisson, img, {3});
  SnnConfig cfg;
  cfg.T = 8;
  cfg.gamma = 0.0f;
  SnnForwardResult fwd = snn_forward(ckpt, enc, cfg, true);
  Tensor gout = random_tensor(rng, {1, 2});
  AnnGrads grads = snn_backward(ckpt, fwd.record, enc, cfg, gout);
  for (float v : grads.layers[1].w.data) CHECK(v == 0.0f);  // hidden
  bool any = false;
  for (float v : grads.layers[2].w.data) any |= v != 0.0f;  // readout
  CHECK(any);
}

TEST_CASE("detaching the reset or leak path changes temporal credit") {
  oracle::ToyNet net;
  net.w = {{{1.1f, 0.4f}, {-0.3f, 1.2f}}, {{0.7f, -0.6f}, {0.2f, 0.9f}}};
  net.theta = {0.5f};
  net.leak = 0.9f;
  Checkpoint ckpt = toy_checkpoint(net, 2);
  Tensor img({1, 1, 1, 2});
  img[0] = 0.9f;
  img[1] = 0.8f;
  BatchEncoder enc(Coding::Poisson, img, {21});
  SnnConfig cfg;
  cfg.T = 8;
  cfg.leak = 0.9f;
  SnnForwardResult fwd = snn_forward(ckpt, enc, cfg, true);
  Tensor gout({1, 2});
  gout[0] = 1.0f;
  gout[1] = -1.0f;
  AnnGrads base = snn_backward(ckpt, fwd.record, enc, cfg, gout);
  SnnConfig no_reset = cfg;
  no_reset.detach_reset = true;
  AnnGrads nr = snn_backward(ckpt, fwd.record, enc, no_reset, gout);
  SnnConfig no_leak = cfg;
  no_leak.detach_leak = true;
  AnnGrads nl = snn_backward(ckpt, fwd.record, enc, no_leak, gout);
  CHECK(base.layers[1].w.data != nr.layers[1].w.data);
  CHECK(base.layers[1].w.data != nl.layers[1].w.data);
}

TEST_CASE("conv snn bptt agrees with the dense-matrix oracle at float tolerance") {
  // conv(1->2, 3x3, pad 1) on a 4x4 input + readout; the hidden layer is
  // re-expressed as a dense matrix for the oracle.
  const int H = 4, W = 4, F = 2, K = 3, pad = 1;
  Rng rng(31);
  Tensor kernel = random_tensor(rng, {F, 1, K, K});

  NetworkSpec spec;
  spec.role = Role::StudentSnn;
  spec.input = {1, H, W};
  spec.classes = 2;
  spec.layers.push_back(LayerSpec::conv(1, F, K, 1, pad, false));
  spec.layers.push_back(LayerSpec::flatten());
  spec.layers.push_back(LayerSpec::linear(F * H * W, 2, false));
  Checkpoint ckpt = init_network(spec, 7);
  ckpt.params[0].w = kernel;
  CalibrationReport rep;
  rep.entries.push_back({0, 0.9f, 0.9f});
  ckpt.thresholds = rep;

  oracle::ToyNet net;
  net.theta = {0.9f};
  // dense equivalent of the conv, rows indexed (f, oy, ox)
  std::vector<std::vector<float>> dense(static_cast<std::size_t>(F * H * W),
                                        std::vector<float>(static_cast<std::size_t>(H * W), 0.0f));
  std::vector<std::vector<std::pair<int, int>>> kmap(
      static_cast<std::size_t>(F * K * K));  // kernel idx -> dense cells
  for (int f = 0; f < F; ++f)
    for (int oy = 0; oy < H; ++oy)
      for (int ox = 0; ox < W; ++ox)
        for (int ky = 0; ky < K; ++ky)
          for (int kx = 0; kx < K; ++kx) {
            const int iy = oy - pad + ky, ix = ox - pad + kx;
            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
            const int row = (f * H + oy) * W + ox;
            const int col = iy * W + ix;
            dense[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] =
                kernel.at(f, 0, ky, kx);
            kmap[static_cast<std::size_t>((f * K + ky) * K + kx)].push_back({row, col});
          }
  net.w.push_back(dense);
  std::vector<std::vector<float>> ro(2, std::vector<float>(static_cast<std::size_t>(F * H * W)));
  for (auto& row : ro)
    for (float& x : row) x = rng.next_float(-1.0f, 1.0f);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < ro[i].size(); ++j)
      ckpt.params[2].w.at(static_cast<int>(i), static_cast<int>(j)) = ro[i][j];
  net.w.push_back(ro);

  const int T = 5;
  Tensor img = random_tensor(rng, {1, 1, H, W});
  const std::uint64_t seed = 4242;
  BatchEncoder enc(Coding::Poisson, img, {seed});
  SnnConfig cfg;
  cfg.T = T;
  SnnForwardResult fwd = snn_forward(ckpt, enc, cfg, true);

  Tensor one_img({1, H, W});
  std::copy(img.data.begin(), img.data.end(), one_img.data.begin());
  SpikeTrain st = poisson_encode(one_img, T, seed);
  std::vector<std::vector<float>> input(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t)
    input[static_cast<std::size_t>(t)] =
        std::vector<float>(st.values.data.begin() + t * H * W,
                           st.values.data.begin() + (t + 1) * H * W);
  Tensor gout = random_tensor(rng, {1, 2});
  std::vector<float> go(gout.data.begin(), gout.data.end());
  oracle::ToyResult ref = oracle::toy_bptt(net, input, go);

  AnnGrads grads = snn_backward(ckpt, fwd.record, enc, cfg, gout);
  // fold the dense weight gradient back onto the shared conv kernel
  for (int f = 0; f < F; ++f)
    for (int ky = 0; ky < K; ++ky)
      for (int kx = 0; kx < K; ++kx) {
        double acc = 0.0;
        for (const auto& [row, col] : kmap[static_cast<std::size_t>((f * K + ky) * K + kx)])
          acc += ref.dw[0][static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
        CHECK(std::fabs(acc - grads.layers[0].w.at(f, 0, ky, kx)) < 1e-4);
      }
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < ro[i].size(); ++j)
      CHECK(std::fabs(static_cast<double>(ref.dw[1][i][j]) -
                      grads.layers[2].w.at(static_cast<int>(i), static_cast<int>(j))) < 1e-4);
}

TEST_CASE("snn_evaluate is deterministic and records stream counts") {
  oracle::ToyNet net;
  net.w = {{{0.9f, -0.4f}, {0.2f, 0.8f}}, {{0.5f, -0.5f}, {0.25f, 0.75f}}};
  net.theta = {0.6f};
  Checkpoint ckpt = toy_checkpoint(net, 2);
  Rng rng(41);
  std::vector<LabeledImage> data(7);
  for (auto& li : data) {
    li.pixels = random_tensor(rng, {1, 1, 2});
    li.label = static_cast<int>(rng.next_below(2));
  }
  SnnConfig cfg;
  cfg.T = 15;
  SnnEvalResult a = snn_evaluate(ckpt, data, cfg, Coding::Poisson, 99, 3, true);
  SnnEvalResult b = snn_evaluate(ckpt, data, cfg, Coding::Poisson, 99, 3, true);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.predictions == b.predictions);
  REQUIRE(a.records.size() == 3);  // batches of 3,3,1
  for (std::size_t i = 0; i < a.records.size(); ++i)
    CHECK(a.records[i].counts[0].data == b.records[i].counts[0].data);
  CHECK_FALSE(a.records[0].full);
}

TEST_CASE("missing thresholds are rejected") {
  NetworkSpec spec = build_architecture("3conv2linear", {1, 28, 28}, 10, 0.0f);
  spec.role = Role::StudentSnn;
  Checkpoint ckpt = init_network(spec, 5);
  CHECK_THROWS_WITH_AS(stage_thresholds(ckpt), doctest::Contains("threshold"),
                       std::invalid_argument);
}
