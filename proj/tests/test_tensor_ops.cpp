#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lasnn/ops.hpp"
#include "lasnn/rng.hpp"
#include "lasnn/tensor.hpp"
#include "oracles.hpp"

using namespace lasnn;

namespace {

Tensor random_tensor(Rng& rng, Shape s, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(s));
  for (float& v : t.data) v = rng.next_float(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  t.at(1, 2) = 5.0f;
  CHECK(t[5] == 5.0f);
  CHECK_THROWS(t.reshaped({4}));
  Tensor r = t.reshaped({3, 2});
  CHECK(r.at(2, 1) == 5.0f);
  t[0] = std::nanf("");
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS(t.check_finite("test"));
  CHECK_THROWS(Tensor({0, 3}));
}

TEST_CASE("conv2d trivial cases") {
  Tensor ones({1, 1, 3, 3}, 1.0f);
  Tensor kernel({1, 1, 3, 3}, 1.0f);
  Tensor out = ops::conv2d(ones, kernel, nullptr, 1, 0);
  CHECK(out.shape == Shape{1, 1, 1, 1});
  CHECK(out[0] == doctest::Approx(9.0f));

  Rng rng(3);
  Tensor x = random_tensor(rng, {2, 3, 5, 5});
  Tensor zk({4, 3, 3, 3});
  Tensor z = ops::conv2d(x, zk, nullptr, 1, 1);
  for (float v : z.data) CHECK(v == 0.0f);
}

TEST_CASE("conv2d shape errors name the offending dims") {
  Tensor x({1, 2, 4, 4});
  Tensor k({3, 3, 3, 3});  // channel mismatch
  CHECK_THROWS_WITH_AS(ops::conv2d(x, k, nullptr, 1, 0),
                       doctest::Contains("channels"), std::invalid_argument);
  Tensor k2({3, 2, 7, 7});
  CHECK_THROWS_WITH_AS(ops::conv2d(x, k2, nullptr, 1, 0),
                       doctest::Contains("exceeds"), std::invalid_argument);
  CHECK_THROWS(ops::conv2d(x, Tensor({3, 2, 3, 3}), nullptr, 0, 0));
}

TEST_CASE("conv2d matches the nested-loop oracle on 120 random instances") {
  Rng rng(101);
  for (int trial = 0; trial < 120; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_below(2));
    const int c = 1 + static_cast<int>(rng.next_below(3));
    const int f = 1 + static_cast<int>(rng.next_below(4));
    const int h = 3 + static_cast<int>(rng.next_below(6));
    const int w = 3 + static_cast<int>(rng.next_below(6));
    const int kk = 1 + 2 * static_cast<int>(rng.next_below(2));  // 1 or 3
    const int stride = 1 + static_cast<int>(rng.next_below(2));
    const int pad = static_cast<int>(rng.next_below(2));
    Tensor x = random_tensor(rng, {n, c, h, w});
    Tensor k = random_tensor(rng, {f, c, kk, kk});
    const bool with_bias = rng.next_float() < 0.5f;
    Tensor b = random_tensor(rng, {f});
    Tensor out = ops::conv2d(x, k, with_bias ? &b : nullptr, stride, pad);
    oracle::dvec bias = oracle::to_double(b);
    int oh = 0, ow = 0;
    oracle::dvec ref = oracle::conv2d(oracle::to_double(x), n, c, h, w, oracle::to_double(k),
                                      f, kk, kk, stride, pad, with_bias ? &bias : nullptr,
                                      &oh, &ow);
    REQUIRE(out.shape == Shape{n, f, oh, ow});
    for (std::size_t i = 0; i < ref.size(); ++i)
      CHECK(std::fabs(ref[i] - out[static_cast<std::int64_t>(i)]) < 1e-5);
  }
}

TEST_CASE("conv2d backward: zero grad_out, scalar product rule, FD oracle") {
  Tensor x({1, 1, 1, 1});
  x[0] = 0.7f;
  Tensor k({1, 1, 1, 1});
  k[0] = -0.3f;
  Tensor go({1, 1, 1, 1});
  go[0] = 2.0f;
  Tensor gx, gk, gb;
  ops::conv2d_backward(go, x, k, 1, 0, &gx, &gk, nullptr);
  CHECK(gk[0] == doctest::Approx(2.0f * 0.7f));  // grad_kernel = grad_out * input
  CHECK(gx[0] == doctest::Approx(2.0f * -0.3f));

  go[0] = 0.0f;
  ops::conv2d_backward(go, x, k, 1, 0, &gx, &gk, nullptr);
  CHECK(gk[0] == 0.0f);
  CHECK(gx[0] == 0.0f);

  // FD against the double oracle: L = sum(R . conv(x,k,b))
  Rng rng(55);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 1, c = 2, f = 3, h = 5, w = 4, kk = 3, stride = 1, pad = 1;
    Tensor xt = random_tensor(rng, {n, c, h, w});
    Tensor kt = random_tensor(rng, {f, c, kk, kk});
    Tensor bt = random_tensor(rng, {f});
    Tensor out = ops::conv2d(xt, kt, &bt, stride, pad);
    Tensor r = random_tensor(rng, out.shape);
    Tensor agx, agk, agb;
    {
      // analytic: dL/d* with grad_out = R
      ops::conv2d_backward(r, xt, kt, stride, pad, &agx, &agk, &agb);
    }
    const oracle::dvec rd = oracle::to_double(r);
    auto loss_with = [&](const oracle::dvec& xv, const oracle::dvec& kv,
                         const oracle::dvec& bv) {
      oracle::dvec o = oracle::conv2d(xv, n, c, h, w, kv, f, kk, kk, stride, pad, &bv,
                                      nullptr, nullptr);
      double s = 0;
      for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * rd[i];
      return s;
    };
    const oracle::dvec xd = oracle::to_double(xt), kd = oracle::to_double(kt),
                       bd = oracle::to_double(bt);
    auto fd_x = oracle::finite_diff([&](const oracle::dvec& v) { return loss_with(v, kd, bd); }, xd);
    auto fd_k = oracle::finite_diff([&](const oracle::dvec& v) { return loss_with(xd, v, bd); }, kd);
    auto fd_b = oracle::finite_diff([&](const oracle::dvec& v) { return loss_with(xd, kd, v); }, bd);
    CHECK(oracle::rel_err(fd_x, agx) < 1e-3);
    CHECK(oracle::rel_err(fd_k, agk) < 1e-3);
    CHECK(oracle::rel_err(fd_b, agb) < 1e-3);
  }
}

TEST_CASE("linear forward identities and FD backward") {
  Tensor x({2, 3});
  for (int i = 0; i < 6; ++i) x[i] = static_cast<float>(i) - 2.5f;
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0f;
  Tensor out = ops::linear(x, eye, nullptr);
  CHECK(out.data == x.data);

  Tensor zw({4, 3});
  Tensor z = ops::linear(x, zw, nullptr);
  for (float v : z.data) CHECK(v == 0.0f);

  Rng rng(77);
  const int n = 3, d = 6, k = 4;
  Tensor xt = random_tensor(rng, {n, d});
  Tensor wt = random_tensor(rng, {k, d});
  Tensor bt = random_tensor(rng, {k});
  Tensor r = random_tensor(rng, {n, k});
  Tensor agx, agw, agb;
  ops::linear_backward(r, xt, wt, &agx, &agw, &agb);
  const oracle::dvec rd = oracle::to_double(r);
  auto loss_with = [&](const oracle::dvec& xv, const oracle::dvec& wv, const oracle::dvec& bv) {
    oracle::dvec o = oracle::linear(xv, n, d, wv, k, &bv);
    double s = 0;
    for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * rd[i];
    return s;
  };
  const oracle::dvec xd = oracle::to_double(xt), wd = oracle::to_double(wt),
                     bd = oracle::to_double(bt);
  CHECK(oracle::rel_err(oracle::finite_diff([&](const oracle::dvec& v) { return loss_with(v, wd, bd); }, xd), agx) < 1e-3);
  CHECK(oracle::rel_err(oracle::finite_diff([&](const oracle::dvec& v) { return loss_with(xd, v, bd); }, wd), agw) < 1e-3);
  CHECK(oracle::rel_err(oracle::finite_diff([&](const oracle::dvec& v) { return loss_with(xd, wd, v); }, bd), agb) < 1e-3);
}

TEST_CASE("avgpool2d: constants, hand value, FD, divisibility") {
  Tensor c({1, 1, 4, 4}, 0.37f);
  Tensor out = ops::avgpool2d(c, 2);
  for (float v : out.data) CHECK(v == doctest::Approx(0.37f));

  Tensor q({1, 1, 2, 2});
  q[0] = 0; q[1] = 1; q[2] = 2; q[3] = 3;
  CHECK(ops::avgpool2d(q, 2)[0] == doctest::Approx(1.5f));

  CHECK_THROWS_AS(ops::avgpool2d(Tensor({1, 1, 5, 4}), 2), std::invalid_argument);

  Rng rng(99);
  Tensor x = random_tensor(rng, {2, 3, 4, 6});
  Tensor r = random_tensor(rng, {2, 3, 2, 3});
  Tensor g = ops::avgpool2d_backward(r, 2);
  const oracle::dvec rd = oracle::to_double(r);
  auto fd = oracle::finite_diff(
      [&](const oracle::dvec& v) {
        oracle::dvec o = oracle::avgpool(v, 2, 3, 4, 6, 2);
        double s = 0;
        for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * rd[i];
        return s;
      },
      oracle::to_double(x));
  CHECK(oracle::rel_err(fd, g) < 1e-3);
}

TEST_CASE("maxpool forward/backward routes gradient to the argmax") {
  Tensor x({1, 1, 2, 2});
  x[0] = 0.1f; x[1] = 0.9f; x[2] = 0.4f; x[3] = 0.2f;
  Tensor argmax;
  Tensor out = ops::maxpool2d(x, 2, &argmax);
  CHECK(out[0] == doctest::Approx(0.9f));
  Tensor go({1, 1, 1, 1});
  go[0] = 3.0f;
  Tensor gx = ops::maxpool2d_backward(go, argmax, 2);
  CHECK(gx[1] == doctest::Approx(3.0f));
  CHECK(gx[0] == 0.0f);
  CHECK(gx[2] == 0.0f);
}

TEST_CASE("interpolate_bilinear: identity, constants, hand value, oracle") {
  Rng rng(123);
  Tensor m = random_tensor(rng, {5, 7});
  Tensor same = ops::interpolate_bilinear(m, 5, 7);
  CHECK(same.data == m.data);  // bit-identical

  Tensor c({3, 3}, 2.5f);
  Tensor up = ops::interpolate_bilinear(c, 7, 5);
  for (float v : up.data) CHECK(v == doctest::Approx(2.5f));

  Tensor q({2, 2});
  q[0] = 0; q[1] = 1; q[2] = 2; q[3] = 3;
  Tensor t = ops::interpolate_bilinear(q, 3, 3);
  CHECK(t.at(1, 1) == doctest::Approx(1.5f));

  CHECK_THROWS_AS(ops::interpolate_bilinear(q, 0, 3), std::invalid_argument);

  for (int trial = 0; trial < 30; ++trial) {
    const int h = 1 + static_cast<int>(rng.next_below(6));
    const int w = 1 + static_cast<int>(rng.next_below(6));
    const int oh = 1 + static_cast<int>(rng.next_below(9));
    const int ow = 1 + static_cast<int>(rng.next_below(9));
    Tensor src = random_tensor(rng, {h, w});
    Tensor dst = ops::interpolate_bilinear(src, oh, ow);
    oracle::dvec ref = oracle::bilinear(oracle::to_double(src), h, w, oh, ow);
    for (std::size_t i = 0; i < ref.size(); ++i)
      CHECK(std::fabs(ref[i] - dst[static_cast<std::int64_t>(i)]) < 1e-5);
  }
}

TEST_CASE("dropout mask statistics and determinism") {
  Rng rng(42);
  Tensor mask = ops::dropout_mask({10000}, 0.25f, rng);
  int kept = 0;
  for (float v : mask.data) {
    CHECK((v == 0.0f || v == doctest::Approx(1.0f / 0.75f)));
    if (v != 0.0f) ++kept;
  }
  CHECK(kept > 7200);
  CHECK(kept < 7800);
  Rng rng2(42);
  Tensor mask2 = ops::dropout_mask({10000}, 0.25f, rng2);
  CHECK(mask.data == mask2.data);
  Rng rng3(43);
  CHECK_THROWS(ops::dropout_mask({4}, 1.0f, rng3));
}

TEST_CASE("batchnorm: train stats, eval determinism, FD gradients") {
  Rng rng(31);
  const int n = 4, c = 3, h = 3, w = 2;
  Tensor x = random_tensor(rng, {n, c, h, w});
  Tensor gamma = random_tensor(rng, {c}, 0.5f, 1.5f);
  Tensor beta = random_tensor(rng, {c}, -0.2f, 0.2f);
  Tensor rm({c}), rv({c}, 1.0f);
  ops::BatchNormState st;
  Tensor out = ops::batchnorm(x, gamma, beta, rm, rv, true, 0.1f, &st);
  oracle::dvec ref = oracle::batchnorm_train(oracle::to_double(x), n, c, h, w,
                                             oracle::to_double(gamma), oracle::to_double(beta));
  for (std::size_t i = 0; i < ref.size(); ++i)
    CHECK(std::fabs(ref[i] - out[static_cast<std::int64_t>(i)]) < 1e-4);

  // eval forward is a pure affine map: same input -> same output
  Tensor e1 = ops::batchnorm(x, gamma, beta, rm, rv, false, 0.1f, nullptr);
  Tensor e2 = ops::batchnorm(x, gamma, beta, rm, rv, false, 0.1f, nullptr);
  CHECK(e1.data == e2.data);

  Tensor r = random_tensor(rng, out.shape);
  Tensor gx, gg, gb;
  ops::batchnorm_backward(r, x, gamma, st, &gx, &gg, &gb);
  const oracle::dvec rd = oracle::to_double(r);
  const oracle::dvec xd = oracle::to_double(x), gd = oracle::to_double(gamma),
                     bd = oracle::to_double(beta);
  auto loss_with = [&](const oracle::dvec& xv, const oracle::dvec& gv, const oracle::dvec& bv) {
    oracle::dvec o = oracle::batchnorm_train(xv, n, c, h, w, gv, bv);
    double s = 0;
    for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * rd[i];
    return s;
  };
  CHECK(oracle::rel_err(oracle::finite_diff([&](const oracle::dvec& v) { return loss_with(v, gd, bd); }, xd), gx) < 1e-3);
  CHECK(oracle::rel_err(oracle::finite_diff([&](const oracle::dvec& v) { return loss_with(xd, v, bd); }, gd), gg) < 1e-3);
  CHECK(oracle::rel_err(oracle::finite_diff([&](const oracle::dvec& v) { return loss_with(xd, gd, v); }, bd), gb) < 1e-3);
}
