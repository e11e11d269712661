#include "vrsim/neural.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

using namespace vrsim;

namespace {

// central finite differences over every parameter; returns max relative error
double max_relative_gradient_error(ParameterSet& params, const ParameterSet& analytic,
                                   const std::function<double()>& loss, double eps = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.arrays.size(); ++i) {
    for (std::size_t j = 0; j < params.arrays[i].data.size(); ++j) {
      double& theta = params.arrays[i].data[j];
      const double saved = theta;
      theta = saved + eps;
      const double up = loss();
      theta = saved - eps;
      const double down = loss();
      theta = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double an = analytic.arrays[i].data[j];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST(ParameterSet, FlattenRoundTrip) {
  ParameterSet p;
  p.add("a", {2, 3});
  p.add("b", {4});
  Rng rng(1);
  for (Array& a : p.arrays)
    for (double& v : a.data) v = rng.uniform(-1.0, 1.0);
  const Vec flat = p.flatten();
  EXPECT_EQ(flat.size(), 10u);
  ParameterSet q = p.zeros_like();
  q.unflatten(flat);
  for (std::size_t i = 0; i < p.arrays.size(); ++i) EXPECT_EQ(p.arrays[i].data, q.arrays[i].data);
  EXPECT_THROW(q.unflatten(Vec(3)), std::invalid_argument);
}

TEST(ParameterSet, SaveLoadRoundTrip) {
  ParameterSet p;
  p.add("weights", {3, 2});
  p.add("bias", {3});
  Rng rng(2);
  for (Array& a : p.arrays)
    for (double& v : a.data) v = rng.normal();
  const std::string path = ::testing::TempDir() + "params_test.ckpt";
  p.save(path);
  const ParameterSet q = ParameterSet::load(path);
  ASSERT_TRUE(p.same_shapes(q));
  for (std::size_t i = 0; i < p.arrays.size(); ++i) EXPECT_EQ(p.arrays[i].data, q.arrays[i].data);
}

TEST(Sgd, Basics) {
  ParameterSet p;
  p.add("w", {1});
  p.get("w").data[0] = 1.0;
  ParameterSet g = p.zeros_like();
  g.get("w").data[0] = 2.0;
  sgd_step(p, g, 0.0);
  EXPECT_DOUBLE_EQ(p.get("w").data[0], 1.0);
  sgd_step(p, g, 0.5);
  EXPECT_DOUBLE_EQ(p.get("w").data[0], 0.0);
}

TEST(Sgd, ConvergesOnQuadratic) {
  // f(w) = (w - 3)^2, gradient 2(w - 3)
  ParameterSet p;
  p.add("w", {1});
  for (int i = 0; i < 200; ++i) {
    ParameterSet g = p.zeros_like();
    g.get("w").data[0] = 2.0 * (p.get("w").data[0] - 3.0);
    sgd_step(p, g, 0.1);
  }
  EXPECT_NEAR(p.get("w").data[0], 3.0, 1e-9);
}

TEST(Averaging, MeanIdentityPermutation) {
  ParameterSet a;
  a.add("w", {2});
  ParameterSet b = a.zeros_like();
  b.fill(2.0);
  const ParameterSet mean = average_parameters({&a, &b});
  EXPECT_DOUBLE_EQ(mean.get("w").data[0], 1.0);
  const ParameterSet same = average_parameters({&b});
  EXPECT_EQ(same.get("w").data, b.get("w").data);
  const ParameterSet swapped = average_parameters({&b, &a});
  EXPECT_EQ(mean.get("w").data, swapped.get("w").data);
  ParameterSet c;
  c.add("other", {2});
  EXPECT_THROW(average_parameters({&a, &c}), std::invalid_argument);
}

TEST(Init, GlorotBounds) {
  Mlp net({10, 20, 5});
  Rng rng(3);
  net.init(rng);
  const double bound0 = std::sqrt(6.0 / (10 + 20));
  for (double v : net.params.get("W0").data) {
    EXPECT_GE(v, -bound0);
    EXPECT_LE(v, bound0);
  }
  for (double v : net.params.get("b0").data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Mlp, ZeroWeightsZeroLogits) {
  Mlp net({4, 8, 3});
  const Vec y = net.forward({1.0, -2.0, 0.5, 3.0});
  for (double v : y) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Mlp, DeterministicForward) {
  Mlp a({4, 8, 3}), b({4, 8, 3});
  Rng ra(5), rb(5);
  a.init(ra);
  b.init(rb);
  const Vec x{0.3, -0.1, 0.9, 0.0};
  EXPECT_EQ(a.forward(x), b.forward(x));
}

TEST(Mlp, LinearLayerClosedFormGradient) {
  // single linear layer, squared loss: dL/dW = 2 (Wx - y) x^T
  Mlp net({2, 1});
  net.params.get("W0").data = {0.5, -0.25};
  const Vec x{2.0, 4.0};
  Mlp::Cache cache;
  const Vec out = net.forward(x, &cache);
  const double target = 1.0;
  const double resid = out[0] - target;  // 0.5*2 - 0.25*4 - 1 = -1
  const ParameterSet g = net.backward(cache, {2.0 * resid});
  EXPECT_DOUBLE_EQ(g.get("W0").data[0], 2.0 * resid * 2.0);
  EXPECT_DOUBLE_EQ(g.get("W0").data[1], 2.0 * resid * 4.0);
  EXPECT_DOUBLE_EQ(g.get("b0").data[0], 2.0 * resid);
}

TEST(Mlp, ZeroUpstreamZeroGradient) {
  Mlp net({3, 6, 2});
  Rng rng(7);
  net.init(rng);
  Mlp::Cache cache;
  net.forward({1.0, 2.0, 3.0}, &cache);
  const ParameterSet g = net.backward(cache, {0.0, 0.0});
  for (const Array& a : g.arrays)
    for (double v : a.data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Mlp, MissingCacheRejected) {
  Mlp net({2, 2});
  Mlp::Cache empty;
  EXPECT_THROW(net.backward(empty, {1.0, 1.0}), std::invalid_argument);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    Mlp net({5, 7, 6, 3});
    Rng rng(seed);
    net.init(rng);
    Vec x(5);
    for (double& v : x) v = rng.normal();
    Vec target(3);
    for (double& v : target) v = rng.normal();
    auto loss = [&]() {
      const Vec y = net.forward(x);
      double l = 0.0;
      for (int i = 0; i < 3; ++i) l += (y[i] - target[i]) * (y[i] - target[i]);
      return l;
    };
    Mlp::Cache cache;
    const Vec y = net.forward(x, &cache);
    Vec dy(3);
    for (int i = 0; i < 3; ++i) dy[i] = 2.0 * (y[i] - target[i]);
    const ParameterSet analytic = net.backward(cache, dy);
    EXPECT_LE(max_relative_gradient_error(net.params, analytic, loss), 1e-4) << "seed " << seed;
  }
}

TEST(Softmax, SumsToOne) {
  const Vec p = softmax({1.0, 2.0, 3.0, -1.0});
  double s = 0.0;
  for (double v : p) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_GT(p[2], p[1]);
  // large logits stay finite thanks to the max shift
  const Vec q = softmax({1000.0, 1000.0});
  EXPECT_NEAR(q[0], 0.5, 1e-12);
}

TEST(Gru, ZeroWeightsUniformHead) {
  GruCell gru(8, 16);
  Mlp head({16, 8});
  Vec h(16, 0.0);
  Vec x(8, 0.0);
  x[3] = 1.0;
  for (int t = 0; t < 5; ++t) h = gru.step(x, h);
  const Vec p = softmax(head.forward(h));
  for (double v : p) EXPECT_NEAR(v, 0.125, 1e-12);
}

TEST(Gru, GateRangesAndShapes) {
  GruCell gru(4, 6);
  Rng rng(15);
  gru.init(rng);
  Vec h(6, 0.0);
  GruCell::StepCache cache;
  h = gru.step({1.0, -1.0, 0.5, 0.0}, h, &cache);
  EXPECT_EQ(h.size(), 6u);
  for (double z : cache.z) {
    EXPECT_GT(z, 0.0);
    EXPECT_LT(z, 1.0);
  }
  for (double r : cache.r) {
    EXPECT_GT(r, 0.0);
    EXPECT_LT(r, 1.0);
  }
  EXPECT_THROW(gru.step({1.0}, h), std::invalid_argument);
}

TEST(Gru, BpttGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {21ull, 22ull, 23ull}) {
    const int in = 4, hid = 5, window = 6;
    GruCell gru(in, hid);
    Mlp head({hid, 3});
    Rng rng(seed);
    gru.init(rng);
    head.init(rng);
    std::vector<Vec> xs(window, Vec(in));
    for (Vec& x : xs)
      for (double& v : x) v = rng.normal();
    const int target = 1;

    auto run_loss = [&]() {
      Vec h(hid, 0.0);
      for (const Vec& x : xs) h = gru.step(x, h);
      const Vec p = softmax(head.forward(h));
      return -std::log(p[target]);
    };

    // analytic: cross-entropy through the head, then BPTT through the window
    std::vector<GruCell::StepCache> caches(window);
    Vec h(hid, 0.0);
    for (int t = 0; t < window; ++t) h = gru.step(xs[t], h, &caches[t]);
    Mlp::Cache head_cache;
    const Vec logits = head.forward(h, &head_cache);
    Vec dlogits = softmax(logits);
    dlogits[target] -= 1.0;
    Vec dh;
    const ParameterSet head_grads = head.backward(head_cache, dlogits, &dh);
    ParameterSet gru_grads = gru.params.zeros_like();
    for (int t = window; t-- > 0;) dh = gru.step_backward(caches[t], dh, gru_grads);

    EXPECT_LE(max_relative_gradient_error(gru.params, gru_grads, run_loss), 1e-4) << "seed " << seed;
    EXPECT_LE(max_relative_gradient_error(head.params, head_grads, run_loss), 1e-4) << "seed " << seed;
  }
}
