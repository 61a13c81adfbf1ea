/*
 * Copyright 2026 The splitfss Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "splitfss/nn.h"

#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.h"
#include "splitfss/errors.h"
#include "splitfss/sharing.h"
#include "test_util.h"

namespace splitfss {
namespace {

FixedConfig config(int n, int f) {
  FixedConfig cfg;
  cfg.bit_width = n;
  cfg.frac_bits = f;
  return cfg;
}

using testing::uniform_tensor;

TEST(Conv2d, UnitKernelIdentityPassesInputThrough) {
  Prg rng = Prg::from_seed(1, "conv");
  const FixedConfig cfg;
  const FixedTensor x = uniform_tensor({2, 1, 5, 5}, -3, 3, cfg, rng);
  const FixedTensor w = FixedTensor::encode(std::vector<double>{1.0}, {1, 1, 1, 1}, cfg);
  EXPECT_EQ(conv2d_forward(x, w, FixedTensor({1}, cfg), 1), x);
}

TEST(Conv2d, ZeroInputGivesBias) {
  const FixedConfig cfg;
  Prg rng = Prg::from_seed(2, "conv");
  const FixedTensor w = uniform_tensor({3, 2, 3, 3}, -1, 1, cfg, rng);
  const FixedTensor b = FixedTensor::encode(std::vector<double>{0.5, -1, 2}, {3}, cfg);
  const FixedTensor y = conv2d_forward(FixedTensor({1, 2, 4, 4}, cfg), w, b, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 3, 2, 2}));
  for (size_t o = 0; o < 3; ++o) {
    for (size_t p = 0; p < 4; ++p) EXPECT_EQ(y[o * 4 + p], b[o]);
  }
}

TEST(Conv2d, MatchesRealArithmeticReference) {
  Prg rng = Prg::from_seed(3, "conv");
  const FixedConfig cfg;  // f = 13
  const FixedTensor x = uniform_tensor({1, 1, 8, 8}, -1, 1, cfg, rng);
  const FixedTensor w = uniform_tensor({4, 1, 3, 3}, -1, 1, cfg, rng);
  const FixedTensor b = uniform_tensor({4}, -1, 1, cfg, rng);
  const std::vector<double> xd = x.decode(), wd = w.decode(), bd = b.decode();
  const std::vector<double> y = conv2d_forward(x, w, b, 1).decode();
  double max_err = 0;
  for (size_t o = 0; o < 4; ++o) {
    for (size_t i = 0; i < 6; ++i) {
      for (size_t j = 0; j < 6; ++j) {
        double ref = bd[o];
        for (size_t a = 0; a < 3; ++a) {
          for (size_t c = 0; c < 3; ++c) {
            ref += wd[o * 9 + a * 3 + c] * xd[(i + a) * 8 + j + c];
          }
        }
        max_err = std::max(max_err, std::fabs(ref - y[(o * 6 + i) * 6 + j]));
      }
    }
  }
  EXPECT_LT(max_err, 0.01);
}

TEST(Conv2d, ShapeErrors) {
  const FixedConfig cfg;
  EXPECT_THROW(conv2d_forward(FixedTensor({1, 2, 4, 4}, cfg),
                              FixedTensor({1, 3, 3, 3}, cfg),
                              FixedTensor({1}, cfg), 1),
               ShapeMismatch);
  EXPECT_THROW(conv2d_forward(FixedTensor({2, 4, 4}, cfg),
                              FixedTensor({1, 2, 3, 3}, cfg),
                              FixedTensor({1}, cfg), 1),
               ShapeMismatch);
}

TEST(MaxPool, ConstantInputRoutesGradientToFirstIndex) {
  const FixedConfig cfg;
  const FixedTensor x({1, 1, 4, 4}, std::vector<uint64_t>(16, 7), cfg);
  MaxPoolCache cache;
  const FixedTensor y = maxpool2x2_forward(x, &cache);
  EXPECT_EQ(y.raw(), std::vector<uint64_t>(4, 7));
  const FixedTensor g = maxpool2x2_backward(
      FixedTensor({1, 1, 2, 2}, std::vector<uint64_t>(4, 1), cfg), cache);
  const std::vector<uint64_t> expected = {1, 0, 1, 0, 0, 0, 0, 0,
                                          1, 0, 1, 0, 0, 0, 0, 0};
  EXPECT_EQ(g.raw(), expected);
}

TEST(MaxPool, DistinctValuesMatchHandComputedMaxima) {
  const FixedConfig cfg = config(32, 4);
  const std::vector<double> v = {1,  5,  2,  0,  //
                                 3,  -1, 7,  6,  //
                                 -4, -2, 9,  8,  //
                                 -3, -5, 10, 11};
  const FixedTensor y = maxpool2x2_forward(FixedTensor::encode(v, {1, 1, 4, 4}, cfg));
  EXPECT_EQ(y.decode(), (std::vector<double>{5, 7, -2, 11}));
}

TEST(Relu, PlainForwardAndBackward) {
  const FixedConfig cfg;
  const FixedTensor x = FixedTensor::encode(std::vector<double>{-2.5, 0, 1.25}, {3}, cfg);
  ReluCache cache;
  EXPECT_EQ(relu_plain_forward(x, &cache).decode(), (std::vector<double>{0, 0, 1.25}));
  const FixedTensor g = FixedTensor::encode(std::vector<double>{1, 2, 3}, {3}, cfg);
  // signed(0) counts as non-negative, the same convention as the secure gate.
  EXPECT_EQ(relu_plain_backward(g, cache).decode(), (std::vector<double>{0, 2, 3}));
}

TEST(Fc, IdentityAndBias) {
  Prg rng = Prg::from_seed(4, "fc");
  const FixedConfig cfg;
  const FixedTensor x = uniform_tensor({3, 4}, -2, 2, cfg, rng);
  FixedTensor eye({4, 4}, cfg);
  for (size_t i = 0; i < 4; ++i) eye[i * 5] = encode(1.0, cfg).value();
  EXPECT_EQ(fc_plain_forward(x, eye, FixedTensor({4}, cfg)), x);
  const FixedTensor b = uniform_tensor({2}, -1, 1, cfg, rng);
  const FixedTensor w = uniform_tensor({4, 2}, -1, 1, cfg, rng);
  const FixedTensor y = fc_plain_forward(FixedTensor({3, 4}, cfg), w, b);
  for (size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(y[r * 2], b[0]);
    EXPECT_EQ(y[r * 2 + 1], b[1]);
  }
}

TEST(Mse, KnownValues) {
  const FixedConfig cfg;
  const FixedTensor y = FixedTensor::encode(std::vector<double>{0, 1}, {1, 2}, cfg);
  const MseResult same = mse_loss(y, y);
  EXPECT_EQ(same.loss[0], 0u);
  EXPECT_EQ(same.grad, FixedTensor({1, 2}, cfg));
  const FixedTensor y_hat = FixedTensor::encode(std::vector<double>{1, 0}, {1, 2}, cfg);
  const MseResult r = mse_loss(y_hat, y);
  EXPECT_LE(std::llabs(r.loss.signed_at(0) - encode(1.0, cfg).as_signed()), 2);
  EXPECT_EQ(r.grad.decode(), (std::vector<double>{1.0, -1.0}));
}

TEST(Mse, MatchesRealArithmetic) {
  Prg rng = Prg::from_seed(5, "mse");
  const FixedConfig cfg;
  const FixedTensor y_hat = uniform_tensor({8, 10}, -1, 2, cfg, rng);
  const FixedTensor y = uniform_tensor({8, 10}, 0, 1, cfg, rng);
  const std::vector<double> a = y_hat.decode(), b = y.decode();
  double j = 0;
  for (size_t i = 0; i < a.size(); ++i) j += (a[i] - b[i]) * (a[i] - b[i]);
  j /= a.size();
  const MseResult r = mse_loss(y_hat, y);
  EXPECT_NEAR(decode(r.loss.at(0), cfg), j, 0.01);
  const std::vector<double> g = r.grad.decode();
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(g[i], 2 * (a[i] - b[i]) / 80, 0.01);
  }
}

TEST(GradientCheck, EveryPlainLayerAgreesWithFiniteDifferences) {
  for (const auto& r : testing::run_gradient_checks(11)) {
    EXPECT_EQ(r.passed, r.checked) << r.name << " max rel err " << r.max_rel_err;
  }
}

TEST(Sgd, DegenerateUpdates) {
  Prg rng = Prg::from_seed(6, "sgd");
  const FixedConfig cfg;
  const FixedTensor p = uniform_tensor({5}, -1, 1, cfg, rng);
  const FixedTensor g = uniform_tensor({5}, -1, 1, cfg, rng);
  EXPECT_EQ(sgd_update(p, FixedTensor({5}, cfg), encode(0.5, cfg)), p);
  EXPECT_EQ(sgd_update(p, g, RingElement(0, 64)), p);
  const FixedTensor q = sgd_update(p, g, encode(0.5, cfg));
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(decode(q.at(i), cfg), decode(p.at(i), cfg) - 0.5 * decode(g.at(i), cfg),
                1.0 / 8192);
  }
}

TEST(Sgd, ShareDomainUpdateMatchesPlaintext) {
  Prg rng = Prg::from_seed(7, "sgd-share");
  const FixedConfig cfg;
  const RingElement eta = encode(0.25, cfg);
  for (int trial = 0; trial < 100; ++trial) {
    const FixedTensor p = uniform_tensor({16}, -1, 1, cfg, rng);
    const FixedTensor g = uniform_tensor({16}, -4, 4, cfg, rng);
    auto [p0, p1] = split(p, rng);
    auto [g0, g1] = split(g, rng);
    const FixedTensor got =
        reconstruct(sgd_update_share(0, p0.value, g0.value, eta),
                    sgd_update_share(1, p1.value, g1.value, eta));
    const FixedTensor want = sgd_update(p, g, eta);
    for (size_t i = 0; i < 16; ++i) {
      ASSERT_LE(std::llabs(got.signed_at(i) - want.signed_at(i)), 1);
    }
  }
}

// Runs fc_secure_forward on fresh shares and reconstructs the result.
FixedTensor secure_fc(const FixedTensor& x, const FixedTensor& w,
                      const FixedTensor& b, Prg& rng) {
  auto [x0, x1] = split(x, rng);
  auto [w0, w1] = split(w, rng);
  auto [b0, b1] = split(b, rng);
  auto [t0, t1] = gen_mat_triple(x.dim(0), x.dim(1), w.dim(1), x.config(), rng);
  auto [r0, r1] = testing::run_servers<FixedTensor, FixedTensor>(
      [&, t = t0](Channel& c) mutable {
        return fc_secure_forward(0, x0.value, w0.value, b0.value, t, c);
      },
      [&, t = t1](Channel& c) mutable {
        return fc_secure_forward(1, x1.value, w1.value, b1.value, t, c);
      });
  return reconstruct(r0, r1);
}

TEST(FcSecure, MatchesPlaintextWithinTwoUlps) {
  Prg rng = Prg::from_seed(8, "fc-secure");
  const FixedConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const FixedTensor x = uniform_tensor({4, 64}, -1, 1, cfg, rng);
    const FixedTensor w = uniform_tensor({64, 32}, -0.2, 0.2, cfg, rng);
    const FixedTensor b = uniform_tensor({32}, -0.2, 0.2, cfg, rng);
    const FixedTensor got = secure_fc(x, w, b, rng);
    const FixedTensor want = fc_plain_forward(x, w, b);
    for (size_t i = 0; i < got.size(); ++i) {
      ASSERT_LE(std::llabs(got.signed_at(i) - want.signed_at(i)), 2);
    }
  }
}

TEST(FcSecure, ZeroWeightsAndScalarLayer) {
  Prg rng = Prg::from_seed(9, "fc-secure-degenerate");
  const FixedConfig cfg;
  const FixedTensor b = uniform_tensor({3}, -1, 1, cfg, rng);
  const FixedTensor got = secure_fc(uniform_tensor({2, 5}, -1, 1, cfg, rng),
                                    FixedTensor({5, 3}, cfg), b, rng);
  for (size_t r = 0; r < 2; ++r) {
    for (size_t c = 0; c < 3; ++c) EXPECT_EQ(got[r * 3 + c], b[c]);
  }
  const FixedTensor x = FixedTensor::encode(std::vector<double>{1.5}, {1, 1}, cfg);
  const FixedTensor w = FixedTensor::encode(std::vector<double>{-2.0}, {1, 1}, cfg);
  const FixedTensor b1 = FixedTensor::encode(std::vector<double>{0.25}, {1}, cfg);
  EXPECT_NEAR(decode(secure_fc(x, w, b1, rng).at(0), cfg), -2.75, 1.0 / 8192);
}

TEST(FcSecure, BackwardMatchesPlaintext) {
  Prg rng = Prg::from_seed(10, "fc-secure-back");
  const FixedConfig cfg;
  const FixedTensor x = uniform_tensor({4, 6}, -1, 1, cfg, rng);
  const FixedTensor w = uniform_tensor({6, 3}, -1, 1, cfg, rng);
  const FixedTensor g = uniform_tensor({4, 3}, -1, 1, cfg, rng);
  FcCache plain_cache{x, w};
  const ParamGrads want = fc_plain_backward(g, plain_cache);
  auto [x0, x1] = split(x, rng);
  auto [w0, w1] = split(w, rng);
  auto [g0, g1] = split(g, rng);
  auto [ta0, ta1] = gen_mat_triple(4, 3, 6, cfg, rng);
  auto [tb0, tb1] = gen_mat_triple(6, 4, 3, cfg, rng);
  auto [r0, r1] = testing::run_servers<ParamGrads, ParamGrads>(
      [&, ta = ta0, tb = tb0](Channel& c) mutable {
        return fc_secure_backward(0, g0.value, SecureFcCache{x0.value}, w0.value,
                                  ta, tb, c);
      },
      [&, ta = ta1, tb = tb1](Channel& c) mutable {
        return fc_secure_backward(1, g1.value, SecureFcCache{x1.value}, w1.value,
                                  ta, tb, c);
      });
  auto close = [](const FixedTensor& a, const FixedTensor& b) {
    for (size_t i = 0; i < a.size(); ++i) {
      if (std::llabs(a.signed_at(i) - b.signed_at(i)) > 2) return false;
    }
    return a.shape() == b.shape();
  };
  EXPECT_TRUE(close(reconstruct(r0.grad_x, r1.grad_x), want.grad_x));
  EXPECT_TRUE(close(reconstruct(r0.grad_w, r1.grad_w), want.grad_w));
  EXPECT_EQ(reconstruct(r0.grad_b, r1.grad_b), want.grad_b);
}

struct ReluRun {
  FixedTensor y, bit, grad;
};

// Secure ReLU forward then backward on `x` with incoming gradient `g`.
ReluRun secure_relu(const FixedTensor& x, const FixedTensor& g, Prg& rng) {
  const FixedConfig& cfg = x.config();
  auto pairs = keygen_comparison_batch(cfg, x.size(), rng);
  std::vector<ComparisonKey> k0, k1;
  for (auto& kp : pairs) {
    k0.push_back(kp.k0);
    k1.push_back(kp.k1);
  }
  auto [s0, s1] = gen_triple(x.shape(), cfg, rng);
  auto [u0, u1] = gen_triple(x.shape(), cfg, rng);
  auto [x0, x1] = split(x, rng);
  auto [g0, g1] = split(g, rng);
  auto server = [](int party, FixedTensor xs, FixedTensor gs,
                   std::vector<ComparisonKey> keys, TripleShare sel,
                   TripleShare back) {
    return [=](Channel& c) mutable {
      KeyBundle bundle(party, keys);
      SecureReluResult r = relu_secure_forward(party, xs, bundle, sel, c);
      FixedTensor grad = relu_secure_backward(gs, r.bit, back, c);
      return ReluRun{r.y, r.bit, grad};
    };
  };
  auto [r0, r1] = testing::run_servers<ReluRun, ReluRun>(
      server(0, x0.value, g0.value, k0, s0, u0),
      server(1, x1.value, g1.value, k1, s1, u1));
  return {reconstruct(r0.y, r1.y), reconstruct(r0.bit, r1.bit),
          reconstruct(r0.grad, r1.grad)};
}

TEST(ReluSecure, SimpleValues) {
  Prg rng = Prg::from_seed(12, "relu-secure");
  const FixedConfig cfg;
  const FixedTensor x = FixedTensor::encode(std::vector<double>{1.0, -1.0}, {2}, cfg);
  const FixedTensor g = FixedTensor::encode(std::vector<double>{0.5, 0.5}, {2}, cfg);
  const ReluRun r = secure_relu(x, g, rng);
  EXPECT_EQ(r.y.decode(), (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(r.grad.decode(), (std::vector<double>{0.5, 0.0}));
}

TEST(ReluSecure, ExhaustiveAtEightBits) {
  Prg rng = Prg::from_seed(13, "relu-secure-8");
  const FixedConfig cfg = config(8, 4);
  FixedTensor x({256}, cfg), g({256}, cfg);
  for (uint64_t i = 0; i < 256; ++i) {
    x[i] = i;
    g[i] = (i * 37 + 11) & 0xff;
  }
  ReluCache cache;
  const FixedTensor want = relu_plain_forward(x, &cache);
  const ReluRun r = secure_relu(x, g, rng);
  EXPECT_EQ(r.y, want);
  EXPECT_EQ(r.grad, relu_plain_backward(g, cache));
}

TEST(NetworkSpec, BuiltInNetworksHaveExpectedShapes) {
  const NetworkSpec n1 = network1(10);
  const auto s1 = n1.layer_shapes();
  EXPECT_EQ(s1[n1.indices(Placement::kServer).front()], (Shape{16, 4, 4}));
  EXPECT_EQ(s1.back(), (Shape{10}));
  EXPECT_EQ(n1.indices(Placement::kServer).size(), 2u);
  const NetworkSpec n2 = network2(10);
  EXPECT_EQ(n2.indices(Placement::kServer).size(), 4u);
  EXPECT_EQ(n2.layer_shapes()[n2.indices(Placement::kClientOutput).front()],
            (Shape{64}));
}

TEST(NetworkSpec, JsonConfigsMatchBuiltIns) {
  for (const auto& [file, builtin] :
       {std::pair{"network1.json", network1(10)},
        std::pair{"network2.json", network2(10)}}) {
    const NetworkSpec spec =
        NetworkSpec::load(std::string(SPLITFSS_CONFIG_DIR) + "/" + file);
    EXPECT_EQ(spec.layer_shapes(), builtin.layer_shapes());
    ASSERT_EQ(spec.layers.size(), builtin.layers.size());
    for (size_t i = 0; i < spec.layers.size(); ++i) {
      EXPECT_EQ(spec.layers[i].placement, builtin.layers[i].placement);
      EXPECT_EQ(spec.layers[i].kind, builtin.layers[i].kind);
    }
  }
}

TEST(NetworkSpec, RejectsBadConfigs) {
  EXPECT_THROW(NetworkSpec::from_json(R"({"input":[1,4,4],"classes":2,"layers":[
      {"type":"fc","out":2,"placement":"client_output"},
      {"type":"relu","placement":"server"}]})"),
               InvalidConfig);
  EXPECT_THROW(NetworkSpec::from_json(R"({"input":[1,4,4],"classes":3,"layers":[
      {"type":"fc","out":2,"placement":"server"}]})"),
               InvalidConfig);
  EXPECT_THROW(NetworkSpec::from_json(R"({"input":[1,4,4],"classes":2,"layers":[
      {"type":"softmax","placement":"server"}]})"),
               InvalidConfig);
  EXPECT_THROW(NetworkSpec::from_json("not json"), InvalidConfig);
}

TEST(TrainConfig, LearningRateMustBeExact) {
  const FixedConfig cfg;
  TrainConfig tc;
  tc.learning_rate = 0.5;
  EXPECT_NO_THROW(tc.validate(cfg));
  tc.learning_rate = 0.1;
  EXPECT_THROW(tc.validate(cfg), InvalidConfig);
  tc.learning_rate = 1.0;
  tc.batch_size = 0;
  EXPECT_THROW(tc.validate(cfg), InvalidConfig);
}

TEST(PlainSegment, FrontSegmentOfNetwork1) {
  const FixedConfig cfg;
  const NetworkSpec spec = network1(10);
  PlainSegment front(spec, spec.indices(Placement::kClientFront), cfg);
  front.init(3);
  PlainSegment again(spec, spec.indices(Placement::kClientFront), cfg);
  again.init(3);
  EXPECT_EQ(front.params()[0].w, again.params()[0].w);
  Prg rng = Prg::from_seed(14, "segment");
  const FixedTensor x = uniform_tensor({2, 1, 28, 28}, 0, 1, cfg, rng);
  const FixedTensor y = front.forward(x);
  EXPECT_EQ(y.shape(), (Shape{2, 16, 4, 4}));
  const FixedTensor gx = front.backward(FixedTensor(y.shape(), cfg));
  EXPECT_EQ(gx.shape(), x.shape());
  const FixedTensor before = front.params()[0].w;
  front.sgd(encode(1.0, cfg));
  EXPECT_EQ(front.params()[0].w, before);  // zero gradient leaves weights alone
}

TEST(PlainSegment, InitBoundsFollowFanIn) {
  const FixedConfig cfg;
  const NetworkSpec spec = network1(10);
  const auto shapes = spec.layer_shapes();
  const size_t fc = spec.indices(Placement::kServer).front();
  const LayerParams p = init_layer_params(spec.layers[fc], shapes[fc], fc, 5, cfg);
  EXPECT_EQ(p.w.shape(), (Shape{256, 64}));
  for (double v : p.w.decode()) ASSERT_LE(std::fabs(v), 1.0 / 16 + 1e-4);
}

}  // namespace
}  // namespace splitfss
