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

#include "splitfss/sharing.h"

#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "splitfss/errors.h"

namespace splitfss {
namespace {

FixedConfig config(int n, int f) {
  FixedConfig cfg;
  cfg.bit_width = n;
  cfg.frac_bits = f;
  return cfg;
}

TEST(Sharing, SplitReconstructsAtEveryWidth) {
  Prg rng = Prg::from_seed(11, "sharing");
  for (int n : {8, 16, 32, 64}) {
    for (int i = 0; i < 200; ++i) {
      const RingElement x(rng.next_bits(n), n);
      auto [s0, s1] = split(x, rng);
      EXPECT_EQ(s0.party, 0);
      EXPECT_EQ(s1.party, 1);
      EXPECT_EQ(reconstruct(s0, s1), x);
    }
  }
}

TEST(Sharing, ReconstructNeedsBothParties) {
  Prg rng = Prg::from_seed(1, "sharing");
  auto [s0, s1] = split(RingElement(5, 8), rng);
  EXPECT_THROW(reconstruct(s0, s0), PartyMismatch);
  EXPECT_THROW(reconstruct(s1, s0), PartyMismatch);
  EXPECT_THROW(share_add(s0, s1), PartyMismatch);
}

TEST(Sharing, LinearOperationsAreLocal) {
  Prg rng = Prg::from_seed(2, "sharing");
  const FixedConfig cfg = config(32, 8);
  const RingElement x = encode(1.5, cfg), y = encode(-4.25, cfg);
  const RingElement c = encode(2.0, cfg);
  auto [x0, x1] = split(x, rng);
  auto [y0, y1] = split(y, rng);
  EXPECT_EQ(reconstruct(share_add(x0, y0), share_add(x1, y1)), ring_add(x, y));
  EXPECT_EQ(reconstruct(share_add_public(x0, c), share_add_public(x1, c)),
            ring_add(x, c));
  EXPECT_EQ(reconstruct(share_mul_public(y0, RingElement(3, 32)),
                        share_mul_public(y1, RingElement(3, 32))),
            encode(-12.75, cfg));
}

// Each share on its own is uniform whatever the secret: over 25,600 splits of
// a fixed 8-bit secret every residue of share 0 appears close to 100 times.
TEST(Sharing, SingleShareLooksUniform) {
  Prg rng = Prg::from_seed(5, "uniform");
  for (uint64_t secret : {0u, 200u}) {
    std::array<int, 256> hist{};
    for (int i = 0; i < 25600; ++i) ++hist[split(RingElement(secret, 8), rng).second.value.value()];
    double chi2 = 0;
    for (int h : hist) chi2 += (h - 100.0) * (h - 100.0) / 100.0;
    // 255 degrees of freedom; 350 is beyond the 0.999 quantile (~330.5).
    EXPECT_LT(chi2, 350.0);
  }
}

TEST(Sharing, TensorSplitAndPublicAdd) {
  Prg rng = Prg::from_seed(4, "tensor");
  const FixedConfig cfg = config(64, 13);
  const std::vector<double> v = {0.5, -2.0, 3.125, 0.0};
  const FixedTensor x = FixedTensor::encode(v, {2, 2}, cfg);
  auto [s0, s1] = split(x, rng);
  EXPECT_EQ(reconstruct(s0, s1), x);
  EXPECT_EQ(reconstruct(share_add_public(s0, x), share_add_public(s1, x)),
            tensor_add(x, x));
  EXPECT_EQ(tensor_add(public_as_share(0, x), public_as_share(1, x)), x);
}

// Local truncation error stays within one ulp of the exact arithmetic shift
// when the secret is far from the wrap-around boundary (failure odds per
// sample are about |x| / 2^n, here at most 2^-24).
TEST(Sharing, LocalTruncationWithinOneUlp) {
  Prg rng = Prg::from_seed(9, "trunc");
  for (const FixedConfig cfg : {config(64, 13), config(32, 8)}) {
    const int n = cfg.bit_width;
    const int64_t bound = int64_t{1} << (n - 24);
    for (int i = 0; i < 20000; ++i) {
      const int64_t secret =
          static_cast<int64_t>(rng.next_below(2 * bound)) - bound;
      const RingElement x(from_signed(secret, n), n);
      auto [s0, s1] = split(x, rng);
      const uint64_t t0 = truncate_share_raw(0, s0.value.value(), cfg);
      const uint64_t t1 = truncate_share_raw(1, s1.value.value(), cfg);
      const int64_t got = to_signed(wrap_bits(t0 + t1, n), n);
      const int64_t exact = secret >> cfg.frac_bits;
      ASSERT_LE(std::llabs(got - exact), 1) << "secret " << secret;
    }
  }
}

TEST(Sharing, TensorTruncationMatchesScalar) {
  Prg rng = Prg::from_seed(10, "trunc-tensor");
  const FixedConfig cfg;
  const std::vector<double> v = {1.0, -1.0, 7.5, -0.001};
  const FixedTensor x = FixedTensor::encode(v, {4}, cfg);
  auto [s0, s1] = split(tensor_scale(x, encode(3.0, cfg).value()), rng);
  const FixedTensor r =
      reconstruct(truncate_share(0, s0.value), truncate_share(1, s1.value));
  for (size_t i = 0; i < v.size(); ++i) {
    EXPECT_NEAR(decode(r.at(i), cfg), 3 * v[i], 2.0 / 8192);
  }
  EXPECT_THROW(truncate_share(2, s0.value), PartyMismatch);
}

}  // namespace
}  // namespace splitfss
