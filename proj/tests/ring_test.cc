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

#include "splitfss/ring.h"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "splitfss/errors.h"
#include "splitfss/prg.h"

namespace splitfss {
namespace {

FixedConfig config(int n, int f) {
  FixedConfig cfg;
  cfg.bit_width = n;
  cfg.frac_bits = f;
  return cfg;
}

TEST(FixedConfig, RejectsUnsupportedParameters) {
  EXPECT_THROW(config(12, 4).validate(), InvalidConfig);
  EXPECT_THROW(config(8, 6).validate(), InvalidConfig);
  EXPECT_THROW(config(8, 0).validate(), InvalidConfig);
  FixedConfig bad_lambda;
  bad_lambda.lambda = 64;
  EXPECT_THROW(bad_lambda.validate(), InvalidConfig);
  EXPECT_NO_THROW(FixedConfig{}.validate());
}

TEST(FixedConfig, FingerprintSeparatesConfigs) {
  EXPECT_EQ(config(64, 13).fingerprint(), config(64, 13).fingerprint());
  EXPECT_NE(config(64, 13).fingerprint(), config(64, 12).fingerprint());
  EXPECT_NE(config(32, 13).fingerprint(), config(64, 13).fingerprint());
}

TEST(Encode, KnownValues) {
  const FixedConfig cfg = config(64, 13);
  EXPECT_EQ(encode(1.5, cfg).value(), 12288u);
  EXPECT_EQ(encode(-1.0, cfg).value(), ~uint64_t{0} - 8191);
  EXPECT_EQ(encode(-1.0, config(8, 4)).value(), 240u);
  EXPECT_DOUBLE_EQ(decode(encode(-3.25, cfg), cfg), -3.25);
}

TEST(Encode, RoundsHalfAwayFromZero) {
  const FixedConfig cfg = config(16, 1);
  EXPECT_EQ(encode(0.25, cfg).as_signed(), 1);
  EXPECT_EQ(encode(-0.25, cfg).as_signed(), -1);
  EXPECT_EQ(encode(0.74, cfg).as_signed(), 1);
  EXPECT_EQ(encode(0.75, cfg).as_signed(), 2);
}

TEST(Encode, OverflowAtRangeBoundary) {
  const FixedConfig cfg = config(8, 4);  // representable range (-8, 8)
  EXPECT_NO_THROW(encode(7.9375, cfg));
  EXPECT_NO_THROW(encode(-7.9375, cfg));
  EXPECT_THROW(encode(8.0, cfg), OverflowError);
  EXPECT_THROW(encode(-8.0, cfg), OverflowError);
  EXPECT_THROW(encode(std::nan(""), cfg), OverflowError);
}

TEST(Decode, EveryEightBitPatternRoundTrips) {
  const FixedConfig cfg = config(8, 3);
  for (uint64_t v = 0; v < 256; ++v) {
    const double x = decode(RingElement(v, 8), cfg);
    const int64_t expected = v >= 128 ? static_cast<int64_t>(v) - 256 : v;
    EXPECT_DOUBLE_EQ(x, expected / 8.0);
    if (std::fabs(x) < 16.0) EXPECT_EQ(encode(x, cfg).value(), v);
  }
}

TEST(RingOps, ExhaustiveAtEightBits) {
  for (uint32_t a = 0; a < 256; ++a) {
    for (uint32_t b = 0; b < 256; ++b) {
      const RingElement x(a, 8), y(b, 8);
      ASSERT_EQ(ring_add(x, y).value(), (a + b) % 256);
      ASSERT_EQ(ring_sub(x, y).value(), (a + 256 - b) % 256);
      ASSERT_EQ(ring_mul(x, y).value(), (a * b) % 256);
    }
    ASSERT_EQ(ring_neg(RingElement(a, 8)).value(), (256 - a) % 256);
  }
}

TEST(RingOps, MixedWidthsAreRejected) {
  EXPECT_THROW(ring_add(RingElement(1, 8), RingElement(1, 16)), ConfigMismatch);
  EXPECT_THROW(ring_mul(RingElement(1, 32), RingElement(1, 64)), ConfigMismatch);
}

TEST(Trunc, ProductOfEncodedValues) {
  const FixedConfig cfg = config(64, 13);
  const RingElement p = ring_mul(encode(1.5, cfg), encode(2.0, cfg));
  EXPECT_EQ(trunc(p, cfg), encode(3.0, cfg));
  const RingElement q = ring_mul(encode(-1.25, cfg), encode(3.0, cfg));
  EXPECT_EQ(trunc(q, cfg), encode(-3.75, cfg));
}

TEST(Trunc, FloorsTowardNegativeInfinity) {
  const FixedConfig cfg = config(16, 2);
  EXPECT_EQ(trunc(RingElement(from_signed(-5, 16), 16), cfg).as_signed(), -2);
  EXPECT_EQ(trunc(RingElement(5, 16), cfg).as_signed(), 1);
}

// Independent oracle: wide signed arithmetic reduced modulo 2^n at the end.
std::vector<uint64_t> naive_matmul(const std::vector<int64_t>& a,
                                   const std::vector<int64_t>& b, size_t m,
                                   size_t k, size_t p, int n) {
  std::vector<uint64_t> out(m * p);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < p; ++j) {
      __int128 acc = 0;
      for (size_t t = 0; t < k; ++t) {
        acc += static_cast<__int128>(a[i * k + t]) * b[t * p + j];
      }
      out[i * p + j] = wrap_bits(static_cast<uint64_t>(acc), n);
    }
  }
  return out;
}

TEST(FixedTensor, MatmulMatchesWideIntegerOracle) {
  Prg rng = Prg::from_seed(7, "ring-test");
  for (int n : {16, 32, 64}) {
    const FixedConfig cfg = config(n, 8);
    const size_t m = 5, k = 7, p = 3;
    std::vector<int64_t> a(m * k), b(k * p);
    FixedTensor ta({m, k}, cfg), tb({k, p}, cfg);
    for (size_t i = 0; i < a.size(); ++i) {
      a[i] = to_signed(rng.next_bits(n), n);
      ta[i] = from_signed(a[i], n);
    }
    for (size_t i = 0; i < b.size(); ++i) {
      b[i] = to_signed(rng.next_bits(n), n);
      tb[i] = from_signed(b[i], n);
    }
    EXPECT_EQ(tensor_matmul(ta, tb).raw(), naive_matmul(a, b, m, k, p, n));
  }
}

TEST(FixedTensor, ShapeChecks) {
  const FixedConfig cfg;
  FixedTensor a({2, 3}, cfg), b({3, 2}, cfg), c({2, 2}, cfg);
  EXPECT_THROW(tensor_add(a, b), ShapeMismatch);
  EXPECT_THROW(tensor_matmul(a, c), ShapeMismatch);
  EXPECT_NO_THROW(tensor_matmul(a, b));
  EXPECT_THROW(tensor_add(a, FixedTensor({2, 3}, config(32, 13))),
               ConfigMismatch);
}

TEST(FixedTensor, RowHelpers) {
  const FixedConfig cfg = config(32, 4);
  const std::vector<double> m = {1, 2, 3, 4, 5, 6};
  const std::vector<double> r = {0.5, -1, 2};
  const FixedTensor mat = FixedTensor::encode(m, {2, 3}, cfg);
  const FixedTensor row = FixedTensor::encode(r, {3}, cfg);
  EXPECT_EQ(tensor_add_row(mat, row).decode(),
            (std::vector<double>{1.5, 1, 5, 4.5, 4, 8}));
  EXPECT_EQ(tensor_sum_rows(mat).decode(), (std::vector<double>{5, 7, 9}));
  EXPECT_EQ(tensor_transpose(mat).decode(),
            (std::vector<double>{1, 4, 2, 5, 3, 6}));
  EXPECT_EQ(mat.slice_rows(1, 2).decode(), (std::vector<double>{4, 5, 6}));
  EXPECT_THROW(mat.reshaped({4}), ShapeMismatch);
}

}  // namespace
}  // namespace splitfss
