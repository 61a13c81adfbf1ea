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

#include "splitfss/prg.h"

#include <gtest/gtest.h>

#include <set>

namespace splitfss {
namespace {

Block from_hex(const char* hex) {
  Block b{};
  for (size_t i = 0; i < b.size(); ++i) {
    b[i] = static_cast<uint8_t>(std::stoi(std::string(hex + 2 * i, 2), nullptr, 16));
  }
  return b;
}

TEST(FixedKeyAes, Fips197KnownAnswer) {
  const Block key = from_hex("000102030405060708090a0b0c0d0e0f");
  const Block pt = from_hex("00112233445566778899aabbccddeeff");
  EXPECT_EQ(FixedKeyAes::encrypt_with_key(key, pt),
            from_hex("69c4e0d86a7b0430d8cdb78070b4c55a"));
}

TEST(FixedKeyAes, BatchMatchesSingleBlock) {
  std::vector<Block> blocks(5);
  for (size_t i = 0; i < blocks.size(); ++i) blocks[i][0] = static_cast<uint8_t>(i);
  std::vector<Block> expected;
  for (const Block& b : blocks) {
    expected.push_back(FixedKeyAes::encrypt_with_key(FixedKeyAes::key(), b));
  }
  FixedKeyAes::encrypt(blocks);
  EXPECT_EQ(blocks, expected);
}

TEST(Prg, SameSeedAndLabelGiveSameStream) {
  Prg a = Prg::from_seed(42, "x");
  Prg b = Prg::from_seed(42, "x");
  Prg c = Prg::from_seed(42, "y");
  Prg d = Prg::from_seed(43, "x");
  const uint64_t va = a.next_u64();
  EXPECT_EQ(va, b.next_u64());
  EXPECT_NE(va, c.next_u64());
  EXPECT_NE(va, d.next_u64());
}

TEST(Prg, ChunkedReadsMatchOneRead) {
  Prg a = Prg::from_seed(1, "chunks");
  Prg b = Prg::from_seed(1, "chunks");
  std::vector<uint8_t> whole(10000), parts(10000);
  a.fill(whole);
  size_t off = 0;
  for (size_t step : {1u, 7u, 4095u, 3u, 5894u}) {
    b.fill(std::span<uint8_t>(parts).subspan(off, step));
    off += step;
  }
  EXPECT_EQ(whole, parts);
}

TEST(Prg, BoundedDrawsStayInRange) {
  Prg rng = Prg::from_seed(3, "bounds");
  std::set<uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const uint64_t v = rng.next_below(10);
    ASSERT_LT(v, 10u);
    seen.insert(v);
    ASSERT_LT(rng.next_bits(5), 32u);
    const double u = rng.next_unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_EQ(seen.size(), 10u);
}

}  // namespace
}  // namespace splitfss
