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

// Function secret sharing for the masked sign test behind secure ReLU.
//
// The dealer samples a mask alpha and two keys. On a public input
// x_pub = z + alpha each server evaluates its key locally; the two outputs
// are additive shares of 1[signed(x_pub - alpha) >= 0], i.e. of the sign bit
// of z, as an unscaled ring element.
//
// Construction: with x', alpha' the low n-1 bits and m the top bit of alpha,
//   1[signed(x - alpha) >= 0] = u XOR m XOR 1[x' < alpha'],  u = 1 - msb(x).
// A distributed comparison function over the n-1 low bits (GGM tree with
// per-level seed, control-bit and value corrections) yields shares of
// (1 - 2m) * 1[x' < alpha'], and the keys also carry arithmetic shares of m,
// which together give shares of m XOR 1[x' < alpha'] without interaction.
//
// Seed expansion is AES-128 under a fixed public key in Matyas-Meyer-Oseas
// mode, so keys and outputs are byte-stable across platforms.

#ifndef SPLITFSS_FSS_H_
#define SPLITFSS_FSS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "splitfss/beaver.h"
#include "splitfss/codec.h"
#include "splitfss/prg.h"
#include "splitfss/ring.h"
#include "splitfss/sharing.h"
#include "splitfss/transport.h"

namespace splitfss {

struct CorrectionWord {
  Block seed;
  uint64_t value = 0;
  bool t_left = false;
  bool t_right = false;

  bool operator==(const CorrectionWord&) const = default;
};

struct ComparisonKey {
  int party = 0;
  int bit_width = 64;
  uint64_t mask_share = 0;   // share of alpha
  Block root_seed{};
  std::vector<CorrectionWord> levels;  // n - 1 entries, most significant first
  uint64_t output_correction = 0;
  uint64_t msb_share = 0;    // share of the top bit of alpha

  // Layout (little endian): party u8, n u8, mask_share, root_seed[16],
  // (n-1) x [seed[16], value, flags u8 (bit0 left, bit1 right)],
  // output_correction, msb_share. Ring fields take n/8 bytes.
  void serialize(ByteWriter& w) const;
  std::vector<uint8_t> serialize() const;
  static ComparisonKey deserialize(ByteReader& r);
  static size_t serialized_size(int bit_width);

  bool operator==(const ComparisonKey&) const = default;
};

// Size of one key in bits, excluding the two header bytes:
// (n-1)(lambda + n + 2) + lambda + 3n.
size_t comparison_key_bits(const FixedConfig& cfg);

struct ComparisonKeyPair {
  RingElement alpha;
  ComparisonKey k0;
  ComparisonKey k1;
};

ComparisonKeyPair keygen_comparison(const FixedConfig& cfg, Prg& rng);
// Same, with the mask chosen by the caller (used for exhaustive checks).
ComparisonKeyPair keygen_comparison(const FixedConfig& cfg, RingElement alpha,
                                    Prg& rng);
// Generates `count` independent key pairs with a batched seed expansion.
std::vector<ComparisonKeyPair> keygen_comparison_batch(const FixedConfig& cfg,
                                                       size_t count, Prg& rng);
std::vector<ComparisonKeyPair> keygen_comparison_batch(
    const FixedConfig& cfg, std::span<const uint64_t> alphas, Prg& rng);

Share eval_comparison(int party, const ComparisonKey& key, RingElement x_pub);
// Evaluates keys[i] on x_pub[i] for all i; returns this party's raw shares.
std::vector<uint64_t> eval_comparison_batch(int party,
                                            std::span<const ComparisonKey> keys,
                                            std::span<const uint64_t> x_pub);

// One server's keys for one ReLU gate over one batch, in element order.
// Evaluation consumes the bundle.
class KeyBundle {
 public:
  KeyBundle() = default;
  KeyBundle(int party, std::vector<ComparisonKey> keys);

  int party() const { return party_; }
  size_t size() const { return keys_.size(); }
  bool consumed() const { return consumed_; }
  const std::vector<ComparisonKey>& keys() const { return keys_; }
  std::vector<uint64_t> mask_shares() const;

  // Throws KeyExhausted on a second call, ShapeMismatch on a size mismatch.
  std::vector<uint64_t> eval(std::span<const uint64_t> x_pub);

  void serialize(ByteWriter& w) const;
  static KeyBundle deserialize(ByteReader& r, int party);

 private:
  int party_ = 0;
  std::vector<ComparisonKey> keys_;
  bool consumed_ = false;
};

// Multiplies a shared 0/1 bit tensor into a shared value tensor with one
// Beaver triple: the result reconstructs to x where the bit is 1 and to 0
// elsewhere. The bit is an unscaled ring element, so no truncation follows.
FixedTensor relu_sign_to_select(const FixedTensor& bit, const FixedTensor& x,
                                TripleShare& t, Channel& peer);

}  // namespace splitfss

#endif  // SPLITFSS_FSS_H_
