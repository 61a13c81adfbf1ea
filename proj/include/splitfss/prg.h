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

// Entropy sources. Prg is an AES-128-CTR keystream: seeded deterministically
// in tests and in reproducible runs, or from OS entropy in deployment.
// FixedKeyAes is the public permutation behind the FSS seed expansion.

#ifndef SPLITFSS_PRG_H_
#define SPLITFSS_PRG_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace splitfss {

using Block = std::array<uint8_t, 16>;

inline Block xor_blocks(const Block& a, const Block& b) {
  Block out;
  for (size_t i = 0; i < out.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

// Not thread-safe; give each thread its own instance.
class Prg {
 public:
  explicit Prg(const Block& key);
  // Domain-separated stream: key = SHA-256(label || seed)[0..16).
  static Prg from_seed(uint64_t seed, std::string_view label);
  static Prg from_os_entropy();

  Prg(Prg&&) noexcept;
  Prg& operator=(Prg&&) noexcept;
  Prg(const Prg&) = delete;
  Prg& operator=(const Prg&) = delete;
  ~Prg();

  void fill(std::span<uint8_t> out);
  uint64_t next_u64();
  // Uniform over [0, 2^bits).
  uint64_t next_bits(int bits);
  // Uniform over [0, bound) by rejection; bound > 0.
  uint64_t next_below(uint64_t bound);
  // Uniform double in [0, 1) with 53 random bits.
  double next_unit();
  bool next_bit();
  Block next_block();

 private:
  void refill();

  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::array<uint8_t, 4096> buffer_{};
  size_t pos_ = 4096;
};

// AES-128 under a fixed public key, used as a random permutation.
// Thread-safe: each thread lazily creates its own cipher context.
class FixedKeyAes {
 public:
  // Encrypts blocks in place (ECB).
  static void encrypt(std::span<Block> blocks);
  // Raw single-block AES-128 under an arbitrary key; used for known-answer
  // tests of the underlying cipher.
  static Block encrypt_with_key(const Block& key, const Block& plaintext);
  static const Block& key();
};

}  // namespace splitfss

#endif  // SPLITFSS_PRG_H_
