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

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <cstring>
#include <stdexcept>
#include <string>

namespace splitfss {
namespace {

struct CtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter>;

CtxPtr make_ctx(const EVP_CIPHER* cipher, const uint8_t* key,
                const uint8_t* iv) {
  CtxPtr ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), cipher, nullptr, key, iv) != 1) {
    throw std::runtime_error("AES context initialisation failed");
  }
  EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
  return ctx;
}

void aes_update(EVP_CIPHER_CTX* ctx, uint8_t* out, const uint8_t* in,
                size_t len) {
  int produced = 0;
  if (EVP_EncryptUpdate(ctx, out, &produced, in, static_cast<int>(len)) != 1 ||
      static_cast<size_t>(produced) != len) {
    throw std::runtime_error("AES encryption failed");
  }
}

}  // namespace

struct Prg::Impl {
  CtxPtr ctx;
};

Prg::Prg(const Block& key) : impl_(std::make_unique<Impl>()) {
  const uint8_t iv[16] = {};
  impl_->ctx = make_ctx(EVP_aes_128_ctr(), key.data(), iv);
}

Prg Prg::from_seed(uint64_t seed, std::string_view label) {
  std::string material(label);
  for (int i = 0; i < 8; ++i) {
    material.push_back(static_cast<char>((seed >> (8 * i)) & 0xff));
  }
  uint8_t digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_Digest(material.data(), material.size(), digest, &digest_len,
                 EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  Block key;
  std::memcpy(key.data(), digest, key.size());
  return Prg(key);
}

Prg Prg::from_os_entropy() {
  Block key;
  if (RAND_bytes(key.data(), static_cast<int>(key.size())) != 1) {
    throw std::runtime_error("OS entropy unavailable");
  }
  return Prg(key);
}

Prg::Prg(Prg&&) noexcept = default;
Prg& Prg::operator=(Prg&&) noexcept = default;
Prg::~Prg() = default;

void Prg::refill() {
  static const std::array<uint8_t, 4096> kZeros{};
  aes_update(impl_->ctx.get(), buffer_.data(), kZeros.data(), buffer_.size());
  pos_ = 0;
}

void Prg::fill(std::span<uint8_t> out) {
  size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buffer_.size()) refill();
    const size_t take = std::min(out.size() - done, buffer_.size() - pos_);
    std::memcpy(out.data() + done, buffer_.data() + pos_, take);
    pos_ += take;
    done += take;
  }
}

uint64_t Prg::next_u64() {
  if (buffer_.size() - pos_ < 8) {
    uint8_t tmp[8];
    fill(tmp);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | tmp[i];
    return v;
  }
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buffer_[pos_ + i];
  pos_ += 8;
  return v;
}

uint64_t Prg::next_bits(int bits) {
  const uint64_t v = next_u64();
  return bits >= 64 ? v : v & ((uint64_t{1} << bits) - 1);
}

uint64_t Prg::next_below(uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("next_below(0)");
  const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % bound);
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

double Prg::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

bool Prg::next_bit() { return next_u64() & 1; }

Block Prg::next_block() {
  Block b;
  fill(b);
  return b;
}

const Block& FixedKeyAes::key() {
  // Arbitrary public constant: the first 16 hex digits of pi's fraction.
  static const Block kKey = {0x24, 0x3f, 0x6a, 0x88, 0x85, 0xa3, 0x08, 0xd3,
                             0x13, 0x19, 0x8a, 0x2e, 0x03, 0x70, 0x73, 0x44};
  return kKey;
}

void FixedKeyAes::encrypt(std::span<Block> blocks) {
  thread_local CtxPtr ctx = make_ctx(EVP_aes_128_ecb(), key().data(), nullptr);
  if (blocks.empty()) return;
  auto* bytes = reinterpret_cast<uint8_t*>(blocks.data());
  aes_update(ctx.get(), bytes, bytes, blocks.size() * sizeof(Block));
}

Block FixedKeyAes::encrypt_with_key(const Block& key, const Block& plaintext) {
  CtxPtr ctx = make_ctx(EVP_aes_128_ecb(), key.data(), nullptr);
  Block out;
  aes_update(ctx.get(), out.data(), plaintext.data(), out.size());
  return out;
}

}  // namespace splitfss
