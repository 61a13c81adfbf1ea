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

#include "splitfss/fss.h"

#include <string>

#include "splitfss/errors.h"

namespace splitfss {
namespace {

// Children of one tree node after seed expansion.
struct Node {
  Block s[2];
  bool t[2];
  uint64_t v[2];
};

// G(s) = MMO(s ^ 0) || MMO(s ^ 1) || MMO(s ^ 2), with MMO(x) = AES_K(x) ^ x
// and the counter xored into the last byte. The low bit of byte 0 of the
// first two blocks is the child control bit and is cleared from the seed.
void expand(std::span<const Block> seeds, int n, std::vector<Node>& out) {
  std::vector<Block> in(3 * seeds.size());
  for (size_t i = 0; i < seeds.size(); ++i) {
    for (int j = 0; j < 3; ++j) {
      in[3 * i + j] = seeds[i];
      in[3 * i + j][15] ^= static_cast<uint8_t>(j);
    }
  }
  std::vector<Block> enc = in;
  FixedKeyAes::encrypt(enc);
  out.resize(seeds.size());
  for (size_t i = 0; i < seeds.size(); ++i) {
    Node& node = out[i];
    for (int side = 0; side < 2; ++side) {
      node.s[side] = xor_blocks(enc[3 * i + side], in[3 * i + side]);
      node.t[side] = node.s[side][0] & 1;
      node.s[side][0] &= 0xfe;
    }
    const Block vb = xor_blocks(enc[3 * i + 2], in[3 * i + 2]);
    uint64_t lo = 0, hi = 0;
    for (int b = 7; b >= 0; --b) {
      lo = (lo << 8) | vb[b];
      hi = (hi << 8) | vb[8 + b];
    }
    node.v[0] = wrap_bits(lo, n);
    node.v[1] = wrap_bits(hi, n);
  }
}

// Maps a leaf seed to a ring element: low 8 bytes of MMO(s ^ 3).
void convert(std::span<const Block> seeds, int n, std::vector<uint64_t>& out) {
  std::vector<Block> in(seeds.begin(), seeds.end());
  for (auto& b : in) b[15] ^= 3;
  std::vector<Block> enc = in;
  FixedKeyAes::encrypt(enc);
  out.resize(seeds.size());
  for (size_t i = 0; i < seeds.size(); ++i) {
    const Block b = xor_blocks(enc[i], in[i]);
    uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
    out[i] = wrap_bits(v, n);
  }
}

void check_party(int party) {
  if (party != 0 && party != 1) throw PartyMismatch("key party must be 0 or 1");
}

}  // namespace

void ComparisonKey::serialize(ByteWriter& w) const {
  const int eb = bit_width / 8;
  w.put_u8(static_cast<uint8_t>(party));
  w.put_u8(static_cast<uint8_t>(bit_width));
  w.put_uint(mask_share, eb);
  w.put_block(root_seed);
  for (const CorrectionWord& cw : levels) {
    w.put_block(cw.seed);
    w.put_uint(cw.value, eb);
    w.put_u8(static_cast<uint8_t>((cw.t_left ? 1 : 0) | (cw.t_right ? 2 : 0)));
  }
  w.put_uint(output_correction, eb);
  w.put_uint(msb_share, eb);
}

std::vector<uint8_t> ComparisonKey::serialize() const {
  ByteWriter w;
  w.bytes().reserve(serialized_size(bit_width));
  serialize(w);
  return w.take();
}

ComparisonKey ComparisonKey::deserialize(ByteReader& r) {
  ComparisonKey k;
  k.party = r.u8();
  k.bit_width = r.u8();
  if (k.party > 1) throw FrameCorrupt("comparison key has a bad party byte");
  if (k.bit_width != 8 && k.bit_width != 16 && k.bit_width != 32 &&
      k.bit_width != 64) {
    throw FrameCorrupt("comparison key has a bad ring width");
  }
  const int eb = k.bit_width / 8;
  k.mask_share = r.uint(eb);
  k.root_seed = r.block();
  k.levels.resize(k.bit_width - 1);
  for (CorrectionWord& cw : k.levels) {
    cw.seed = r.block();
    cw.value = r.uint(eb);
    const uint8_t flags = r.u8();
    if (flags > 3) throw FrameCorrupt("comparison key has bad control flags");
    cw.t_left = flags & 1;
    cw.t_right = flags & 2;
  }
  k.output_correction = r.uint(eb);
  k.msb_share = r.uint(eb);
  return k;
}

size_t ComparisonKey::serialized_size(int bit_width) {
  const size_t eb = bit_width / 8;
  return 2 + eb + 16 + (bit_width - 1) * (16 + eb + 1) + 2 * eb;
}

size_t comparison_key_bits(const FixedConfig& cfg) {
  const size_t n = cfg.bit_width, lambda = cfg.lambda;
  return (n - 1) * (lambda + n + 2) + lambda + 3 * n;
}

std::vector<ComparisonKeyPair> keygen_comparison_batch(const FixedConfig& cfg,
                                                       size_t count, Prg& rng) {
  std::vector<uint64_t> alphas(count);
  for (auto& a : alphas) a = rng.next_bits(cfg.bit_width);
  return keygen_comparison_batch(cfg, alphas, rng);
}

std::vector<ComparisonKeyPair> keygen_comparison_batch(
    const FixedConfig& cfg, std::span<const uint64_t> alphas, Prg& rng) {
  cfg.validate();
  const size_t count = alphas.size();
  const int n = cfg.bit_width;
  const int depth = n - 1;
  const uint64_t mask = cfg.mask();
  auto neg = [mask](uint64_t v) { return (uint64_t{0} - v) & mask; };

  std::vector<ComparisonKeyPair> out(count);
  // Seeds of both parties interleaved: [2j] party 0, [2j + 1] party 1.
  std::vector<Block> seeds(2 * count);
  std::vector<uint8_t> t(2 * count);
  std::vector<uint64_t> acc(count, 0);  // V_alpha
  std::vector<uint64_t> beta(count);

  for (size_t j = 0; j < count; ++j) {
    ComparisonKeyPair& kp = out[j];
    kp.alpha = RingElement(alphas[j], n);
    const uint64_t top = kp.alpha.value() >> (n - 1);
    beta[j] = top ? mask : 1;  // (-1)^top
    for (int b = 0; b < 2; ++b) {
      ComparisonKey& k = b == 0 ? kp.k0 : kp.k1;
      k.party = b;
      k.bit_width = n;
      k.root_seed = rng.next_block();
      k.levels.resize(depth);
      seeds[2 * j + b] = k.root_seed;
      t[2 * j + b] = static_cast<uint8_t>(b);
    }
    const uint64_t r = rng.next_bits(n);
    kp.k0.mask_share = r;
    kp.k1.mask_share = (kp.alpha.value() - r) & mask;
    const uint64_t m0 = rng.next_bits(n);
    kp.k0.msb_share = m0;
    kp.k1.msb_share = (top - m0) & mask;
  }

  std::vector<Node> nodes;
  for (int level = 0; level < depth; ++level) {
    expand(seeds, n, nodes);
    const int shift = depth - 1 - level;
    for (size_t j = 0; j < count; ++j) {
      const Node& e0 = nodes[2 * j];
      const Node& e1 = nodes[2 * j + 1];
      const int bit = (out[j].alpha.value() >> shift) & 1;
      const int keep = bit, lose = 1 - bit;
      const bool t1 = t[2 * j + 1];
      auto signed_by_t1 = [&](uint64_t v) { return t1 ? neg(v) : v & mask; };

      CorrectionWord cw;
      cw.seed = xor_blocks(e0.s[lose], e1.s[lose]);
      uint64_t vcw = signed_by_t1(e1.v[lose] - e0.v[lose] - acc[j]);
      // Leaving the path to the left means x' < alpha' from here on.
      if (lose == 0) vcw = (vcw + signed_by_t1(beta[j])) & mask;
      cw.value = vcw;
      acc[j] = (acc[j] - e1.v[keep] + e0.v[keep] + signed_by_t1(vcw)) & mask;
      cw.t_left = e0.t[0] ^ e1.t[0] ^ bit ^ 1;
      cw.t_right = e0.t[1] ^ e1.t[1] ^ bit;
      const bool t_keep_cw = keep == 0 ? cw.t_left : cw.t_right;
      for (int b = 0; b < 2; ++b) {
        const Node& e = b == 0 ? e0 : e1;
        const bool tb = t[2 * j + b];
        seeds[2 * j + b] = tb ? xor_blocks(e.s[keep], cw.seed) : e.s[keep];
        t[2 * j + b] = e.t[keep] ^ (tb && t_keep_cw);
      }
      out[j].k0.levels[level] = cw;
      out[j].k1.levels[level] = cw;
    }
  }

  std::vector<uint64_t> leaves;
  convert(seeds, n, leaves);
  for (size_t j = 0; j < count; ++j) {
    uint64_t ocw = (leaves[2 * j + 1] - leaves[2 * j] - acc[j]) & mask;
    if (t[2 * j + 1]) ocw = neg(ocw);
    out[j].k0.output_correction = ocw;
    out[j].k1.output_correction = ocw;
  }
  return out;
}

ComparisonKeyPair keygen_comparison(const FixedConfig& cfg, Prg& rng) {
  return std::move(keygen_comparison_batch(cfg, 1, rng).front());
}

ComparisonKeyPair keygen_comparison(const FixedConfig& cfg, RingElement alpha,
                                    Prg& rng) {
  if (alpha.bit_width() != cfg.bit_width) {
    throw ConfigMismatch("mask width does not match the config");
  }
  const uint64_t a = alpha.value();
  return std::move(keygen_comparison_batch(cfg, std::span(&a, 1), rng).front());
}

std::vector<uint64_t> eval_comparison_batch(int party,
                                            std::span<const ComparisonKey> keys,
                                            std::span<const uint64_t> x_pub) {
  check_party(party);
  if (keys.size() != x_pub.size()) {
    throw ShapeMismatch("eval needs one public input per key");
  }
  std::vector<uint64_t> out(keys.size());
  if (keys.empty()) return out;
  const int n = keys.front().bit_width;
  const int depth = n - 1;
  const uint64_t mask = n == 64 ? ~uint64_t{0} : (uint64_t{1} << n) - 1;
  for (const ComparisonKey& k : keys) {
    if (k.party != party) throw PartyMismatch("key belongs to the other server");
    if (k.bit_width != n || k.levels.size() != static_cast<size_t>(depth)) {
      throw ConfigMismatch("keys in one batch must share a ring width");
    }
  }

  std::vector<Block> seeds(keys.size());
  std::vector<uint8_t> t(keys.size(), static_cast<uint8_t>(party));
  std::vector<uint64_t> acc(keys.size(), 0);
  for (size_t j = 0; j < keys.size(); ++j) seeds[j] = keys[j].root_seed;

  std::vector<Node> nodes;
  for (int level = 0; level < depth; ++level) {
    expand(seeds, n, nodes);
    const int shift = depth - 1 - level;
    for (size_t j = 0; j < keys.size(); ++j) {
      Node& e = nodes[j];
      const CorrectionWord& cw = keys[j].levels[level];
      if (t[j]) {
        e.s[0] = xor_blocks(e.s[0], cw.seed);
        e.s[1] = xor_blocks(e.s[1], cw.seed);
        e.t[0] ^= cw.t_left;
        e.t[1] ^= cw.t_right;
      }
      const int dir = (x_pub[j] >> shift) & 1;
      acc[j] += e.v[dir] + (t[j] ? cw.value : 0);
      seeds[j] = e.s[dir];
      t[j] = e.t[dir];
    }
  }

  std::vector<uint64_t> leaves;
  convert(seeds, n, leaves);
  for (size_t j = 0; j < keys.size(); ++j) {
    const ComparisonKey& k = keys[j];
    uint64_t c = acc[j] + leaves[j] + (t[j] ? k.output_correction : 0);
    if (party == 1) c = uint64_t{0} - c;
    // Shares of u XOR (m XOR [x' < alpha']) with u = 1 - msb(x_pub).
    const uint64_t u = 1 ^ ((x_pub[j] & mask) >> (n - 1));
    const uint64_t w = k.msb_share + c;
    const uint64_t f = (party == 0 ? u : 0) + (u ? uint64_t{0} - w : w);
    out[j] = f & mask;
  }
  return out;
}

Share eval_comparison(int party, const ComparisonKey& key, RingElement x_pub) {
  if (x_pub.bit_width() != key.bit_width) {
    throw ConfigMismatch("public input width does not match the key");
  }
  const uint64_t x = x_pub.value();
  return Share{party,
               RingElement(eval_comparison_batch(party, std::span(&key, 1),
                                                 std::span(&x, 1))[0],
                           key.bit_width)};
}

KeyBundle::KeyBundle(int party, std::vector<ComparisonKey> keys)
    : party_(party), keys_(std::move(keys)) {
  check_party(party);
  for (const ComparisonKey& k : keys_) {
    if (k.party != party) throw PartyMismatch("bundle mixes key parties");
  }
}

std::vector<uint64_t> KeyBundle::mask_shares() const {
  std::vector<uint64_t> out(keys_.size());
  for (size_t i = 0; i < keys_.size(); ++i) out[i] = keys_[i].mask_share;
  return out;
}

std::vector<uint64_t> KeyBundle::eval(std::span<const uint64_t> x_pub) {
  if (consumed_) throw KeyExhausted("comparison keys already evaluated");
  if (x_pub.size() != keys_.size()) {
    throw ShapeMismatch("bundle holds " + std::to_string(keys_.size()) +
                        " keys but got " + std::to_string(x_pub.size()) +
                        " inputs");
  }
  consumed_ = true;
  return eval_comparison_batch(party_, keys_, x_pub);
}

void KeyBundle::serialize(ByteWriter& w) const {
  w.put_u32(static_cast<uint32_t>(keys_.size()));
  for (const ComparisonKey& k : keys_) k.serialize(w);
}

KeyBundle KeyBundle::deserialize(ByteReader& r, int party) {
  const size_t count = r.u32();
  std::vector<ComparisonKey> keys;
  keys.reserve(count);
  for (size_t i = 0; i < count; ++i) keys.push_back(ComparisonKey::deserialize(r));
  return KeyBundle(party, std::move(keys));
}

FixedTensor relu_sign_to_select(const FixedTensor& bit, const FixedTensor& x,
                                TripleShare& t, Channel& peer) {
  return secure_mul(bit, x, t, peer);
}

}  // namespace splitfss
