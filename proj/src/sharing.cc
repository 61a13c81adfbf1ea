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

#include <string>

#include "splitfss/errors.h"

namespace splitfss {
namespace {

void check_party(int party) {
  if (party != 0 && party != 1) {
    throw PartyMismatch("party id must be 0 or 1, got " + std::to_string(party));
  }
}

void check_pair(int p0, int p1) {
  if (p0 != 0 || p1 != 1) {
    throw PartyMismatch("reconstruction needs one share from party 0 and one "
                        "from party 1, got " +
                        std::to_string(p0) + " and " + std::to_string(p1));
  }
}

void check_same_party(int a, int b) {
  if (a != b) {
    throw PartyMismatch("cannot combine shares held by different parties");
  }
}

}  // namespace

std::pair<Share, Share> split(RingElement x, Prg& rng) {
  const RingElement r(rng.next_bits(x.bit_width()), x.bit_width());
  return {Share{0, r}, Share{1, ring_sub(x, r)}};
}

RingElement reconstruct(const Share& s0, const Share& s1) {
  check_pair(s0.party, s1.party);
  return ring_add(s0.value, s1.value);
}

Share share_add(const Share& a, const Share& b) {
  check_same_party(a.party, b.party);
  return {a.party, ring_add(a.value, b.value)};
}

Share share_add_public(const Share& a, RingElement c) {
  check_party(a.party);
  return {a.party, a.party == 0 ? ring_add(a.value, c) : a.value};
}

Share share_mul_public(const Share& a, RingElement c) {
  check_party(a.party);
  return {a.party, ring_mul(a.value, c)};
}

std::pair<TensorShare, TensorShare> split(const FixedTensor& x, Prg& rng) {
  FixedTensor s0(x.shape(), x.config());
  const int n = x.config().bit_width;
  for (size_t i = 0; i < s0.size(); ++i) s0[i] = rng.next_bits(n);
  FixedTensor s1 = tensor_sub(x, s0);
  return {TensorShare{0, std::move(s0)}, TensorShare{1, std::move(s1)}};
}

FixedTensor reconstruct(const TensorShare& s0, const TensorShare& s1) {
  check_pair(s0.party, s1.party);
  return tensor_add(s0.value, s1.value);
}

FixedTensor reconstruct(const FixedTensor& s0, const FixedTensor& s1) {
  return tensor_add(s0, s1);
}

TensorShare share_add(const TensorShare& a, const TensorShare& b) {
  check_same_party(a.party, b.party);
  return {a.party, tensor_add(a.value, b.value)};
}

TensorShare share_add_public(const TensorShare& a, const FixedTensor& c) {
  check_party(a.party);
  if (a.party == 0) return {0, tensor_add(a.value, c)};
  check_same_shape(a.value, c, "add_public");
  return a;
}

TensorShare share_mul_public(const TensorShare& a, RingElement c) {
  check_party(a.party);
  if (c.bit_width() != a.value.config().bit_width) {
    throw ConfigMismatch("public factor width does not match the share");
  }
  return {a.party, tensor_scale(a.value, c.value())};
}

FixedTensor public_as_share(int party, const FixedTensor& c) {
  check_party(party);
  return party == 0 ? c : FixedTensor(c.shape(), c.config());
}

uint64_t truncate_share_raw(int party, uint64_t v, const FixedConfig& cfg) {
  const int n = cfg.bit_width, f = cfg.frac_bits;
  // Logical shifts on the n-bit unsigned representation: party 0 computes
  // v >> f, party 1 computes -((-v) >> f).
  if (party == 0) return wrap_bits(v, n) >> f;
  const uint64_t neg = wrap_bits(uint64_t{0} - v, n);
  return wrap_bits(uint64_t{0} - (neg >> f), n);
}

FixedTensor truncate_share(int party, const FixedTensor& share) {
  check_party(party);
  FixedTensor out(share.shape(), share.config());
  const FixedConfig& cfg = share.config();
  for (size_t i = 0; i < share.size(); ++i) {
    out[i] = truncate_share_raw(party, share[i], cfg);
  }
  return out;
}

}  // namespace splitfss
