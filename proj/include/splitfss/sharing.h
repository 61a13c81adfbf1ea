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

// Two-party additive secret sharing over Z_{2^n}.
//
// A secret x is held as (x0, x1) with x0 uniform and x0 + x1 == x. Linear
// operations are local; public constants are added by party 0 only.

#ifndef SPLITFSS_SHARING_H_
#define SPLITFSS_SHARING_H_

#include <utility>

#include "splitfss/prg.h"
#include "splitfss/ring.h"

namespace splitfss {

struct Share {
  int party = 0;
  RingElement value;
};

struct TensorShare {
  int party = 0;
  FixedTensor value;
};

std::pair<Share, Share> split(RingElement x, Prg& rng);
RingElement reconstruct(const Share& s0, const Share& s1);

Share share_add(const Share& a, const Share& b);
Share share_add_public(const Share& a, RingElement c);
Share share_mul_public(const Share& a, RingElement c);

std::pair<TensorShare, TensorShare> split(const FixedTensor& x, Prg& rng);
FixedTensor reconstruct(const TensorShare& s0, const TensorShare& s1);
// Raw form used inside protocols where the party id travels separately.
FixedTensor reconstruct(const FixedTensor& s0, const FixedTensor& s1);

TensorShare share_add(const TensorShare& a, const TensorShare& b);
TensorShare share_add_public(const TensorShare& a, const FixedTensor& c);
TensorShare share_mul_public(const TensorShare& a, RingElement c);

// Party 0 keeps c; party 1 contributes zero. Lets a public tensor enter a
// linear computation on shares.
FixedTensor public_as_share(int party, const FixedTensor& c);

// Local truncation of one party's share of a product of two encoded values.
// Party 0 shifts its share; party 1 shifts the negation and negates back.
// The reconstructed result is within one ulp of the exact truncation unless
// the secret's magnitude is close to 2^{n-1}.
uint64_t truncate_share_raw(int party, uint64_t v, const FixedConfig& cfg);
FixedTensor truncate_share(int party, const FixedTensor& share);

}  // namespace splitfss

#endif  // SPLITFSS_SHARING_H_
