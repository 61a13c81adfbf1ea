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

// Dealer-issued multiplication triples and the Beaver multiplication
// protocol run between the two servers.
//
// Elementwise: given shares of x, y and a triple (a, b, c = a*b), each party
// opens d = x - a and e = y - b, then computes
//   z_b = c_b + d*b_b + e*a_b (+ d*e for party 0)
// Matrix form is the same with matrix products. Results are exact ring
// products; fixed-point callers truncate afterwards.

#ifndef SPLITFSS_BEAVER_H_
#define SPLITFSS_BEAVER_H_

#include <cstddef>
#include <utility>
#include <vector>

#include "splitfss/codec.h"
#include "splitfss/prg.h"
#include "splitfss/ring.h"
#include "splitfss/transport.h"

namespace splitfss {

// One party's share of an elementwise triple. Single use.
class TripleShare {
 public:
  TripleShare() = default;
  TripleShare(int party, FixedTensor a, FixedTensor b, FixedTensor c);

  int party() const { return party_; }
  const Shape& shape() const { return a_.shape(); }
  const FixedTensor& a() const { return a_; }
  const FixedTensor& b() const { return b_; }
  const FixedTensor& c() const { return c_; }

  bool consumed() const { return consumed_; }
  // Marks the triple used; throws TripleExhausted on a second call.
  void consume();

  void serialize(ByteWriter& w) const;
  static TripleShare deserialize(ByteReader& r, int party, const FixedConfig& cfg);

 private:
  int party_ = 0;
  FixedTensor a_, b_, c_;
  bool consumed_ = false;
};

// One party's share of A [m x k], B [k x p], C = A*B. Single use.
class MatTripleShare {
 public:
  MatTripleShare() = default;
  MatTripleShare(int party, FixedTensor a, FixedTensor b, FixedTensor c);

  int party() const { return party_; }
  size_t m() const { return a_.dim(0); }
  size_t k() const { return a_.dim(1); }
  size_t p() const { return b_.dim(1); }
  const FixedTensor& a() const { return a_; }
  const FixedTensor& b() const { return b_; }
  const FixedTensor& c() const { return c_; }

  bool consumed() const { return consumed_; }
  void consume();

  void serialize(ByteWriter& w) const;
  static MatTripleShare deserialize(ByteReader& r, int party,
                                    const FixedConfig& cfg);

 private:
  int party_ = 0;
  FixedTensor a_, b_, c_;
  bool consumed_ = false;
};

std::pair<TripleShare, TripleShare> gen_triple(const Shape& shape,
                                               const FixedConfig& cfg, Prg& rng);
std::pair<MatTripleShare, MatTripleShare> gen_mat_triple(size_t m, size_t k,
                                                         size_t p,
                                                         const FixedConfig& cfg,
                                                         Prg& rng);

// Local halves of the protocol, exposed so the opening step can be tested
// without a channel.
std::pair<FixedTensor, FixedTensor> beaver_open(const FixedTensor& x,
                                                const FixedTensor& y,
                                                const TripleShare& t);
FixedTensor beaver_close(const TripleShare& t, const FixedTensor& d,
                         const FixedTensor& e);
std::pair<FixedTensor, FixedTensor> beaver_open(const FixedTensor& x,
                                                const FixedTensor& w,
                                                const MatTripleShare& t);
FixedTensor beaver_close(const MatTripleShare& t, const FixedTensor& d,
                         const FixedTensor& e);

// Elementwise product of shared x and y. Sends d and e as two messages to
// the other server and waits for the peer's pair. `peer` must connect the
// two servers; party 0 sends first.
FixedTensor secure_mul(const FixedTensor& x, const FixedTensor& y,
                       TripleShare& t, Channel& peer);

// Shared [m x k] times shared [k x p]. One message each way carrying D || E.
FixedTensor secure_matmul(const FixedTensor& x, const FixedTensor& w,
                          MatTripleShare& t, Channel& peer);

// Sends `mine` and returns the peer's tensor of the same size. Party 0 sends
// first so large payloads over TCP cannot deadlock.
std::vector<uint64_t> exchange_ring(int party, std::span<const uint64_t> mine,
                                    int bit_width, PayloadKind kind,
                                    Channel& peer);

}  // namespace splitfss

#endif  // SPLITFSS_BEAVER_H_
