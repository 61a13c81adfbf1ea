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

#include "splitfss/beaver.h"

#include <string>

#include "splitfss/errors.h"
#include "splitfss/sharing.h"

namespace splitfss {
namespace {

FixedTensor random_tensor(Shape shape, const FixedConfig& cfg, Prg& rng) {
  FixedTensor t(std::move(shape), cfg);
  for (auto& v : t.raw()) v = rng.next_bits(cfg.bit_width);
  return t;
}

void check_party(int party) {
  if (party != 0 && party != 1) {
    throw PartyMismatch("triple party must be 0 or 1");
  }
}

}  // namespace

TripleShare::TripleShare(int party, FixedTensor a, FixedTensor b, FixedTensor c)
    : party_(party), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  check_party(party);
  check_same_shape(a_, b_, "triple");
  check_same_shape(a_, c_, "triple");
}

void TripleShare::consume() {
  if (consumed_) throw TripleExhausted("beaver triple already used");
  consumed_ = true;
}

void TripleShare::serialize(ByteWriter& w) const {
  w.put_tensor(a_);
  w.put_ring(b_.data(), b_.config().bit_width);
  w.put_ring(c_.data(), c_.config().bit_width);
}

TripleShare TripleShare::deserialize(ByteReader& r, int party,
                                     const FixedConfig& cfg) {
  FixedTensor a = r.tensor(cfg);
  FixedTensor b(a.shape(), r.ring(a.size(), cfg.bit_width), cfg);
  FixedTensor c(a.shape(), r.ring(a.size(), cfg.bit_width), cfg);
  return TripleShare(party, std::move(a), std::move(b), std::move(c));
}

MatTripleShare::MatTripleShare(int party, FixedTensor a, FixedTensor b,
                               FixedTensor c)
    : party_(party), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  check_party(party);
  if (a_.rank() != 2 || b_.rank() != 2 || c_.rank() != 2 ||
      a_.dim(1) != b_.dim(0) || c_.dim(0) != a_.dim(0) ||
      c_.dim(1) != b_.dim(1)) {
    throw ShapeMismatch("matrix triple shapes " + shape_string(a_.shape()) +
                        " " + shape_string(b_.shape()) + " " +
                        shape_string(c_.shape()) + " are inconsistent");
  }
}

void MatTripleShare::consume() {
  if (consumed_) throw TripleExhausted("matrix triple already used");
  consumed_ = true;
}

void MatTripleShare::serialize(ByteWriter& w) const {
  w.put_u32(static_cast<uint32_t>(m()));
  w.put_u32(static_cast<uint32_t>(k()));
  w.put_u32(static_cast<uint32_t>(p()));
  const int n = a_.config().bit_width;
  w.put_ring(a_.data(), n);
  w.put_ring(b_.data(), n);
  w.put_ring(c_.data(), n);
}

MatTripleShare MatTripleShare::deserialize(ByteReader& r, int party,
                                           const FixedConfig& cfg) {
  const size_t m = r.u32(), k = r.u32(), p = r.u32();
  const int n = cfg.bit_width;
  FixedTensor a({m, k}, r.ring(m * k, n), cfg);
  FixedTensor b({k, p}, r.ring(k * p, n), cfg);
  FixedTensor c({m, p}, r.ring(m * p, n), cfg);
  return MatTripleShare(party, std::move(a), std::move(b), std::move(c));
}

std::pair<TripleShare, TripleShare> gen_triple(const Shape& shape,
                                               const FixedConfig& cfg,
                                               Prg& rng) {
  const FixedTensor a = random_tensor(shape, cfg, rng);
  const FixedTensor b = random_tensor(shape, cfg, rng);
  const FixedTensor c = tensor_hadamard(a, b);
  auto [a0, a1] = split(a, rng);
  auto [b0, b1] = split(b, rng);
  auto [c0, c1] = split(c, rng);
  return {TripleShare(0, a0.value, b0.value, c0.value),
          TripleShare(1, a1.value, b1.value, c1.value)};
}

std::pair<MatTripleShare, MatTripleShare> gen_mat_triple(size_t m, size_t k,
                                                         size_t p,
                                                         const FixedConfig& cfg,
                                                         Prg& rng) {
  const FixedTensor a = random_tensor({m, k}, cfg, rng);
  const FixedTensor b = random_tensor({k, p}, cfg, rng);
  const FixedTensor c = tensor_matmul(a, b);
  auto [a0, a1] = split(a, rng);
  auto [b0, b1] = split(b, rng);
  auto [c0, c1] = split(c, rng);
  return {MatTripleShare(0, a0.value, b0.value, c0.value),
          MatTripleShare(1, a1.value, b1.value, c1.value)};
}

std::pair<FixedTensor, FixedTensor> beaver_open(const FixedTensor& x,
                                                const FixedTensor& y,
                                                const TripleShare& t) {
  check_same_shape(x, t.a(), "secure_mul");
  check_same_shape(y, t.b(), "secure_mul");
  return {tensor_sub(x, t.a()), tensor_sub(y, t.b())};
}

FixedTensor beaver_close(const TripleShare& t, const FixedTensor& d,
                         const FixedTensor& e) {
  FixedTensor z = tensor_add(t.c(), tensor_hadamard(d, t.b()));
  z = tensor_add(z, tensor_hadamard(e, t.a()));
  if (t.party() == 0) z = tensor_add(z, tensor_hadamard(d, e));
  return z;
}

std::pair<FixedTensor, FixedTensor> beaver_open(const FixedTensor& x,
                                                const FixedTensor& w,
                                                const MatTripleShare& t) {
  check_same_shape(x, t.a(), "secure_matmul lhs");
  check_same_shape(w, t.b(), "secure_matmul rhs");
  return {tensor_sub(x, t.a()), tensor_sub(w, t.b())};
}

FixedTensor beaver_close(const MatTripleShare& t, const FixedTensor& d,
                         const FixedTensor& e) {
  // XW = (D + A)(E + B) = DE + DB + AE + C.
  FixedTensor z = tensor_add(t.c(), tensor_matmul(d, t.b()));
  z = tensor_add(z, tensor_matmul(t.a(), e));
  if (t.party() == 0) z = tensor_add(z, tensor_matmul(d, e));
  return z;
}

std::vector<uint64_t> exchange_ring(int party, std::span<const uint64_t> mine,
                                    int bit_width, PayloadKind kind,
                                    Channel& peer) {
  auto receive = [&] {
    std::vector<uint64_t> theirs =
        unpack_ring(peer.recv(kind).payload, bit_width);
    if (theirs.size() != mine.size()) {
      throw ProtocolError("peer opened " + std::to_string(theirs.size()) +
                          " elements, expected " + std::to_string(mine.size()));
    }
    return theirs;
  };
  if (party == 0) {
    peer.send(kind, pack_ring(mine, bit_width));
    return receive();
  }
  std::vector<uint64_t> theirs = receive();
  peer.send(kind, pack_ring(mine, bit_width));
  return theirs;
}

FixedTensor secure_mul(const FixedTensor& x, const FixedTensor& y,
                       TripleShare& t, Channel& peer) {
  auto [d, e] = beaver_open(x, y, t);
  t.consume();
  const int n = x.config().bit_width;
  const FixedTensor d_peer(
      d.shape(), exchange_ring(t.party(), d.data(), n, PayloadKind::kOpening, peer),
      d.config());
  const FixedTensor e_peer(
      e.shape(), exchange_ring(t.party(), e.data(), n, PayloadKind::kOpening, peer),
      e.config());
  return beaver_close(t, tensor_add(d, d_peer), tensor_add(e, e_peer));
}

FixedTensor secure_matmul(const FixedTensor& x, const FixedTensor& w,
                          MatTripleShare& t, Channel& peer) {
  auto [d, e] = beaver_open(x, w, t);
  t.consume();
  std::vector<uint64_t> mine(d.raw());
  mine.insert(mine.end(), e.raw().begin(), e.raw().end());
  const std::vector<uint64_t> theirs = exchange_ring(
      t.party(), mine, x.config().bit_width, PayloadKind::kOpening, peer);
  const FixedTensor d_peer(
      d.shape(), std::vector<uint64_t>(theirs.begin(), theirs.begin() + d.size()),
      d.config());
  const FixedTensor e_peer(
      e.shape(), std::vector<uint64_t>(theirs.begin() + d.size(), theirs.end()),
      e.config());
  return beaver_close(t, tensor_add(d, d_peer), tensor_add(e, e_peer));
}

}  // namespace splitfss
