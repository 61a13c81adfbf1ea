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

// Little-endian byte encoding helpers shared by the key, triple and message
// serializers. Ring elements take n/8 bytes each.

#ifndef SPLITFSS_CODEC_H_
#define SPLITFSS_CODEC_H_

#include <cstdint>
#include <span>
#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "splitfss/errors.h"
#include "splitfss/prg.h"
#include "splitfss/ring.h"

namespace splitfss {

class ByteWriter {
 public:
  void put_u8(uint8_t v) { out_.push_back(v); }
  void put_uint(uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void put_u32(uint32_t v) { put_uint(v, 4); }
  void put_u64(uint64_t v) { put_uint(v, 8); }
  void put_block(const Block& b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void put_ring(std::span<const uint64_t> values, int bit_width) {
    out_.reserve(out_.size() + values.size() * (bit_width / 8));
    for (uint64_t v : values) put_uint(v, bit_width / 8);
  }
  // Rank, dims, then the elements. Used where shapes travel with the data.
  void put_tensor(const FixedTensor& t) {
    put_u8(static_cast<uint8_t>(t.rank()));
    for (size_t d : t.shape()) put_u32(static_cast<uint32_t>(d));
    put_ring(t.data(), t.config().bit_width);
  }
  void put_bytes(std::span<const uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  std::vector<uint8_t>& bytes() { return out_; }
  std::vector<uint8_t> take() { return std::move(out_); }

 private:
  std::vector<uint8_t> out_;
};

// Bounds-checked reader; any overrun throws FrameCorrupt.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> in) : in_(in) {}

  uint8_t u8() { return static_cast<uint8_t>(uint(1)); }
  uint64_t uint(int bytes) {
    need(bytes);
    uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | in_[pos_ + i];
    pos_ += bytes;
    return v;
  }
  uint32_t u32() { return static_cast<uint32_t>(uint(4)); }
  uint64_t u64() { return uint(8); }
  Block block() {
    need(16);
    Block b;
    std::copy_n(in_.begin() + pos_, 16, b.begin());
    pos_ += 16;
    return b;
  }
  std::vector<uint64_t> ring(size_t count, int bit_width) {
    need(count * (bit_width / 8));
    std::vector<uint64_t> out(count);
    for (auto& v : out) v = uint(bit_width / 8);
    return out;
  }
  FixedTensor tensor(const FixedConfig& cfg) {
    const size_t rank = u8();
    Shape shape(rank);
    for (auto& d : shape) d = u32();
    return FixedTensor(shape, ring(shape_size(shape), cfg.bit_width), cfg);
  }
  std::span<const uint8_t> bytes(size_t count) {
    need(count);
    auto s = in_.subspan(pos_, count);
    pos_ += count;
    return s;
  }

  size_t remaining() const { return in_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) throw FrameCorrupt("trailing bytes in payload");
  }

 private:
  void need(size_t n) const {
    if (in_.size() - pos_ < n) throw FrameCorrupt("payload shorter than its layout");
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
};

inline std::vector<uint8_t> pack_ring(std::span<const uint64_t> values,
                                      int bit_width) {
  ByteWriter w;
  w.put_ring(values, bit_width);
  return w.take();
}

inline std::vector<uint64_t> unpack_ring(std::span<const uint8_t> bytes,
                                         int bit_width) {
  if (bytes.size() % (bit_width / 8) != 0) {
    throw FrameCorrupt("payload is not a whole number of ring elements");
  }
  ByteReader r(bytes);
  return r.ring(bytes.size() / (bit_width / 8), bit_width);
}

}  // namespace splitfss

#endif  // SPLITFSS_CODEC_H_
