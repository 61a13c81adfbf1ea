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

// Fixed-point arithmetic over the ring Z_{2^n}.
//
// Reals are encoded as round(x * 2^f) mod 2^n with round-half-away-from-zero,
// and values >= 2^{n-1} are read back as negatives (two's complement). Ring
// widths 8, 16, 32 and 64 are supported; the small widths exist so that the
// secure primitives can be checked exhaustively.

#ifndef SPLITFSS_RING_H_
#define SPLITFSS_RING_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace splitfss {

struct FixedConfig {
  int bit_width = 64;
  int frac_bits = 13;
  int lambda = 128;

  // Throws InvalidConfig unless bit_width is 8/16/32/64,
  // 0 < frac_bits < bit_width - 2 and lambda == 128.
  void validate() const;

  uint64_t mask() const {
    return bit_width == 64 ? ~uint64_t{0} : (uint64_t{1} << bit_width) - 1;
  }
  int element_bytes() const { return bit_width / 8; }
  // Stable 64-bit digest used by the session handshake.
  uint64_t fingerprint() const;

  bool operator==(const FixedConfig&) const = default;
};

inline uint64_t wrap_bits(uint64_t v, int bits) {
  return bits == 64 ? v : v & ((uint64_t{1} << bits) - 1);
}

inline int64_t to_signed(uint64_t v, int bits) {
  if (bits == 64) return static_cast<int64_t>(v);
  const uint64_t half = uint64_t{1} << (bits - 1);
  v = wrap_bits(v, bits);
  return v >= half ? static_cast<int64_t>(v) - (int64_t{1} << bits)
                   : static_cast<int64_t>(v);
}

inline uint64_t from_signed(int64_t v, int bits) {
  return wrap_bits(static_cast<uint64_t>(v), bits);
}

// Arithmetic right shift of the signed interpretation.
inline uint64_t trunc_raw(uint64_t v, int frac_bits, int bits) {
  return from_signed(to_signed(v, bits) >> frac_bits, bits);
}

// Round-to-nearest rescale: adds half an ulp before the arithmetic shift.
// Unlike trunc_raw it has no systematic bias, which matters when many small
// rescaled values are summed (weight gradients).
inline uint64_t rescale_raw(uint64_t v, int frac_bits, int bits) {
  return trunc_raw(v + (uint64_t{1} << (frac_bits - 1)), frac_bits, bits);
}

class RingElement {
 public:
  RingElement() = default;
  RingElement(uint64_t value, int bit_width)
      : value_(wrap_bits(value, bit_width)), bit_width_(bit_width) {}
  RingElement(uint64_t value, const FixedConfig& cfg)
      : RingElement(value, cfg.bit_width) {}

  uint64_t value() const { return value_; }
  int bit_width() const { return bit_width_; }
  int64_t as_signed() const { return to_signed(value_, bit_width_); }

  bool operator==(const RingElement&) const = default;

 private:
  uint64_t value_ = 0;
  int bit_width_ = 64;
};

RingElement encode(double x, const FixedConfig& cfg);
double decode(RingElement r, const FixedConfig& cfg);

// Exact modular arithmetic. Mixing ring widths throws ConfigMismatch.
RingElement ring_add(RingElement a, RingElement b);
RingElement ring_sub(RingElement a, RingElement b);
RingElement ring_mul(RingElement a, RingElement b);
RingElement ring_neg(RingElement a);

// Rescales the ring product of two encoded values back to f fractional bits.
RingElement trunc(RingElement r, const FixedConfig& cfg);

using Shape = std::vector<size_t>;

size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Row-major tensor of ring elements. Invariant: shape_size(shape) == size().
class FixedTensor {
 public:
  FixedTensor() = default;
  FixedTensor(Shape shape, const FixedConfig& cfg);
  FixedTensor(Shape shape, std::vector<uint64_t> data, const FixedConfig& cfg);

  static FixedTensor encode(std::span<const double> values, Shape shape,
                            const FixedConfig& cfg);
  static FixedTensor scalar(RingElement r, const FixedConfig& cfg);
  std::vector<double> decode() const;

  const Shape& shape() const { return shape_; }
  size_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }
  const FixedConfig& config() const { return cfg_; }

  std::span<uint64_t> data() { return data_; }
  std::span<const uint64_t> data() const { return data_; }
  std::vector<uint64_t>& raw() { return data_; }
  const std::vector<uint64_t>& raw() const { return data_; }

  uint64_t& operator[](size_t i) { return data_[i]; }
  uint64_t operator[](size_t i) const { return data_[i]; }
  RingElement at(size_t i) const { return {data_.at(i), cfg_.bit_width}; }
  int64_t signed_at(size_t i) const { return to_signed(data_[i], cfg_.bit_width); }
  void set_signed(size_t i, int64_t v) { data_[i] = from_signed(v, cfg_.bit_width); }

  FixedTensor reshaped(Shape shape) const;
  // Rows [begin, end) along the leading dimension.
  FixedTensor slice_rows(size_t begin, size_t end) const;

  bool operator==(const FixedTensor&) const = default;

 private:
  Shape shape_;
  std::vector<uint64_t> data_;
  FixedConfig cfg_;
};

// Elementwise exact ring ops. Shapes and configs must match.
FixedTensor tensor_add(const FixedTensor& a, const FixedTensor& b);
FixedTensor tensor_sub(const FixedTensor& a, const FixedTensor& b);
FixedTensor tensor_neg(const FixedTensor& a);
FixedTensor tensor_hadamard(const FixedTensor& a, const FixedTensor& b);
FixedTensor tensor_scale(const FixedTensor& a, uint64_t c);
// Adds a [p] row vector to every row of an [m x p] matrix.
FixedTensor tensor_add_row(const FixedTensor& m, const FixedTensor& row);
// Sums an [m x p] matrix over its rows into a [p] vector.
FixedTensor tensor_sum_rows(const FixedTensor& m);
// Exact ring product of [m x k] and [k x p].
FixedTensor tensor_matmul(const FixedTensor& a, const FixedTensor& b);
FixedTensor tensor_transpose(const FixedTensor& a);
// Plaintext truncation (arithmetic shift) of every element.
FixedTensor tensor_trunc(const FixedTensor& a);
// Elementwise rescale_raw; used by the plaintext layers.
FixedTensor tensor_rescale(const FixedTensor& a);

void check_same_config(const FixedTensor& a, const FixedTensor& b);
void check_same_shape(const FixedTensor& a, const FixedTensor& b,
                      const char* what);

}  // namespace splitfss

#endif  // SPLITFSS_RING_H_
