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

#include "splitfss/ring.h"

#include <cmath>
#include <sstream>
#include <utility>

#include "splitfss/errors.h"

namespace splitfss {

void FixedConfig::validate() const {
  if (bit_width != 8 && bit_width != 16 && bit_width != 32 && bit_width != 64) {
    throw InvalidConfig("ring bit width must be 8, 16, 32 or 64, got " +
                        std::to_string(bit_width));
  }
  if (frac_bits <= 0 || frac_bits >= bit_width - 2) {
    throw InvalidConfig("fractional bits must satisfy 0 < f < n - 2, got f=" +
                        std::to_string(frac_bits) +
                        " n=" + std::to_string(bit_width));
  }
  if (lambda != 128) {
    throw InvalidConfig("only lambda = 128 is supported");
  }
}

uint64_t FixedConfig::fingerprint() const {
  // FNV-1a over the three parameters.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (int v : {bit_width, frac_bits, lambda}) {
    for (int i = 0; i < 4; ++i) {
      h ^= static_cast<uint8_t>(static_cast<uint32_t>(v) >> (8 * i));
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

RingElement encode(double x, const FixedConfig& cfg) {
  const double limit = std::ldexp(1.0, cfg.bit_width - cfg.frac_bits - 1);
  if (!(std::fabs(x) < limit)) {
    std::ostringstream msg;
    msg << "value " << x << " is outside the representable range (-" << limit
        << ", " << limit << ")";
    throw OverflowError(msg.str());
  }
  // llround rounds halfway cases away from zero.
  const long long scaled = std::llround(std::ldexp(x, cfg.frac_bits));
  return {from_signed(scaled, cfg.bit_width), cfg.bit_width};
}

double decode(RingElement r, const FixedConfig& cfg) {
  return std::ldexp(static_cast<double>(to_signed(r.value(), cfg.bit_width)),
                    -cfg.frac_bits);
}

namespace {

int common_width(RingElement a, RingElement b) {
  if (a.bit_width() != b.bit_width()) {
    throw ConfigMismatch("ring widths differ: " +
                         std::to_string(a.bit_width()) + " vs " +
                         std::to_string(b.bit_width()));
  }
  return a.bit_width();
}

}  // namespace

RingElement ring_add(RingElement a, RingElement b) {
  return {a.value() + b.value(), common_width(a, b)};
}

RingElement ring_sub(RingElement a, RingElement b) {
  return {a.value() - b.value(), common_width(a, b)};
}

RingElement ring_mul(RingElement a, RingElement b) {
  return {a.value() * b.value(), common_width(a, b)};
}

RingElement ring_neg(RingElement a) {
  return {uint64_t{0} - a.value(), a.bit_width()};
}

RingElement trunc(RingElement r, const FixedConfig& cfg) {
  if (r.bit_width() != cfg.bit_width) {
    throw ConfigMismatch("element width does not match config");
  }
  return {trunc_raw(r.value(), cfg.frac_bits, cfg.bit_width), cfg.bit_width};
}

size_t shape_size(const Shape& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

FixedTensor::FixedTensor(Shape shape, const FixedConfig& cfg)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0), cfg_(cfg) {}

FixedTensor::FixedTensor(Shape shape, std::vector<uint64_t> data,
                         const FixedConfig& cfg)
    : shape_(std::move(shape)), data_(std::move(data)), cfg_(cfg) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeMismatch("tensor shape " + shape_string(shape_) + " holds " +
                        std::to_string(shape_size(shape_)) +
                        " elements but data has " +
                        std::to_string(data_.size()));
  }
  const uint64_t m = cfg_.mask();
  for (auto& v : data_) v &= m;
}

FixedTensor FixedTensor::encode(std::span<const double> values, Shape shape,
                                const FixedConfig& cfg) {
  std::vector<uint64_t> data(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    data[i] = splitfss::encode(values[i], cfg).value();
  }
  return FixedTensor(std::move(shape), std::move(data), cfg);
}

FixedTensor FixedTensor::scalar(RingElement r, const FixedConfig& cfg) {
  return FixedTensor({1}, {r.value()}, cfg);
}

std::vector<double> FixedTensor::decode() const {
  std::vector<double> out(data_.size());
  for (size_t i = 0; i < data_.size(); ++i) {
    out[i] = std::ldexp(static_cast<double>(to_signed(data_[i], cfg_.bit_width)),
                        -cfg_.frac_bits);
  }
  return out;
}

FixedTensor FixedTensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeMismatch("cannot reshape " + shape_string(shape_) + " to " +
                        shape_string(shape));
  }
  FixedTensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

FixedTensor FixedTensor::slice_rows(size_t begin, size_t end) const {
  if (shape_.empty() || begin > end || end > shape_[0]) {
    throw ShapeMismatch("row slice out of range for " + shape_string(shape_));
  }
  const size_t row = data_.size() / (shape_[0] ? shape_[0] : 1);
  Shape s = shape_;
  s[0] = end - begin;
  return FixedTensor(
      s,
      std::vector<uint64_t>(data_.begin() + begin * row, data_.begin() + end * row),
      cfg_);
}

void check_same_config(const FixedTensor& a, const FixedTensor& b) {
  if (!(a.config() == b.config())) {
    throw ConfigMismatch("tensors use different fixed-point configs");
  }
}

void check_same_shape(const FixedTensor& a, const FixedTensor& b,
                      const char* what) {
  check_same_config(a, b);
  if (a.shape() != b.shape()) {
    throw ShapeMismatch(std::string(what) + ": " + shape_string(a.shape()) +
                        " vs " + shape_string(b.shape()));
  }
}

namespace {

template <typename Op>
FixedTensor zip(const FixedTensor& a, const FixedTensor& b, const char* what,
                Op op) {
  check_same_shape(a, b, what);
  FixedTensor out(a.shape(), a.config());
  const uint64_t m = a.config().mask();
  for (size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]) & m;
  return out;
}

void check_matrix(const FixedTensor& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeMismatch(std::string(what) + " expects a matrix, got " +
                        shape_string(t.shape()));
  }
}

}  // namespace

FixedTensor tensor_add(const FixedTensor& a, const FixedTensor& b) {
  return zip(a, b, "add", [](uint64_t x, uint64_t y) { return x + y; });
}

FixedTensor tensor_sub(const FixedTensor& a, const FixedTensor& b) {
  return zip(a, b, "sub", [](uint64_t x, uint64_t y) { return x - y; });
}

FixedTensor tensor_hadamard(const FixedTensor& a, const FixedTensor& b) {
  return zip(a, b, "hadamard", [](uint64_t x, uint64_t y) { return x * y; });
}

FixedTensor tensor_neg(const FixedTensor& a) {
  FixedTensor out(a.shape(), a.config());
  const uint64_t m = a.config().mask();
  for (size_t i = 0; i < a.size(); ++i) out[i] = (uint64_t{0} - a[i]) & m;
  return out;
}

FixedTensor tensor_scale(const FixedTensor& a, uint64_t c) {
  FixedTensor out(a.shape(), a.config());
  const uint64_t m = a.config().mask();
  for (size_t i = 0; i < a.size(); ++i) out[i] = (a[i] * c) & m;
  return out;
}

FixedTensor tensor_add_row(const FixedTensor& mat, const FixedTensor& row) {
  check_matrix(mat, "add_row");
  check_same_config(mat, row);
  const size_t rows = mat.dim(0), cols = mat.dim(1);
  if (row.size() != cols) {
    throw ShapeMismatch("row vector " + shape_string(row.shape()) +
                        " does not match matrix " + shape_string(mat.shape()));
  }
  FixedTensor out = mat;
  const uint64_t m = mat.config().mask();
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = (out[r * cols + c] + row[c]) & m;
    }
  }
  return out;
}

FixedTensor tensor_sum_rows(const FixedTensor& mat) {
  check_matrix(mat, "sum_rows");
  const size_t rows = mat.dim(0), cols = mat.dim(1);
  FixedTensor out({cols}, mat.config());
  const uint64_t m = mat.config().mask();
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) out[c] += mat[r * cols + c];
  }
  for (size_t c = 0; c < cols; ++c) out[c] &= m;
  return out;
}

FixedTensor tensor_matmul(const FixedTensor& a, const FixedTensor& b) {
  check_matrix(a, "matmul");
  check_matrix(b, "matmul");
  check_same_config(a, b);
  const size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeMismatch("matmul inner dimensions differ: " +
                        shape_string(a.shape()) + " * " +
                        shape_string(b.shape()));
  }
  FixedTensor out({m, p}, a.config());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (size_t i = 0; i < m; ++i) {
    uint64_t* row = o.data() + i * p;
    for (size_t j = 0; j < k; ++j) {
      const uint64_t aij = x[i * k + j];
      if (aij == 0) continue;
      const uint64_t* brow = y.data() + j * p;
      for (size_t c = 0; c < p; ++c) row[c] += aij * brow[c];
    }
  }
  const uint64_t mask = a.config().mask();
  for (auto& v : o) v &= mask;
  return out;
}

FixedTensor tensor_transpose(const FixedTensor& a) {
  check_matrix(a, "transpose");
  const size_t r = a.dim(0), c = a.dim(1);
  FixedTensor out({c, r}, a.config());
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  }
  return out;
}

FixedTensor tensor_trunc(const FixedTensor& a) {
  FixedTensor out(a.shape(), a.config());
  const int f = a.config().frac_bits, n = a.config().bit_width;
  for (size_t i = 0; i < a.size(); ++i) out[i] = trunc_raw(a[i], f, n);
  return out;
}

FixedTensor tensor_rescale(const FixedTensor& a) {
  FixedTensor out(a.shape(), a.config());
  const int f = a.config().frac_bits, n = a.config().bit_width;
  for (size_t i = 0; i < a.size(); ++i) out[i] = rescale_raw(a[i], f, n);
  return out;
}

}  // namespace splitfss
