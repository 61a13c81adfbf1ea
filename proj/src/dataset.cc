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

#include "splitfss/dataset.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "splitfss/errors.h"
#include "splitfss/prg.h"

namespace splitfss {
namespace {

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

uint32_t be32(const std::vector<uint8_t>& b, size_t off, const std::string& path) {
  if (b.size() < off + 4) throw TruncatedFile(path + ": header cut short");
  return (uint32_t{b[off]} << 24) | (uint32_t{b[off + 1]} << 16) |
         (uint32_t{b[off + 2]} << 8) | uint32_t{b[off + 3]};
}

}  // namespace

Shape Dataset::sample_shape() const {
  if (images.rank() == 0) return {};
  return Shape(images.shape().begin() + 1, images.shape().end());
}

FixedTensor Dataset::batch_images(std::span<const size_t> rows) const {
  const Shape sample = sample_shape();
  const size_t stride = shape_size(sample);
  Shape shape = {rows.size()};
  shape.insert(shape.end(), sample.begin(), sample.end());
  FixedTensor out(shape, images.config());
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= size()) throw ShapeMismatch("batch row out of range");
    std::copy_n(images.data().begin() + rows[r] * stride, stride,
                out.data().begin() + r * stride);
  }
  return out;
}

FixedTensor Dataset::batch_targets(std::span<const size_t> rows) const {
  const FixedConfig& cfg = images.config();
  const uint64_t one = encode(1.0, cfg).value();
  FixedTensor out({rows.size(), classes}, cfg);
  for (size_t r = 0; r < rows.size(); ++r) {
    out[r * classes + labels.at(rows[r])] = one;
  }
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<size_t> limit, const FixedConfig& cfg,
                 size_t classes) {
  const std::vector<uint8_t> img = read_file(images_path);
  const std::vector<uint8_t> lab = read_file(labels_path);
  if (be32(img, 0, images_path) != kImageMagic) {
    throw BadMagic(images_path + ": not an IDX image file");
  }
  if (be32(lab, 0, labels_path) != kLabelMagic) {
    throw BadMagic(labels_path + ": not an IDX label file");
  }
  const size_t count = be32(img, 4, images_path);
  const size_t rows = be32(img, 8, images_path);
  const size_t cols = be32(img, 12, images_path);
  if (be32(lab, 4, labels_path) != count) {
    throw ShapeMismatch("image and label files hold different counts");
  }
  const size_t n = std::min(count, limit.value_or(count));
  const size_t pixels = rows * cols;
  if (img.size() < 16 + n * pixels) throw TruncatedFile(images_path + ": pixel data cut short");
  if (lab.size() < 8 + n) throw TruncatedFile(labels_path + ": label data cut short");

  Dataset d;
  d.classes = classes;
  d.images = FixedTensor({n, 1, rows, cols}, cfg);
  for (size_t i = 0; i < n * pixels; ++i) {
    d.images[i] = encode(img[16 + i] / 255.0, cfg).value();
  }
  d.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<long>(n));
  for (uint8_t l : d.labels) {
    if (l >= classes) throw InvalidConfig("label " + std::to_string(l) + " out of range");
  }
  return d;
}

Dataset gen_synthetic(size_t n, const Shape& shape, size_t classes,
                      uint64_t seed, const FixedConfig& cfg) {
  if (classes == 0 || classes > 256 || shape.size() != 3) {
    throw InvalidConfig("synthetic data needs 1..256 classes and a [C, H, W] shape");
  }
  const size_t dim = shape_size(shape);
  const size_t C = shape[0], H = shape[1], W = shape[2];
  // Each centre is constant on the cells of a 4x4 grid per channel, so the
  // class structure survives convolution and pooling.
  constexpr size_t kGrid = 4;
  Prg centres = Prg::from_seed(seed, "synthetic/centres");
  std::vector<double> cells(classes * C * kGrid * kGrid);
  for (double& c : cells) c = centres.next_unit();
  std::vector<double> centre(classes * dim);
  for (size_t k = 0; k < classes; ++k) {
    for (size_t ch = 0; ch < C; ++ch) {
      for (size_t y = 0; y < H; ++y) {
        for (size_t x = 0; x < W; ++x) {
          const size_t cell = (y * kGrid / H) * kGrid + x * kGrid / W;
          centre[k * dim + (ch * H + y) * W + x] =
              cells[(k * C + ch) * kGrid * kGrid + cell];
        }
      }
    }
  }

  Prg noise = Prg::from_seed(seed, "synthetic/samples");
  Dataset d;
  d.classes = classes;
  Shape full = {n};
  full.insert(full.end(), shape.begin(), shape.end());
  d.images = FixedTensor(full, cfg);
  d.labels.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t c = i % classes;
    d.labels[i] = static_cast<uint8_t>(c);
    for (size_t j = 0; j < dim; ++j) {
      const double v = centre[c * dim + j] + 0.2 * (noise.next_unit() - 0.5);
      d.images[i * dim + j] = encode(std::clamp(v, 0.0, 1.0), cfg).value();
    }
  }
  return d;
}

}  // namespace splitfss
