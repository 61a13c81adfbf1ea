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

// Labelled image sets: IDX files (MNIST, Fashion-MNIST) and synthetic blobs.
// Pixels are scaled to [0, 1] and encoded once at load time.

#ifndef SPLITFSS_DATASET_H_
#define SPLITFSS_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitfss/ring.h"

namespace splitfss {

struct Dataset {
  FixedTensor images;           // [N, C, H, W]
  std::vector<uint8_t> labels;  // class index per image
  size_t classes = 0;

  size_t size() const { return labels.size(); }
  Shape sample_shape() const;
  FixedTensor batch_images(std::span<const size_t> rows) const;
  // Targets for the MSE loss: 1.0 at the label, 0 elsewhere. [rows, classes]
  FixedTensor batch_targets(std::span<const size_t> rows) const;
};

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// `limit` keeps the first `limit` examples; nullopt keeps all of them.
// Throws BadMagic, TruncatedFile, or ShapeMismatch when the counts differ.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<size_t> limit, const FixedConfig& cfg,
                 size_t classes = 10);

// n images of `shape` ([C, H, W]) drawn around one random centre per class;
// centres are constant on the cells of a 4x4 grid in each channel.
// Labels cycle through the classes.
Dataset gen_synthetic(size_t n, const Shape& shape, size_t classes,
                      uint64_t seed, const FixedConfig& cfg);

}  // namespace splitfss

#endif  // SPLITFSS_DATASET_H_
