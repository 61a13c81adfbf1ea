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

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "splitfss/errors.h"

namespace splitfss {
namespace {

namespace fs = std::filesystem;

std::vector<uint8_t> be32(uint32_t v) {
  return {uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
}

class IdxFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("splitfss_idx_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::vector<uint8_t>& bytes) {
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    return p.string();
  }

  // n images of 2x3 with pixel value (i * 6 + j) % 256, labels i % 10.
  void write_pair(size_t n, size_t drop_tail = 0) {
    std::vector<uint8_t> img = be32(0x803), lab = be32(0x801);
    for (uint32_t v : {uint32_t(n), 2u, 3u}) {
      auto b = be32(v);
      img.insert(img.end(), b.begin(), b.end());
    }
    auto b = be32(uint32_t(n));
    lab.insert(lab.end(), b.begin(), b.end());
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < 6; ++j) img.push_back(uint8_t((i * 6 + j) % 256));
      lab.push_back(uint8_t(i % 10));
    }
    img.resize(img.size() - drop_tail);
    images_ = write("images", img);
    labels_ = write("labels", lab);
  }

  fs::path dir_;
  std::string images_, labels_;
};

TEST_F(IdxFiles, ReadsPixelsAndLabels) {
  write_pair(5);
  const FixedConfig fc;
  const Dataset d = load_idx(images_, labels_, std::nullopt, fc);
  ASSERT_EQ(d.size(), 5u);
  EXPECT_EQ(d.sample_shape(), (Shape{1, 2, 3}));
  EXPECT_EQ(d.labels, (std::vector<uint8_t>{0, 1, 2, 3, 4}));
  // Pixel 13 is image 2, position 1.
  EXPECT_EQ(d.images[13], encode(13.0 / 255.0, fc).value());
}

TEST_F(IdxFiles, LimitKeepsThePrefix) {
  write_pair(5);
  const Dataset d = load_idx(images_, labels_, 2, FixedConfig());
  EXPECT_EQ(d.labels, (std::vector<uint8_t>{0, 1}));
  EXPECT_EQ(load_idx(images_, labels_, 0, FixedConfig()).size(), 0u);
  EXPECT_EQ(load_idx(images_, labels_, 100, FixedConfig()).size(), 5u);
}

TEST_F(IdxFiles, ZeroFilledHeaderIsBadMagic) {
  write_pair(2);
  const std::string zeros = write("zeros", std::vector<uint8_t>(64));
  EXPECT_THROW(load_idx(zeros, labels_, std::nullopt, FixedConfig()), BadMagic);
  EXPECT_THROW(load_idx(images_, zeros, std::nullopt, FixedConfig()), BadMagic);
  // Image and label files swapped.
  EXPECT_THROW(load_idx(labels_, images_, std::nullopt, FixedConfig()), BadMagic);
}

TEST_F(IdxFiles, ShortPixelDataIsTruncated) {
  write_pair(3, 1);
  EXPECT_THROW(load_idx(images_, labels_, std::nullopt, FixedConfig()), TruncatedFile);
  const std::string tiny = write("tiny", {0, 0, 8});
  EXPECT_THROW(load_idx(tiny, labels_, std::nullopt, FixedConfig()), TruncatedFile);
}

TEST_F(IdxFiles, LabelOutsideTheClassCountIsRejected) {
  write_pair(5);
  EXPECT_THROW(load_idx(images_, labels_, std::nullopt, FixedConfig(), 3), InvalidConfig);
}

TEST(Synthetic, SameSeedSameData) {
  const FixedConfig fc;
  const Dataset a = gen_synthetic(20, {1, 4, 4}, 3, 11, fc);
  const Dataset b = gen_synthetic(20, {1, 4, 4}, 3, 11, fc);
  const Dataset c = gen_synthetic(20, {1, 4, 4}, 3, 12, fc);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.images, c.images);
}

TEST(Synthetic, SingleSample) {
  const Dataset d = gen_synthetic(1, {1, 28, 28}, 10, 1, FixedConfig());
  EXPECT_EQ(d.size(), 1u);
  EXPECT_EQ(d.images.shape(), (Shape{1, 1, 28, 28}));
  EXPECT_EQ(d.labels[0], 0);
}

TEST(Synthetic, TwoClassesAreLinearlySeparable) {
  // Probe: project onto the difference of the class means and split at the
  // midpoint.
  const size_t n = 400, dim = 64;
  const Dataset d = gen_synthetic(n, {1, 8, 8}, 2, 5, FixedConfig());
  const std::vector<double> x = d.images.decode();
  std::vector<double> mean[2] = {std::vector<double>(dim), std::vector<double>(dim)};
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < dim; ++j) mean[d.labels[i]][j] += x[i * dim + j] / (n / 2);
  }
  double threshold = 0;
  std::vector<double> w(dim);
  for (size_t j = 0; j < dim; ++j) {
    w[j] = mean[1][j] - mean[0][j];
    threshold += w[j] * (mean[1][j] + mean[0][j]) / 2;
  }
  size_t correct = 0;
  for (size_t i = 0; i < n; ++i) {
    double s = 0;
    for (size_t j = 0; j < dim; ++j) s += w[j] * x[i * dim + j];
    correct += (s > threshold) == (d.labels[i] == 1);
  }
  EXPECT_EQ(correct, n);
}

TEST(Synthetic, TargetsAreOneHot) {
  const FixedConfig fc;
  const Dataset d = gen_synthetic(6, {1, 2, 2}, 3, 1, fc);
  const std::vector<size_t> rows = {4, 0};
  const FixedTensor t = d.batch_targets(rows);
  ASSERT_EQ(t.shape(), (Shape{2, 3}));
  const std::vector<double> v = t.decode();
  EXPECT_EQ(v, (std::vector<double>{0, 1, 0, 1, 0, 0}));
  EXPECT_EQ(d.batch_images(rows).shape(), (Shape{2, 1, 2, 2}));
}

}  // namespace
}  // namespace splitfss
