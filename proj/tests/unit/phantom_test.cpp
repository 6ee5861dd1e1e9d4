// Copyright 2026 The texbias Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <map>

#include "oracles.hpp"
#include "texbias/dataset.hpp"
#include "texbias/error.hpp"
#include "texbias/io.hpp"
#include "texbias/phantom.hpp"

namespace texbias {
namespace {

namespace fs = std::filesystem;

PhantomSpec small_spec(std::uint64_t seed) {
  PhantomSpec s;
  s.dims = {32, 32, 32};
  s.seed = seed;
  return s;
}

TEST(Phantom, DefaultSpecHasEveryClass) {
  PhantomSpec s;
  s.seed = 3;
  const auto p = generate_phantom(s);
  EXPECT_EQ(p.volume.dims(), (Dims{64, 64, 64}));
  EXPECT_EQ(p.labels.num_classes(), 10);
  EXPECT_TRUE(phantom_is_valid(p.labels));
}

TEST(Phantom, VolumeIsNormalized) {
  const auto p = generate_phantom(small_spec(1));
  EXPECT_NEAR(testing::mean_of(p.volume.data()), 0.0, 1e-9);
  EXPECT_NEAR(testing::population_variance(p.volume.data()), 1.0, 1e-9);
}

TEST(Phantom, DeterministicInSeed) {
  const auto a = generate_phantom(small_spec(5));
  const auto b = generate_phantom(small_spec(5));
  const auto c = generate_phantom(small_spec(6));
  EXPECT_EQ(testing::max_abs_diff(a.volume, b.volume), 0.0);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_GT(testing::max_abs_diff(a.volume, c.volume), 0.0);
}

TEST(Phantom, ClassMeansFollowIntensityTable) {
  PhantomSpec s = small_spec(2);
  s.acquisition_noise_sd = 0.0;
  s.intensity_jitter_sd = 0.0;
  const auto p = generate_phantom(s);
  const auto table = default_intensity_table(10);
  std::map<int, double> value;
  for (std::size_t i = 0; i < p.labels.size(); ++i) value[p.labels[i]] = p.volume[i];
  // Without noise every class is a single normalized level, an increasing affine image of the table.
  for (int a = 0; a < 10; ++a)
    for (int b = 0; b < 10; ++b)
      if (table[std::size_t(a)] < table[std::size_t(b)]) EXPECT_LT(value[a], value[b]) << a << " " << b;
}

TEST(Phantom, SmallestSupportedAxis) {
  EXPECT_EQ(min_phantom_axis(10), 16u);
  PhantomSpec s;
  s.dims = {16, 16, 16};
  int retries = -1;
  const auto p = generate_valid_phantom(s, &retries);
  EXPECT_TRUE(phantom_is_valid(p.labels));
  EXPECT_GE(retries, 0);
  s.dims = {15, 16, 16};
  EXPECT_THROW(generate_phantom(s), Error);
}

TEST(Phantom, OtherClassCounts) {
  for (int c : {2, 4, 7}) {
    PhantomSpec s = small_spec(1);
    s.num_classes = c;
    const auto p = generate_valid_phantom(s);
    EXPECT_EQ(p.labels.num_classes(), c);
    EXPECT_TRUE(phantom_is_valid(p.labels));
  }
}

TEST(Phantom, InvalidSpecsRejected) {
  PhantomSpec s = small_spec(1);
  s.num_classes = 1;
  EXPECT_THROW(generate_phantom(s), Error);
  s = small_spec(1);
  s.subject_scale = 1.5;
  EXPECT_THROW(generate_phantom(s), Error);
  s = small_spec(1);
  s.intensity_table = {0.0, 1.0};
  EXPECT_THROW(generate_phantom(s), Error);
}

TEST(Phantom, MinimumClassSizeScalesWithGrid) {
  EXPECT_EQ(min_class_voxels({64, 64, 64}), 32u);
  EXPECT_EQ(min_class_voxels({128, 128, 128}), 32u);
  EXPECT_EQ(min_class_voxels({32, 32, 32}), 4u);
  EXPECT_EQ(min_class_voxels({48, 48, 48}), 14u);
  EXPECT_EQ(min_class_voxels({16, 16, 16}), 4u);
}

TEST(Phantom, ValidityNeedsMinimumVoxelsPerClass) {
  const Dims d{64, 64, 64};
  std::vector<std::uint16_t> v(d.count(), 0);
  for (std::size_t i = 0; i < 31; ++i) v[i] = 1;
  EXPECT_FALSE(phantom_is_valid(LabelMap(d, v, 2)));
  v[31] = 1;
  EXPECT_TRUE(phantom_is_valid(LabelMap(d, v, 2)));
}

TEST(SplitCounts, Rounding) {
  const auto c20 = split_counts(20);
  EXPECT_EQ(c20.train, 14u);
  EXPECT_EQ(c20.val, 3u);
  EXPECT_EQ(c20.test, 3u);
  const auto c10 = split_counts(10);
  EXPECT_EQ(c10.train, 8u);
  EXPECT_EQ(c10.test, 1u);
  const auto c3 = split_counts(3);
  EXPECT_EQ(c3.train + c3.val + c3.test, 3u);
  EXPECT_THROW(split_counts(2), Error);
}

TEST(Cohort, WritesFilesAndManifest) {
  testing::TempDir dir;
  PhantomSpec base;
  base.dims = {20, 20, 20};
  const auto m = generate_cohort(6, base, 9, dir.path(), 2);
  ASSERT_EQ(m.subjects.size(), 6u);
  EXPECT_EQ(m.in_split(Split::kTrain).size(), 4u);
  EXPECT_EQ(m.in_split(Split::kTest).size(), 1u);
  for (const auto& e : m.subjects) {
    EXPECT_GE(e.scale, 0.75);
    EXPECT_LE(e.scale, 1.25);
    const auto lm = load_labelmap(dir / e.label_file, m.num_classes);
    EXPECT_TRUE(phantom_is_valid(lm));
    EXPECT_EQ(load_volume(dir / e.volume_file).dims(), base.dims);
  }
  const auto back = load_cohort_manifest(dir.path());
  EXPECT_EQ(back.subjects.size(), 6u);
  EXPECT_EQ(back.subjects[2].id, "sub-002");
  EXPECT_EQ(back.subjects[2].seed, m.subjects[2].seed);
}

TEST(Cohort, IndependentOfThreadCount) {
  testing::TempDir a, b;
  PhantomSpec base;
  base.dims = {18, 18, 18};
  generate_cohort(4, base, 1, a.path(), 1);
  generate_cohort(4, base, 1, b.path(), 3);
  for (const char* f : {"sub-000.nii", "sub-003_seg.nii", "cohort.json"})
    EXPECT_EQ(read_file_bytes(a / f), read_file_bytes(b / f)) << f;
}

}  // namespace
}  // namespace texbias
