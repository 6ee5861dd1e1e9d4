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

#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "texbias/dataset.hpp"
#include "texbias/volume.hpp"

namespace texbias {

/// Parameters of one synthetic labelled subject. Classes are laid out as nested
/// ellipsoidal shells (outer tissue to deep structures) plus a few small
/// off-centre ellipsoids; class 0 is background.
struct PhantomSpec {
  Dims dims{64, 64, 64};
  int num_classes = 10;
  /// Global size factor, emulating growth variability across subjects.
  double subject_scale = 1.0;
  /// Pre-normalization mean intensity per class; empty selects the default table.
  std::vector<double> intensity_table;
  double intensity_jitter_sd = 0.05;
  double acquisition_noise_sd = 0.15;
  std::uint64_t seed = 0;
};

/// Default per-class means for `num_classes` classes. Several neighbouring
/// tissues sit 0.3 apart so intensity alone cannot separate them cleanly.
std::vector<double> default_intensity_table(int num_classes);

/// Smallest axis length that fits `num_classes` structures.
std::size_t min_phantom_axis(int num_classes);

/// Voxels every class must occupy in a 64^3 phantom for it to count as valid.
inline constexpr std::size_t kMinClassVoxels = 32;
/// Lower bound on the requirement for small grids.
inline constexpr std::size_t kMinClassVoxelsFloor = 4;

/// kMinClassVoxels scaled by the grid's voxel count relative to 64^3, clamped
/// to [kMinClassVoxelsFloor, kMinClassVoxels].
std::size_t min_class_voxels(const Dims& dims);

struct Phantom {
  Volume3D volume;  // zero-mean, unit-variance
  LabelMap labels;
};

/// Deterministic in spec (including seed). Does not retry; see generate_valid_phantom.
Phantom generate_phantom(const PhantomSpec& spec);

/// True when every class covers at least min_class_voxels(labels.dims()) voxels.
bool phantom_is_valid(const LabelMap& labels);

/// Retries with seed + 1, seed + 2, ... until the phantom is valid. `retries`
/// receives the number of extra attempts.
Phantom generate_valid_phantom(PhantomSpec spec, int* retries = nullptr, int max_retries = 64);

/// Writes n subjects to dir with seeds seed + i and scales drawn uniformly from
/// [0.75, 1.25], plus cohort.json recording seeds, scales, retries and the
/// 70/15/15 split.
CohortManifest generate_cohort(std::size_t n, const PhantomSpec& base, std::uint64_t seed,
                               const std::filesystem::path& dir, unsigned jobs = 1);

}  // namespace texbias
