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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "texbias/volume.hpp"

namespace texbias {

// On-disk dataset layout shared by the generator, the corruptor, training and
// evaluation:
//
//   <dir>/cohort.json          subject list with split assignment
//   <dir>/dataset.json         corruption manifest (absent for a raw cohort)
//   <dir>/<id>.nii             intensity volume
//   <dir>/<id>_seg.nii         ground-truth label map
//
// Volume and label files may use any format understood by load_volume.

inline constexpr const char* kCohortManifest = "cohort.json";
inline constexpr const char* kDatasetManifest = "dataset.json";
inline constexpr const char* kLabelSuffix = "_seg";

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// 70 / 15 / 15 with floor rounding and at least one subject per split. n >= 3.
SplitCounts split_counts(std::size_t n);

struct SubjectEntry {
  std::string id;
  std::string volume_file;
  std::string label_file;
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
  double scale = 1.0;
  int retries = 0;
};

struct CohortManifest {
  std::vector<SubjectEntry> subjects;
  int num_classes = 0;
  std::uint64_t seed = 0;
  nlohmann::json generator;  // generation parameters, opaque here

  std::vector<SubjectEntry> in_split(Split s) const;
};

nlohmann::json to_json(const CohortManifest& m);
CohortManifest cohort_from_json(const nlohmann::json& j);
CohortManifest load_cohort_manifest(const std::filesystem::path& dir);
void save_cohort_manifest(const CohortManifest& m, const std::filesystem::path& dir);

/// True for file names the volume loaders understand (.nii, .nii.gz, .vol.json).
bool is_volume_file(const std::filesystem::path& p);
/// True for volume files whose stem ends in "_seg".
bool is_label_file(const std::filesystem::path& p);
/// File name with the volume extension removed ("a.nii.gz" -> "a").
std::string volume_stem(const std::filesystem::path& p);

/// Sorted intensity-volume files (labels excluded) directly inside dir.
std::vector<std::filesystem::path> list_intensity_volumes(const std::filesystem::path& dir);

/// Reads a JSON document from disk; throws FormatError with the path on bad JSON.
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// CRC-32 over the named files' names and bytes, in the given order.
std::uint32_t content_crc(const std::filesystem::path& dir, const std::vector<std::string>& files);

/// Deterministic 64-bit hash of a string, for deriving per-unit seeds.
std::uint64_t stable_hash(const std::string& s);

}  // namespace texbias
