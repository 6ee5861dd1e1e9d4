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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "texbias/volume.hpp"

namespace texbias {

/// On-disk sample type, using the NIfTI-1 datatype codes.
enum class DType : std::int16_t {
  kU8 = 2,
  kI16 = 4,
  kF32 = 16,
};

/// Parsed essentials of a volume file header (NIfTI-1 or raw sidecar).
struct VolumeHeader {
  Dims dims;
  Spacing spacing{1.0, 1.0, 1.0};
  DType dtype = DType::kF32;
  double scl_slope = 0.0;
  double scl_inter = 0.0;
  std::size_t data_offset = 0;
};

enum class VolumeFormat { kNifti, kRaw };

/// Byte offsets inside the 348-byte NIfTI-1 header that this library touches.
namespace nifti {
inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kDimOffset = 40;
inline constexpr std::size_t kDatatypeOffset = 70;
inline constexpr std::size_t kBitpixOffset = 72;
inline constexpr std::size_t kPixdimOffset = 76;
inline constexpr std::size_t kVoxOffsetOffset = 108;
inline constexpr std::size_t kSclSlopeOffset = 112;
inline constexpr std::size_t kSclInterOffset = 116;
inline constexpr std::size_t kXyztUnitsOffset = 123;
inline constexpr std::size_t kMagicOffset = 344;
inline constexpr std::size_t kDefaultVoxOffset = 352;
}  // namespace nifti

/// Raw format paths end in this suffix; the payload sits next to it as "<name>.vol.bin".
inline constexpr std::string_view kRawSidecarSuffix = ".vol.json";

/// Picks the format from the path: ".vol.json" is raw, anything else NIfTI
/// (gzip-compressed when the name ends in ".gz").
VolumeFormat format_for_path(const std::filesystem::path& path);

/// Reads the whole file, transparently inflating gzip content.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename, so a failed write leaves nothing behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes, bool gzip = false);

VolumeHeader read_header(const std::filesystem::path& path);

Volume3D load_volume(const std::filesystem::path& path);
void save_volume(const Volume3D& vol, const std::filesystem::path& path);
void save_volume(const Volume3D& vol, const std::filesystem::path& path, VolumeFormat format);

/// num_classes defaults to max label + 1.
LabelMap load_labelmap(const std::filesystem::path& path, std::optional<int> num_classes = {});
void save_labelmap(const LabelMap& labels, const std::filesystem::path& path);
void save_labelmap(const LabelMap& labels, const std::filesystem::path& path, VolumeFormat format);

}  // namespace texbias
