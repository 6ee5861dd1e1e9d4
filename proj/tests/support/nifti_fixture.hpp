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

// Byte-level NIfTI-1 construction, independent of the library's writer.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

namespace texbias::testing {

template <typename T>
void poke(std::string& buf, std::size_t off, T v) {
  std::memcpy(buf.data() + off, &v, sizeof(T));
}

/// Minimal single-file image of dims 2x2x2, spacing (1, 1.5, 2): 348-byte
/// header, 4-byte extension block, payload at offset 352.
inline std::string hand_built_nifti(std::int16_t datatype, std::int16_t bitpix, const std::string& payload,
                                    std::int16_t ndim = 3, float slope = 0.0f, float inter = 0.0f) {
  std::string b(352, '\0');
  poke<std::int32_t>(b, 0, 348);
  const std::int16_t dim[8] = {ndim, 2, 2, 2, 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) poke<std::int16_t>(b, std::size_t(40 + 2 * i), dim[i]);
  poke<std::int16_t>(b, 70, datatype);
  poke<std::int16_t>(b, 72, bitpix);
  const float pixdim[8] = {1.0f, 1.0f, 1.5f, 2.0f, 1.0f, 1.0f, 1.0f, 1.0f};
  for (int i = 0; i < 8; ++i) poke<float>(b, std::size_t(76 + 4 * i), pixdim[i]);
  poke<float>(b, 108, 352.0f);
  poke<float>(b, 112, slope);
  poke<float>(b, 116, inter);
  b[123] = 2;
  std::memcpy(b.data() + 344, "n+1\0", 4);
  return b + payload;
}

/// float32 payload 0, 1, ..., 7.
inline std::string f32_ramp() {
  std::string p(32, '\0');
  for (int i = 0; i < 8; ++i) poke<float>(p, std::size_t(4 * i), float(i));
  return p;
}

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary).write(bytes.data(), std::streamsize(bytes.size()));
}

/// Compresses through zlib's gz* file API rather than the library's writer.
inline bool write_gzip(const std::filesystem::path& p, const std::string& bytes) {
  gzFile f = gzopen(p.c_str(), "wb");
  if (!f) return false;
  const bool ok = gzwrite(f, bytes.data(), unsigned(bytes.size())) == int(bytes.size());
  return gzclose(f) == Z_OK && ok;
}

}  // namespace texbias::testing
