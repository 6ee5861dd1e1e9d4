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

#include <png.h>

#include <csetjmp>
#include <array>
#include <cmath>
#include <cstdio>

#include "texbias/error.hpp"
#include "texbias/harness.hpp"
#include "texbias/io.hpp"

namespace texbias {

namespace fs = std::filesystem;

namespace {

// Categorical palette; label k uses entry k % size.
constexpr std::array<std::array<std::uint8_t, 3>, 12> kPalette{{
    {0, 0, 0},
    {230, 25, 75},
    {60, 180, 75},
    {255, 225, 25},
    {0, 130, 200},
    {245, 130, 48},
    {145, 30, 180},
    {70, 240, 240},
    {240, 50, 230},
    {210, 245, 60},
    {250, 190, 190},
    {0, 128, 128},
}};

struct Plane {
  std::size_t width;
  std::size_t height;
  // voxel index of pixel (u, v)
  std::size_t origin;
  std::size_t du;
  std::size_t dv;
};

Plane plane_for(const Dims& d, SliceAxis axis, std::size_t index) {
  const int fixed = axis == SliceAxis::kAxial ? 2 : axis == SliceAxis::kCoronal ? 1 : 0;
  if (index >= d[fixed])
    throw InvalidArgument("slice index " + std::to_string(index) + " out of range (axis length " +
                          std::to_string(d[fixed]) + ")");
  const std::size_t sx = 1, sy = d.nx, sz = d.nx * d.ny;
  switch (axis) {
    case SliceAxis::kAxial: return {d.nx, d.ny, index * sz, sx, sy};
    case SliceAxis::kCoronal: return {d.nx, d.nz, index * sy, sx, sz};
    case SliceAxis::kSagittal: return {d.ny, d.nz, index * sx, sy, sz};
  }
  return {};
}

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

/// Encodes into `out`. No objects with destructors live in this frame, so the
/// longjmp taken on libpng errors is safe.
bool encode_png(std::string* out, std::size_t w, std::size_t h, int channels, const std::uint8_t* pixels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, append_bytes, nullptr);
  png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < h; ++r) png_write_row(png, const_cast<png_bytep>(pixels + r * w * std::size_t(channels)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void write_png(const fs::path& path, std::size_t w, std::size_t h, int channels, const std::vector<std::uint8_t>& pixels) {
  std::string bytes;
  if (!encode_png(&bytes, w, h, channels, pixels.data())) throw IoError("PNG encoding failed for " + path.string());
  write_file_atomic(path, bytes);
}

}  // namespace

SliceAxis slice_axis_from_string(const std::string& s) {
  if (s == "axial") return SliceAxis::kAxial;
  if (s == "coronal") return SliceAxis::kCoronal;
  if (s == "sagittal") return SliceAxis::kSagittal;
  throw InvalidArgument("unknown slice axis \"" + s + "\" (axial|coronal|sagittal)");
}

void export_slice(const Volume3D& vol, SliceAxis axis, std::size_t index, const fs::path& path) {
  const auto p = plane_for(vol.dims(), axis, index);
  double lo = vol[p.origin], hi = lo;
  for (std::size_t v = 0; v < p.height; ++v)
    for (std::size_t u = 0; u < p.width; ++u) {
      const double x = vol[p.origin + u * p.du + v * p.dv];
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  std::vector<std::uint8_t> pixels(p.width * p.height);
  for (std::size_t v = 0; v < p.height; ++v)
    for (std::size_t u = 0; u < p.width; ++u) {
      const double x = vol[p.origin + u * p.du + v * p.dv];
      const double t = hi > lo ? (x - lo) / (hi - lo) : 0.5;
      pixels[v * p.width + u] = std::uint8_t(std::lround(t * 255.0));
    }
  write_png(path, p.width, p.height, 1, pixels);
}

void export_slice(const LabelMap& labels, SliceAxis axis, std::size_t index, const fs::path& path) {
  const auto p = plane_for(labels.dims(), axis, index);
  std::vector<std::uint8_t> pixels(p.width * p.height * 3);
  for (std::size_t v = 0; v < p.height; ++v)
    for (std::size_t u = 0; u < p.width; ++u) {
      const auto& rgb = kPalette[std::size_t(labels[p.origin + u * p.du + v * p.dv]) % kPalette.size()];
      for (int ch = 0; ch < 3; ++ch) pixels[(v * p.width + u) * 3 + std::size_t(ch)] = rgb[std::size_t(ch)];
    }
  write_png(path, p.width, p.height, 3, pixels);
}

}  // namespace texbias
