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

#include "texbias/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "texbias/error.hpp"

namespace texbias {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in, const fs::path& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IoError("zlib init failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());

  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError("corrupt gzip stream in " + path.string());
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw FormatError("truncated gzip stream in " + path.string());
    }
  }
  inflateEnd(&zs);
  return out;
}

std::string gzip_bytes(std::string_view in) {
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw IoError("zlib init failed");
  std::string out(deflateBound(&zs, static_cast<uLong>(in.size())), '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

template <typename T>
T read_le(const std::uint8_t* p, bool swap) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if (swap) {
    auto* b = reinterpret_cast<std::uint8_t*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::string& buf, std::size_t offset, T v) {
  std::memcpy(buf.data() + offset, &v, sizeof(T));
}

std::size_t dtype_bytes(DType t) {
  switch (t) {
    case DType::kU8: return 1;
    case DType::kI16: return 2;
    case DType::kF32: return 4;
  }
  return 0;
}

DType checked_dtype(int code, const fs::path& path) {
  if (code == 2 || code == 4 || code == 16) return static_cast<DType>(code);
  throw FormatError("unsupported NIfTI datatype " + std::to_string(code) + " in " + path.string());
}

struct Decoded {
  VolumeHeader header;
  std::vector<double> values;
};

std::vector<double> decode_samples(const std::uint8_t* p, std::size_t n, DType dtype, bool swap) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (dtype) {
      case DType::kU8: out[i] = p[i]; break;
      case DType::kI16: out[i] = read_le<std::int16_t>(p + 2 * i, swap); break;
      case DType::kF32: out[i] = read_le<float>(p + 4 * i, swap); break;
    }
  }
  return out;
}

Decoded decode_nifti(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < nifti::kHeaderSize)
    throw FormatError("file too short for a NIfTI-1 header: " + path.string());
  if (std::memcmp(bytes.data() + nifti::kMagicOffset, "n+1\0", 4) != 0)
    throw FormatError("unrecognized magic (expected single-file NIfTI-1 \"n+1\"): " + path.string());

  bool swap = false;
  if (read_le<std::int32_t>(bytes.data(), false) != 348) {
    if (read_le<std::int32_t>(bytes.data(), true) != 348)
      throw FormatError("bad sizeof_hdr in " + path.string());
    swap = true;
  }

  const auto* h = bytes.data();
  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = read_le<std::int16_t>(h + nifti::kDimOffset + 2 * i, swap);
  if (dim[0] != 3)
    throw FormatError("expected a 3D volume (dim[0] == 3), got dim[0] = " + std::to_string(dim[0]) +
                      " in " + path.string());
  if (dim[1] <= 0 || dim[2] <= 0 || dim[3] <= 0)
    throw FormatError("non-positive dimension in " + path.string());

  Decoded d;
  auto& hdr = d.header;
  hdr.dims = {std::size_t(dim[1]), std::size_t(dim[2]), std::size_t(dim[3])};
  hdr.dtype = checked_dtype(read_le<std::int16_t>(h + nifti::kDatatypeOffset, swap), path);
  for (int i = 0; i < 3; ++i) {
    const float px = read_le<float>(h + nifti::kPixdimOffset + 4 * (i + 1), swap);
    hdr.spacing[i] = (std::isfinite(px) && px > 0.0f) ? px : 1.0;
  }
  const float vox_offset = read_le<float>(h + nifti::kVoxOffsetOffset, swap);
  if (!(vox_offset >= float(nifti::kHeaderSize)))
    throw FormatError("invalid vox_offset in " + path.string());
  hdr.data_offset = std::size_t(vox_offset);
  const float slope = read_le<float>(h + nifti::kSclSlopeOffset, swap);
  const float inter = read_le<float>(h + nifti::kSclInterOffset, swap);
  hdr.scl_slope = std::isfinite(slope) ? slope : 0.0;
  hdr.scl_inter = std::isfinite(inter) ? inter : 0.0;

  const std::size_t payload = hdr.dims.count() * dtype_bytes(hdr.dtype);
  if (bytes.size() < hdr.data_offset || bytes.size() - hdr.data_offset != payload)
    throw FormatError("truncated payload in " + path.string() + ": expected " +
                      std::to_string(payload) + " bytes after offset " +
                      std::to_string(hdr.data_offset) + ", found " +
                      std::to_string(bytes.size() > hdr.data_offset ? bytes.size() - hdr.data_offset : 0));

  d.values = decode_samples(h + hdr.data_offset, hdr.dims.count(), hdr.dtype, swap);
  if (hdr.scl_slope != 0.0)
    for (auto& v : d.values) v = hdr.scl_slope * v + hdr.scl_inter;
  return d;
}

fs::path raw_payload_path(const fs::path& sidecar) {
  std::string name = sidecar.filename().string();
  name.resize(name.size() - kRawSidecarSuffix.size());
  return sidecar.parent_path() / (name + ".vol.bin");
}

VolumeHeader parse_raw_sidecar(const fs::path& path, fs::path* data_file) {
  json j;
  try {
    const auto bytes = read_file_bytes(path);
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError("malformed raw sidecar " + path.string() + ": " + e.what());
  }
  VolumeHeader hdr;
  try {
    const auto dims = j.at("dims").get<std::vector<std::int64_t>>();
    const auto spacing = j.at("spacing").get<std::vector<double>>();
    const auto dtype = j.at("dtype").get<std::string>();
    if (dims.size() != 3 || spacing.size() != 3)
      throw FormatError("raw sidecar dims/spacing must have 3 entries: " + path.string());
    for (auto n : dims)
      if (n <= 0) throw FormatError("non-positive dimension in " + path.string());
    hdr.dims = {std::size_t(dims[0]), std::size_t(dims[1]), std::size_t(dims[2])};
    hdr.spacing = {spacing[0], spacing[1], spacing[2]};
    if (dtype == "f32")
      hdr.dtype = DType::kF32;
    else if (dtype == "u8")
      hdr.dtype = DType::kU8;
    else
      throw FormatError("unsupported raw dtype \"" + dtype + "\" in " + path.string());
    *data_file = path.parent_path() / j.at("data_file").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError("malformed raw sidecar " + path.string() + ": " + e.what());
  }
  return hdr;
}

Decoded decode_raw(const fs::path& path) {
  Decoded d;
  fs::path data_file;
  d.header = parse_raw_sidecar(path, &data_file);
  const auto bytes = read_file_bytes(data_file);
  const std::size_t payload = d.header.dims.count() * dtype_bytes(d.header.dtype);
  if (bytes.size() != payload)
    throw FormatError("truncated payload in " + data_file.string() + ": expected " +
                      std::to_string(payload) + " bytes, found " + std::to_string(bytes.size()));
  d.values = decode_samples(bytes.data(), d.header.dims.count(), d.header.dtype, false);
  return d;
}

Decoded decode_any(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  return format_for_path(path) == VolumeFormat::kRaw ? decode_raw(path) : decode_nifti(path);
}

std::string nifti_bytes(const Dims& dims, const Spacing& spacing, DType dtype, std::string_view payload) {
  std::string buf(nifti::kDefaultVoxOffset, '\0');
  put<std::int32_t>(buf, 0, 348);
  const std::int16_t dim[8] = {3, std::int16_t(dims.nx), std::int16_t(dims.ny), std::int16_t(dims.nz), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put<std::int16_t>(buf, nifti::kDimOffset + 2 * i, dim[i]);
  put<std::int16_t>(buf, nifti::kDatatypeOffset, static_cast<std::int16_t>(dtype));
  put<std::int16_t>(buf, nifti::kBitpixOffset, std::int16_t(8 * dtype_bytes(dtype)));
  const float pixdim[8] = {1.0f, float(spacing[0]), float(spacing[1]), float(spacing[2]), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put<float>(buf, nifti::kPixdimOffset + 4 * i, pixdim[i]);
  put<float>(buf, nifti::kVoxOffsetOffset, float(nifti::kDefaultVoxOffset));
  put<float>(buf, nifti::kSclSlopeOffset, 1.0f);
  put<float>(buf, nifti::kSclInterOffset, 0.0f);
  buf[nifti::kXyztUnitsOffset] = 2;  // NIFTI_UNITS_MM
  std::memcpy(buf.data() + nifti::kMagicOffset, "n+1\0", 4);
  buf.append(payload);
  return buf;
}

void check_dims_fit(const Dims& dims, const fs::path& path) {
  constexpr std::size_t kMax = 32767;
  if (dims.nx > kMax || dims.ny > kMax || dims.nz > kMax)
    throw InvalidArgument("dimension exceeds NIfTI-1 limit for " + path.string());
}

void save_encoded(const Dims& dims, const Spacing& spacing, DType dtype, std::string_view payload,
                  const fs::path& path, VolumeFormat format) {
  if (format == VolumeFormat::kNifti) {
    check_dims_fit(dims, path);
    write_file_atomic(path, nifti_bytes(dims, spacing, dtype, payload), ends_with(path.string(), ".gz"));
    return;
  }
  if (!ends_with(path.filename().string(), kRawSidecarSuffix))
    throw InvalidArgument("raw volume path must end in .vol.json: " + path.string());
  const auto bin = raw_payload_path(path);
  json j;
  j["dims"] = {dims.nx, dims.ny, dims.nz};
  j["spacing"] = {spacing[0], spacing[1], spacing[2]};
  j["dtype"] = dtype == DType::kU8 ? "u8" : "f32";
  j["data_file"] = bin.filename().string();
  write_file_atomic(bin, payload);
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace

VolumeFormat format_for_path(const fs::path& path) {
  return ends_with(path.filename().string(), kRawSidecarSuffix) ? VolumeFormat::kRaw
                                                                  : VolumeFormat::kNifti;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  if (bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B) return gunzip(bytes, path);
  return bytes;
}

void write_file_atomic(const fs::path& path, std::string_view bytes, bool gzip) {
  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1));

  std::string compressed;
  if (gzip) {
    compressed = gzip_bytes(bytes);
    bytes = compressed;
  }
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.close();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move temporary file into place: " + path.string());
  }
}

VolumeHeader read_header(const fs::path& path) { return decode_any(path).header; }

Volume3D load_volume(const fs::path& path) {
  auto d = decode_any(path);
  for (double v : d.values)
    if (!std::isfinite(v)) throw FormatError("non-finite voxel value in " + path.string());
  return Volume3D(d.header.dims, std::move(d.values), d.header.spacing);
}

void save_volume(const Volume3D& vol, const fs::path& path) {
  save_volume(vol, path, format_for_path(path));
}

void save_volume(const Volume3D& vol, const fs::path& path, VolumeFormat format) {
  std::string payload(vol.size() * 4, '\0');
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const float f = float(vol[i]);
    std::memcpy(payload.data() + 4 * i, &f, 4);
  }
  save_encoded(vol.dims(), vol.spacing(), DType::kF32, payload, path, format);
}

LabelMap load_labelmap(const fs::path& path, std::optional<int> num_classes) {
  auto d = decode_any(path);
  std::vector<std::uint16_t> labels(d.values.size());
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    const double v = d.values[i];
    if (!std::isfinite(v) || v != std::floor(v))
      throw FormatError("non-integral label value " + std::to_string(v) + " in " + path.string());
    if (v < 0 || v > 65535)
      throw FormatError("label value out of range in " + path.string());
    labels[i] = std::uint16_t(v);
  }
  const int c = num_classes.value_or(LabelMap::infer_num_classes(labels));
  for (auto l : labels)
    if (l >= c)
      throw FormatError("label " + std::to_string(l) + " >= num_classes " + std::to_string(c) +
                        " in " + path.string());
  return LabelMap(d.header.dims, std::move(labels), c, d.header.spacing);
}

void save_labelmap(const LabelMap& labels, const fs::path& path) {
  save_labelmap(labels, path, format_for_path(path));
}

void save_labelmap(const LabelMap& labels, const fs::path& path, VolumeFormat format) {
  std::string payload(labels.size(), '\0');
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 255)
      throw InvalidArgument("label " + std::to_string(labels[i]) + " exceeds the u8 write limit (254)");
    payload[i] = char(labels[i]);
  }
  save_encoded(labels.dims(), labels.spacing(), DType::kU8, payload, path, format);
}

}  // namespace texbias
