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

#include <bit>
#include <cstring>
#include <fstream>

#include "nifti_fixture.hpp"
#include "oracles.hpp"
#include "texbias/error.hpp"
#include "texbias/io.hpp"

namespace texbias {
namespace {

namespace fs = std::filesystem;
using testing::f32_ramp;
using testing::hand_built_nifti;
using testing::poke;
using testing::TempDir;
using testing::write_bytes;

void write_gzip(const fs::path& p, const std::string& bytes) { ASSERT_TRUE(testing::write_gzip(p, bytes)); }

void expect_ramp(const Volume3D& v) {
  ASSERT_EQ(v.dims(), (Dims{2, 2, 2}));
  for (int i = 0; i < 8; ++i) EXPECT_EQ(v[std::size_t(i)], double(i));
  // x is the fastest axis.
  EXPECT_EQ(v.at(1, 0, 0), 1.0);
  EXPECT_EQ(v.at(0, 1, 0), 2.0);
  EXPECT_EQ(v.at(0, 0, 1), 4.0);
  EXPECT_EQ(v.spacing()[1], 1.5);
  EXPECT_EQ(v.spacing()[2], 2.0);
}

TEST(NiftiRead, HandBuiltHeaderFloat32) {
  TempDir dir;
  write_bytes(dir / "ramp.nii", hand_built_nifti(16, 32, f32_ramp()));
  expect_ramp(load_volume(dir / "ramp.nii"));
  const auto h = read_header(dir / "ramp.nii");
  EXPECT_EQ(h.dtype, DType::kF32);
  EXPECT_EQ(h.data_offset, 352u);
}

TEST(NiftiRead, GzipTwinMatches) {
  TempDir dir;
  const auto bytes = hand_built_nifti(16, 32, f32_ramp());
  write_gzip(dir / "ramp.nii.gz", bytes);
  expect_ramp(load_volume(dir / "ramp.nii.gz"));
}

TEST(NiftiRead, GzipDetectedByContentNotName) {
  TempDir dir;
  write_gzip(dir / "ramp.nii", hand_built_nifti(16, 32, f32_ramp()));
  expect_ramp(load_volume(dir / "ramp.nii"));
}

TEST(NiftiRead, Uint8WithScaling) {
  TempDir dir;
  std::string p;
  for (int i = 0; i < 8; ++i) p.push_back(char(i));
  write_bytes(dir / "u8.nii", hand_built_nifti(2, 8, p, 3, 2.0f, 1.0f));
  const auto v = load_volume(dir / "u8.nii");
  for (int i = 0; i < 8; ++i) EXPECT_EQ(v[std::size_t(i)], 2.0 * i + 1.0);
}

TEST(NiftiRead, Int16Negative) {
  TempDir dir;
  std::string p(16, '\0');
  for (int i = 0; i < 8; ++i) poke<std::int16_t>(p, std::size_t(2 * i), std::int16_t(-300 + 100 * i));
  write_bytes(dir / "i16.nii", hand_built_nifti(4, 16, p));
  const auto v = load_volume(dir / "i16.nii");
  EXPECT_EQ(v[0], -300.0);
  EXPECT_EQ(v[7], 400.0);
}

TEST(NiftiRead, BigEndianHeader) {
  TempDir dir;
  auto b = hand_built_nifti(16, 32, f32_ramp());
  auto swap_at = [&](std::size_t off, std::size_t width) { std::reverse(b.begin() + off, b.begin() + off + width); };
  swap_at(0, 4);
  for (int i = 0; i < 8; ++i) swap_at(40 + 2 * i, 2);
  swap_at(70, 2);
  swap_at(72, 2);
  for (int i = 0; i < 8; ++i) swap_at(76 + 4 * i, 4);
  for (std::size_t off : {108, 112, 116}) swap_at(off, 4);
  for (int i = 0; i < 8; ++i) swap_at(352 + 4 * i, 4);
  write_bytes(dir / "be.nii", b);
  expect_ramp(load_volume(dir / "be.nii"));
}

TEST(NiftiRead, RejectsUnsupportedDatatype) {
  TempDir dir;
  write_bytes(dir / "f64.nii", hand_built_nifti(64, 64, std::string(64, '\0')));
  try {
    load_volume(dir / "f64.nii");
    FAIL() << "float64 accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    EXPECT_NE(std::string(e.what()).find("64"), std::string::npos);
  }
}

TEST(NiftiRead, RejectsTruncatedPayload) {
  TempDir dir;
  auto b = hand_built_nifti(16, 32, f32_ramp());
  b.resize(b.size() - 3);
  write_bytes(dir / "short.nii", b);
  EXPECT_THROW(load_volume(dir / "short.nii"), Error);
}

TEST(NiftiRead, RejectsNonVolumeRank) {
  TempDir dir;
  write_bytes(dir / "4d.nii", hand_built_nifti(16, 32, f32_ramp(), 4));
  EXPECT_THROW(load_volume(dir / "4d.nii"), Error);
}

TEST(NiftiRead, RejectsBadMagic) {
  TempDir dir;
  auto b = hand_built_nifti(16, 32, f32_ramp());
  b[345] = 'x';
  write_bytes(dir / "bad.nii", b);
  EXPECT_THROW(load_volume(dir / "bad.nii"), Error);
}

TEST(NiftiRead, MissingFileIsIoError) {
  try {
    load_volume("/nonexistent/texbias/none.nii");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST(NiftiWrite, HeaderLayout) {
  TempDir dir;
  save_volume(Volume3D({3, 4, 5}, 1.5), dir / "v.nii");
  const auto bytes = read_file_bytes(dir / "v.nii");
  ASSERT_EQ(bytes.size(), 352u + 60u * 4u);
  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  EXPECT_EQ(sizeof_hdr, 348);
  float vox_offset;
  std::memcpy(&vox_offset, bytes.data() + 108, 4);
  EXPECT_EQ(vox_offset, 352.0f);
  EXPECT_EQ(std::memcmp(bytes.data() + 344, "n+1\0", 4), 0);
}

TEST(NiftiWrite, RoundTripExactForFloat32Values) {
  TempDir dir;
  std::vector<double> v(60);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(float(std::sin(double(i)) * 100.0));
  const Volume3D in({3, 4, 5}, v, {0.5, 1.0, 2.5});
  for (const char* name : {"a.nii", "a.nii.gz"}) {
    save_volume(in, dir / name);
    const auto out = load_volume(dir / name);
    EXPECT_EQ(out.dims(), in.dims());
    EXPECT_EQ(out.spacing(), in.spacing());
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(out[i], in[i]) << name << " voxel " << i;
  }
  EXPECT_EQ(read_file_bytes(dir / "a.nii"), read_file_bytes(dir / "a.nii.gz"));
}

TEST(NiftiWrite, ConstantOnePointFive) {
  TempDir dir;
  save_volume(Volume3D({2, 2, 2}, 1.5), dir / "c.nii");
  const auto out = load_volume(dir / "c.nii");
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(out[i], 1.5);
}

TEST(RawFormat, RoundTripBitExact) {
  TempDir dir;
  const auto in = testing::random_volume({5, 3, 4}, 11);
  std::vector<double> f32(in.data().begin(), in.data().end());
  for (auto& x : f32) x = double(float(x));
  const Volume3D vol({5, 3, 4}, f32, {1.0, 2.0, 3.0});
  save_volume(vol, dir / "r.vol.json");
  EXPECT_TRUE(fs::exists(dir / "r.vol.bin"));
  const auto out = load_volume(dir / "r.vol.json");
  EXPECT_EQ(out.spacing(), vol.spacing());
  for (std::size_t i = 0; i < vol.size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(out[i]), std::bit_cast<std::uint64_t>(vol[i]));
  save_volume(out, dir / "s.vol.json");
  EXPECT_EQ(read_file_bytes(dir / "r.vol.bin"), read_file_bytes(dir / "s.vol.bin"));
}

TEST(RawFormat, TruncatedPayloadRejected) {
  TempDir dir;
  save_volume(Volume3D({2, 2, 2}, 1.0), dir / "r.vol.json");
  fs::resize_file(dir / "r.vol.bin", 28);
  EXPECT_THROW(load_volume(dir / "r.vol.json"), Error);
}

TEST(LabelIo, RoundTripBothFormats) {
  TempDir dir;
  const auto lm = testing::random_labels({4, 3, 2}, 10, 3);
  save_labelmap(lm, dir / "l.nii");
  save_labelmap(lm, dir / "l.vol.json");
  EXPECT_EQ(load_labelmap(dir / "l.nii", 10), lm);
  EXPECT_EQ(load_labelmap(dir / "l.vol.json", 10), lm);
}

TEST(LabelIo, NonIntegralLabelsRejected) {
  TempDir dir;
  std::vector<double> v(8, 1.0);
  v[3] = 1.5;
  save_volume(Volume3D({2, 2, 2}, v), dir / "l.nii");
  EXPECT_THROW(load_labelmap(dir / "l.nii"), Error);
}

TEST(LabelIo, ClassCountInferredFromMaximum) {
  TempDir dir;
  std::vector<std::uint16_t> v = {0, 1, 4, 2, 0, 0, 0, 0};
  save_labelmap(LabelMap({2, 2, 2}, v, 5), dir / "l.nii");
  EXPECT_EQ(load_labelmap(dir / "l.nii").num_classes(), 5);
  EXPECT_THROW(load_labelmap(dir / "l.nii", 4), Error);
}

TEST(AtomicWrite, UnwritableDestinationLeavesNothing) {
  TempDir dir;
  // A regular file used as a parent directory fails even for root.
  write_bytes(dir / "blocker", "x");
  try {
    save_volume(Volume3D({2, 2, 2}, 0.0), dir / "blocker" / "v.nii");
    FAIL() << "write through a file succeeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 1u);
}

}  // namespace
}  // namespace texbias
