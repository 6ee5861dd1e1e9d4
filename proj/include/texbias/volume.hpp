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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace texbias {

/// Voxel counts along x, y, z.
struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t count() const noexcept { return nx * ny * nz; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + nx * (y + ny * z);
  }
  std::size_t operator[](int axis) const noexcept { return axis == 0 ? nx : axis == 1 ? ny : nz; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Millimetres per voxel. Informational only; no filter consults it.
using Spacing = std::array<double, 3>;

/// Scalar 3D intensity grid, x fastest. Values are always finite.
class Volume3D {
 public:
  Volume3D() = default;
  Volume3D(Dims dims, std::vector<double> data, Spacing spacing = {1.0, 1.0, 1.0});
  /// Constant-valued volume.
  Volume3D(Dims dims, double value, Spacing spacing = {1.0, 1.0, 1.0});

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  std::span<const double> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return data_[dims_.index(x, y, z)];
  }

  double min() const;
  double max() const;

  /// Same geometry, new samples.
  Volume3D with_data(std::vector<double> data) const { return Volume3D(dims_, std::move(data), spacing_); }

 private:
  Dims dims_;
  Spacing spacing_{1.0, 1.0, 1.0};
  std::vector<double> data_;
};

/// Integer class grid; every label is below num_classes.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(Dims dims, std::vector<std::uint16_t> labels, int num_classes,
           Spacing spacing = {1.0, 1.0, 1.0});

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  int num_classes() const noexcept { return num_classes_; }
  std::span<const std::uint16_t> labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }
  int operator[](std::size_t i) const noexcept { return labels_[i]; }

  /// Largest label + 1 (at least 1).
  static int infer_num_classes(std::span<const std::uint16_t> labels);

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  Dims dims_;
  Spacing spacing_{1.0, 1.0, 1.0};
  std::vector<std::uint16_t> labels_;
  int num_classes_ = 0;
};

/// Population standard deviation floor below which a volume counts as constant.
inline constexpr double kDegenerateStdDev = 1e-12;

/// Zero-mean, unit-(population)-variance rescaling over all voxels.
/// Throws InvalidArgument on volumes with fewer than two voxels or no spread.
Volume3D normalize_zmuv(const Volume3D& vol);

}  // namespace texbias
