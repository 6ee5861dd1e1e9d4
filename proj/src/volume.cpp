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

#include "texbias/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "texbias/error.hpp"

namespace texbias {

namespace {

void check_dims(const Dims& dims, std::size_t n) {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0)
    throw InvalidArgument("volume dims must be positive");
  if (dims.count() != n)
    throw InvalidArgument("data length " + std::to_string(n) + " does not match dims " +
                          std::to_string(dims.nx) + "x" + std::to_string(dims.ny) + "x" +
                          std::to_string(dims.nz));
}

}  // namespace

Volume3D::Volume3D(Dims dims, std::vector<double> data, Spacing spacing)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  check_dims(dims_, data_.size());
  for (double v : data_)
    if (!std::isfinite(v)) throw InvalidArgument("volume contains a non-finite value");
}

Volume3D::Volume3D(Dims dims, double value, Spacing spacing)
    : Volume3D(dims, std::vector<double>(dims.count(), value), spacing) {}

double Volume3D::min() const {
  if (data_.empty()) throw InvalidArgument("min of empty volume");
  return *std::min_element(data_.begin(), data_.end());
}

double Volume3D::max() const {
  if (data_.empty()) throw InvalidArgument("max of empty volume");
  return *std::max_element(data_.begin(), data_.end());
}

LabelMap::LabelMap(Dims dims, std::vector<std::uint16_t> labels, int num_classes, Spacing spacing)
    : dims_(dims), spacing_(spacing), labels_(std::move(labels)), num_classes_(num_classes) {
  check_dims(dims_, labels_.size());
  if (num_classes_ < 1) throw InvalidArgument("num_classes must be positive");
  for (auto l : labels_)
    if (l >= num_classes_)
      throw InvalidArgument("label " + std::to_string(l) + " >= num_classes " +
                            std::to_string(num_classes_));
}

int LabelMap::infer_num_classes(std::span<const std::uint16_t> labels) {
  if (labels.empty()) return 1;
  return int(*std::max_element(labels.begin(), labels.end())) + 1;
}

Volume3D normalize_zmuv(const Volume3D& vol) {
  const auto data = vol.data();
  const std::size_t n = data.size();
  if (n < 2) throw InvalidArgument("normalization needs at least two voxels");

  double mean = 0.0;
  for (double v : data) mean += v;
  mean /= double(n);

  double ss = 0.0;
  for (double v : data) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / double(n));
  if (!(sd > kDegenerateStdDev))
    throw InvalidArgument("cannot normalize a constant (degenerate) volume");

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (data[i] - mean) / sd;
  return vol.with_data(std::move(out));
}

}  // namespace texbias
