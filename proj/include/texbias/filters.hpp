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
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "texbias/volume.hpp"

namespace texbias {

// ---------------------------------------------------------------------------
// Corruption descriptors
// ---------------------------------------------------------------------------

struct Identity {
  friend bool operator==(const Identity&, const Identity&) = default;
};
struct Gaussian {
  double sigma = 1.0;
  friend bool operator==(const Gaussian&, const Gaussian&) = default;
};
struct Median {
  int size = 3;
  friend bool operator==(const Median&, const Median&) = default;
};
struct SaltPepper {
  double prob = 0.0;
  std::uint64_t seed = 0;
  /// Paint values; default to the volume's own min and max.
  std::optional<double> black;
  std::optional<double> white;
  friend bool operator==(const SaltPepper&, const SaltPepper&) = default;
};

/// One textural corruption, named after the dataset it produces.
class NoiseSpec {
 public:
  using Variant = std::variant<Identity, Gaussian, Median, SaltPepper>;

  NoiseSpec() = default;
  /// Validates parameters; throws InvalidArgument.
  explicit NoiseSpec(Variant v);

  static NoiseSpec identity() { return NoiseSpec(Identity{}); }
  static NoiseSpec gaussian(double sigma) { return NoiseSpec(Gaussian{sigma}); }
  static NoiseSpec median(int size) { return NoiseSpec(Median{size}); }
  static NoiseSpec salt_pepper(double prob, std::uint64_t seed = 0) {
    return NoiseSpec(SaltPepper{prob, seed, {}, {}});
  }

  /// Inverse of name(): "t2norm", "gaus3", "median5", "snp15", ...
  static NoiseSpec parse(const std::string& name);

  const Variant& variant() const noexcept { return v_; }
  /// Canonical dataset name: t2norm, gausK, medianK, snpPP.
  std::string name() const;

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;

 private:
  Variant v_ = Identity{};
};

/// {"type": "gaussian", "sigma": 1}, {"type": "snp", "prob": 0.1}, ...
nlohmann::json noise_spec_to_json(const NoiseSpec& spec);

// ---------------------------------------------------------------------------
// Filters. All return a fresh volume with the input's geometry.
// ---------------------------------------------------------------------------

/// Symmetric, unit-sum 1D convolution kernel of length 2 * radius + 1.
struct Kernel1D {
  std::size_t radius = 0;
  std::vector<double> weights;
};

/// Truncation of the sampled Gaussian, in standard deviations.
inline constexpr double kGaussianTruncate = 4.0;

/// radius = ceil(4 * sigma); weights proportional to exp(-d^2 / (2 sigma^2)).
Kernel1D gaussian_kernel_1d(double sigma);

/// Separable convolution along x, y, then z with edge-clamped borders.
Volume3D gaussian_blur(const Volume3D& vol, double sigma, unsigned jobs = 1);

/// Cubic window of edge `size` covering offsets [-(size-1)/2, size/2] on every
/// axis, reflect-padded (a b c | c b a). Output is the sorted window's element at
/// rank n/2 (0-based, n = size^3).
Volume3D median_filter(const Volume3D& vol, int size, unsigned jobs = 1);

/// Counter-based uniform in [0, 1) for voxel `index` under `seed`; independent of
/// evaluation order.
double voxel_uniform(std::uint64_t seed, std::uint64_t index) noexcept;

/// u < prob paints black, u > 1 - prob paints white. Black/white default to the
/// volume's min/max.
Volume3D salt_pepper(const Volume3D& vol, double prob, std::uint64_t seed, unsigned jobs = 1,
                     std::optional<double> black = {}, std::optional<double> white = {});

/// Dispatches on the spec. For salt-and-pepper, `seed` overrides the spec's own.
Volume3D apply_noise(const Volume3D& vol, const NoiseSpec& spec, unsigned jobs = 1,
                     std::optional<std::uint64_t> seed = {});

// ---------------------------------------------------------------------------
// Dataset corruption
// ---------------------------------------------------------------------------

/// Corrupts every volume in input_dir into output_dir (same file names), copies
/// label maps and the cohort manifest verbatim, and writes dataset.json. Volume i
/// (sorted by file name) uses seed base_seed + i for salt-and-pepper.
/// Returns the number of volumes written.
std::size_t corrupt_dataset(const std::filesystem::path& input_dir, const NoiseSpec& spec,
                            const std::filesystem::path& output_dir, std::uint64_t base_seed = 0,
                            unsigned jobs = 1);

}  // namespace texbias
