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

#include "texbias/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "texbias/error.hpp"
#include "texbias/filters.hpp"
#include "texbias/io.hpp"
#include "texbias/parallel.hpp"

namespace texbias {

namespace fs = std::filesystem;

namespace {

// Engine-level helpers so the generator does not depend on the standard
// library's distribution implementations.
double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double box_muller(double u1, double u2) {
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double normal(std::mt19937_64& rng) {
  const double u1 = uniform01(rng);
  return box_muller(u1, uniform01(rng));
}

struct Ellipsoid {
  std::array<double, 3> center;
  std::array<double, 3> radii;

  double distance(double x, double y, double z) const {
    const double dx = (x - center[0]) / radii[0];
    const double dy = (y - center[1]) / radii[1];
    const double dz = (z - center[2]) / radii[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  }
};

/// Offset (in units of the brain radii) and relative radii for the small structures.
struct SmallStructure {
  std::array<double, 3> offset;
  std::array<double, 3> radii;
};

constexpr std::array<SmallStructure, 3> kSmallStructures{{
    {{0.0, -0.45, -0.45}, {0.30, 0.22, 0.20}},  // cerebellum-like
    {{0.0, -0.10, -0.62}, {0.13, 0.13, 0.26}},  // brainstem-like
    {{0.42, 0.05, -0.15}, {0.13, 0.24, 0.13}},  // hippocampus-like
}};

// Keeps small structures representable on coarse grids; never binds at 64^3.
constexpr double kMinStructureRadius = 1.5;

int small_count(int num_classes) { return std::min(3, (num_classes - 1) / 3); }

void validate(const PhantomSpec& spec) {
  if (spec.num_classes < 2) throw InvalidArgument("phantom needs at least 2 classes");
  if (spec.num_classes > 254) throw InvalidArgument("phantom supports at most 254 classes");
  const auto min_axis = min_phantom_axis(spec.num_classes);
  if (spec.dims.nx < min_axis || spec.dims.ny < min_axis || spec.dims.nz < min_axis)
    throw InvalidArgument("phantom dims too small for " + std::to_string(spec.num_classes) +
                          " classes (need >= " + std::to_string(min_axis) + " per axis)");
  if (!(spec.subject_scale >= 0.75 && spec.subject_scale <= 1.25))
    throw InvalidArgument("subject_scale must lie in [0.75, 1.25]");
  if (!spec.intensity_table.empty() && spec.intensity_table.size() != std::size_t(spec.num_classes))
    throw InvalidArgument("intensity_table length must equal num_classes");
  if (!(spec.intensity_jitter_sd >= 0.0) || !(spec.acquisition_noise_sd >= 0.0))
    throw InvalidArgument("phantom standard deviations must be non-negative");
}

}  // namespace

std::vector<double> default_intensity_table(int num_classes) {
  if (num_classes == 10) {
    // bg, outer tissue, csf, cortex, white matter, deep grey, ventricles,
    // cerebellum, brainstem, hippocampus
    return {0.0, 0.8, 2.0, 1.1, 1.7, 1.4, 2.3, 1.25, 1.55, 0.95};
  }
  std::vector<double> t(std::size_t(std::max(num_classes, 0)), 0.0);
  for (int k = 1; k < num_classes; ++k) t[std::size_t(k)] = 0.8 + 0.3 * double((k * 7) % (num_classes - 1));
  return t;
}

std::size_t min_phantom_axis(int num_classes) {
  return std::max<std::size_t>(8, std::size_t(std::ceil(1.6 * num_classes)));
}

Phantom generate_phantom(const PhantomSpec& spec) {
  validate(spec);
  const auto& d = spec.dims;
  const int c = spec.num_classes;
  const auto table = spec.intensity_table.empty() ? default_intensity_table(c) : spec.intensity_table;

  std::mt19937_64 rng(spec.seed);
  Ellipsoid brain;
  for (int a = 0; a < 3; ++a) {
    const double n = double(d[a]);
    brain.center[a] = (n - 1.0) / 2.0 + uniform(rng, -0.04, 0.04) * n;
    brain.radii[a] = 0.36 * n * spec.subject_scale * uniform(rng, 0.92, 1.08);
  }

  const int n_small = small_count(c);
  const int n_shells = c - 1 - n_small;
  std::vector<Ellipsoid> small(static_cast<std::size_t>(n_small));
  for (int s = 0; s < n_small; ++s) {
    const auto& proto = kSmallStructures[std::size_t(s)];
    for (int a = 0; a < 3; ++a) {
      small[s].center[a] = brain.center[a] + (proto.offset[a] + uniform(rng, -0.04, 0.04)) * brain.radii[a];
      small[s].radii[a] =
          std::max(kMinStructureRadius, proto.radii[a] * brain.radii[a] * uniform(rng, 0.9, 1.1));
    }
  }
  std::vector<double> means(table);
  for (auto& m : means) m += spec.intensity_jitter_sd * normal(rng);
  const std::uint64_t noise_seed = rng();

  // Shell k (1-based) covers normalized radius <= 1 - (k - 1) * step.
  const double step = n_shells > 0 ? 0.8 / double(n_shells) : 0.0;

  std::vector<std::uint16_t> labels(d.count(), 0);
  std::vector<double> data(d.count());
  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = d.index(x, y, z);
        int label = 0;
        const double r = brain.distance(double(x), double(y), double(z));
        if (r <= 1.0 && n_shells > 0) label = 1 + std::min(n_shells - 1, int((1.0 - r) / step));
        for (int s = 0; s < n_small; ++s)
          if (small[s].distance(double(x), double(y), double(z)) <= 1.0) label = n_shells + 1 + s;
        labels[i] = std::uint16_t(label);

        double v = means[std::size_t(label)];
        if (spec.acquisition_noise_sd > 0.0)
          v += spec.acquisition_noise_sd * box_muller(voxel_uniform(noise_seed, 2 * i), voxel_uniform(noise_seed, 2 * i + 1));
        data[i] = v;
      }
    }
  }

  Volume3D raw(d, std::move(data));
  return Phantom{normalize_zmuv(raw), LabelMap(d, std::move(labels), c)};
}

std::size_t min_class_voxels(const Dims& dims) {
  const double scaled = double(kMinClassVoxels) * double(dims.count()) / (64.0 * 64.0 * 64.0);
  return std::clamp(std::size_t(std::lround(scaled)), kMinClassVoxelsFloor, kMinClassVoxels);
}

bool phantom_is_valid(const LabelMap& labels) {
  std::vector<std::size_t> counts(std::size_t(labels.num_classes()), 0);
  for (auto l : labels.labels()) ++counts[l];
  const auto need = min_class_voxels(labels.dims());
  return std::all_of(counts.begin(), counts.end(), [need](std::size_t n) { return n >= need; });
}

Phantom generate_valid_phantom(PhantomSpec spec, int* retries, int max_retries) {
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    auto p = generate_phantom(spec);
    if (phantom_is_valid(p.labels)) {
      if (retries) *retries = attempt;
      return p;
    }
    ++spec.seed;
  }
  throw InvalidArgument("could not generate a phantom with every class present after " +
                        std::to_string(max_retries) + " retries");
}

CohortManifest generate_cohort(std::size_t n, const PhantomSpec& base, std::uint64_t seed,
                               const fs::path& dir, unsigned jobs) {
  const auto counts = split_counts(n);
  validate(base);

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create cohort directory " + dir.string());

  CohortManifest m;
  m.num_classes = base.num_classes;
  m.seed = seed;
  m.subjects.resize(n);
  std::mt19937_64 scale_rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    auto& e = m.subjects[i];
    char id[32];
    std::snprintf(id, sizeof(id), "sub-%03zu", i);
    e.id = id;
    e.volume_file = e.id + ".nii";
    e.label_file = e.id + std::string(kLabelSuffix) + ".nii";
    e.scale = uniform(scale_rng, 0.75, 1.25);
    e.split = i < counts.train ? Split::kTrain : i < counts.train + counts.val ? Split::kVal : Split::kTest;
  }

  parallel_for(n, jobs, [&](std::size_t i) {
    auto& e = m.subjects[i];
    PhantomSpec spec = base;
    spec.seed = seed + i;
    spec.subject_scale = e.scale;
    const auto p = generate_valid_phantom(spec, &e.retries);
    e.seed = spec.seed + std::uint64_t(e.retries);
    save_volume(p.volume, dir / e.volume_file);
    save_labelmap(p.labels, dir / e.label_file);
  });

  m.generator = {{"dims", {base.dims.nx, base.dims.ny, base.dims.nz}},
                 {"num_classes", base.num_classes},
                 {"intensity_table", base.intensity_table.empty() ? default_intensity_table(base.num_classes)
                                                                  : base.intensity_table},
                 {"intensity_jitter_sd", base.intensity_jitter_sd},
                 {"acquisition_noise_sd", base.acquisition_noise_sd},
                 {"count", n}};
  save_cohort_manifest(m, dir);
  return m;
}

}  // namespace texbias
