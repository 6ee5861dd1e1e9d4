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

#include "texbias/filters.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <regex>

#include "texbias/dataset.hpp"
#include "texbias/error.hpp"
#include "texbias/io.hpp"
#include "texbias/parallel.hpp"

namespace texbias {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

bool is_integral(double v) { return std::abs(v - std::round(v)) < 1e-9; }

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Index into [0, n) under half-sample symmetric reflection (a b c | c b a).
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = std::ptrdiff_t(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= std::ptrdiff_t(n)) m = period - 1 - m;
  return std::size_t(m);
}

/// One 1D pass of the separable blur along `axis`, edges clamped.
void convolve_axis(const std::vector<double>& in, std::vector<double>& out, const Dims& d, int axis,
                   const Kernel1D& k, unsigned jobs) {
  const std::size_t len = d[axis];
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? d.nx : d.nx * d.ny;
  // Lines are enumerated by their starting voxel; the other two axes span them.
  const std::size_t a_len = axis == 0 ? d.ny : d.nx;
  const std::size_t b_len = axis == 2 ? d.ny : d.nz;
  const std::size_t r = k.radius;

  parallel_for(b_len, jobs, [&](std::size_t b) {
    std::vector<double> line(len + 2 * r);
    for (std::size_t a = 0; a < a_len; ++a) {
      std::size_t start;
      if (axis == 0)
        start = d.index(0, a, b);
      else if (axis == 1)
        start = d.index(a, 0, b);
      else
        start = d.index(a, b, 0);

      for (std::size_t i = 0; i < len + 2 * r; ++i) {
        const auto src = std::clamp<std::ptrdiff_t>(std::ptrdiff_t(i) - std::ptrdiff_t(r), 0,
                                                    std::ptrdiff_t(len) - 1);
        line[i] = in[start + std::size_t(src) * stride];
      }
      for (std::size_t i = 0; i < len; ++i) {
        double acc = 0.0;
        for (std::size_t t = 0; t < k.weights.size(); ++t) acc += k.weights[t] * line[i + t];
        out[start + i * stride] = acc;
      }
    }
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// NoiseSpec
// ---------------------------------------------------------------------------

NoiseSpec::NoiseSpec(Variant v) : v_(std::move(v)) {
  if (const auto* g = std::get_if<Gaussian>(&v_)) {
    if (!(g->sigma > 0.0) || !std::isfinite(g->sigma))
      throw InvalidArgument("gaussian sigma must be positive, got " + format_number(g->sigma));
  } else if (const auto* m = std::get_if<Median>(&v_)) {
    if (m->size < 2) throw InvalidArgument("median size must be >= 2, got " + std::to_string(m->size));
  } else if (const auto* s = std::get_if<SaltPepper>(&v_)) {
    if (!(s->prob >= 0.0 && s->prob <= 0.5))
      throw InvalidArgument("salt-and-pepper prob must be in [0, 0.5], got " + format_number(s->prob));
  }
}

std::string NoiseSpec::name() const {
  struct Namer {
    std::string operator()(const Identity&) const { return "t2norm"; }
    std::string operator()(const Gaussian& g) const {
      return "gaus" + (is_integral(g.sigma) ? std::to_string(std::llround(g.sigma)) : format_number(g.sigma));
    }
    std::string operator()(const Median& m) const { return "median" + std::to_string(m.size); }
    std::string operator()(const SaltPepper& s) const {
      const double pct = s.prob * 100.0;
      if (!is_integral(pct)) return "snp" + format_number(pct);
      char buf[16];
      std::snprintf(buf, sizeof(buf), "snp%02lld", std::llround(pct));
      return buf;
    }
  };
  return std::visit(Namer{}, v_);
}

NoiseSpec NoiseSpec::parse(const std::string& name) {
  static const std::regex kPattern(R"(^(t2norm)$|^gaus([0-9]+(?:\.[0-9]+)?)$|^median([0-9]+)$|^snp([0-9]+(?:\.[0-9]+)?)$)");
  std::smatch m;
  if (!std::regex_match(name, m, kPattern)) throw InvalidArgument("unknown dataset name \"" + name + "\"");
  if (m[1].matched) return identity();
  if (m[2].matched) return gaussian(std::stod(m[2].str()));
  if (m[3].matched) return median(std::stoi(m[3].str()));
  return salt_pepper(std::stod(m[4].str()) / 100.0);
}

// ---------------------------------------------------------------------------
// Gaussian
// ---------------------------------------------------------------------------

Kernel1D gaussian_kernel_1d(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw InvalidArgument("gaussian sigma must be positive, got " + format_number(sigma));
  Kernel1D k;
  k.radius = std::size_t(std::ceil(kGaussianTruncate * sigma));
  const std::size_t len = 2 * k.radius + 1;
  k.weights.resize(len);
  // Fill one half and mirror it so the kernel is symmetric bit-for-bit.
  for (std::size_t i = 0; i <= k.radius; ++i) {
    const double d = double(i) - double(k.radius);
    k.weights[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    k.weights[len - 1 - i] = k.weights[i];
  }
  double sum = 0.0;
  for (double w : k.weights) sum += w;
  for (double& w : k.weights) w /= sum;
  return k;
}

Volume3D gaussian_blur(const Volume3D& vol, double sigma, unsigned jobs) {
  const auto k = gaussian_kernel_1d(sigma);
  const auto& d = vol.dims();
  std::vector<double> a(vol.data().begin(), vol.data().end());
  std::vector<double> b(a.size());
  convolve_axis(a, b, d, 0, k, jobs);
  convolve_axis(b, a, d, 1, k, jobs);
  convolve_axis(a, b, d, 2, k, jobs);
  return vol.with_data(std::move(b));
}

// ---------------------------------------------------------------------------
// Median
// ---------------------------------------------------------------------------

Volume3D median_filter(const Volume3D& vol, int size, unsigned jobs) {
  if (size < 2) throw InvalidArgument("median size must be >= 2, got " + std::to_string(size));
  const auto& d = vol.dims();
  const auto lo = -std::ptrdiff_t((size - 1) / 2);
  const auto w = std::size_t(size);

  // taps[axis][i * size + t] is the reflected source coordinate for offset lo + t.
  std::array<std::vector<std::size_t>, 3> taps;
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t n = d[axis];
    taps[axis].resize(n * w);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < w; ++t)
        taps[axis][i * w + t] = reflect_index(std::ptrdiff_t(i) + lo + std::ptrdiff_t(t), n);
  }

  const auto in = vol.data();
  std::vector<double> out(in.size());
  const std::size_t n_window = w * w * w;
  const std::size_t rank = n_window / 2;

  parallel_for(d.nz, jobs, [&](std::size_t z) {
    std::vector<double> window(n_window);
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        std::size_t k = 0;
        for (std::size_t tz = 0; tz < w; ++tz) {
          const std::size_t zz = taps[2][z * w + tz];
          for (std::size_t ty = 0; ty < w; ++ty) {
            const std::size_t row = d.nx * (taps[1][y * w + ty] + d.ny * zz);
            const std::size_t* xs = &taps[0][x * w];
            for (std::size_t tx = 0; tx < w; ++tx) window[k++] = in[row + xs[tx]];
          }
        }
        std::nth_element(window.begin(), window.begin() + std::ptrdiff_t(rank), window.end());
        out[d.index(x, y, z)] = window[rank];
      }
    }
  });
  return vol.with_data(std::move(out));
}

// ---------------------------------------------------------------------------
// Salt and pepper
// ---------------------------------------------------------------------------

double voxel_uniform(std::uint64_t seed, std::uint64_t index) noexcept {
  const std::uint64_t bits = splitmix64(seed ^ (index * 0x9E3779B97F4A7C15ULL));
  return double(bits >> 11) * 0x1.0p-53;
}

Volume3D salt_pepper(const Volume3D& vol, double prob, std::uint64_t seed, unsigned jobs,
                     std::optional<double> black, std::optional<double> white) {
  if (!(prob >= 0.0 && prob <= 0.5))
    throw InvalidArgument("salt-and-pepper prob must be in [0, 0.5], got " + format_number(prob));
  const double lo = black.value_or(vol.min());
  const double hi = white.value_or(vol.max());
  const auto in = vol.data();
  std::vector<double> out(in.begin(), in.end());
  const std::size_t n = out.size();
  const std::size_t chunk = 4096;
  parallel_for((n + chunk - 1) / chunk, jobs, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const double u = voxel_uniform(seed, i);
      if (u < prob)
        out[i] = lo;
      else if (u > 1.0 - prob)
        out[i] = hi;
    }
  });
  return vol.with_data(std::move(out));
}

Volume3D apply_noise(const Volume3D& vol, const NoiseSpec& spec, unsigned jobs,
                     std::optional<std::uint64_t> seed) {
  struct Apply {
    const Volume3D& vol;
    unsigned jobs;
    std::optional<std::uint64_t> seed;
    Volume3D operator()(const Identity&) const { return vol; }
    Volume3D operator()(const Gaussian& g) const { return gaussian_blur(vol, g.sigma, jobs); }
    Volume3D operator()(const Median& m) const { return median_filter(vol, m.size, jobs); }
    Volume3D operator()(const SaltPepper& s) const {
      return salt_pepper(vol, s.prob, seed.value_or(s.seed), jobs, s.black, s.white);
    }
  };
  return std::visit(Apply{vol, jobs, seed}, spec.variant());
}

// ---------------------------------------------------------------------------
// Dataset corruption
// ---------------------------------------------------------------------------

json noise_spec_to_json(const NoiseSpec& spec) {
  struct ToJson {
    json operator()(const Identity&) const { return {{"type", "identity"}}; }
    json operator()(const Gaussian& g) const { return {{"type", "gaussian"}, {"sigma", g.sigma}}; }
    json operator()(const Median& m) const { return {{"type", "median"}, {"size", m.size}}; }
    json operator()(const SaltPepper& s) const {
      json j = {{"type", "snp"}, {"prob", s.prob}};
      if (s.black) j["black"] = *s.black;
      if (s.white) j["white"] = *s.white;
      return j;
    }
  };
  return std::visit(ToJson{}, spec.variant());
}

namespace {

void copy_verbatim(const fs::path& from, const fs::path& to_dir) {
  std::error_code ec;
  fs::copy_file(from, to_dir / from.filename(), fs::copy_options::overwrite_existing, ec);
  if (ec) throw IoError("cannot copy " + from.string() + " to " + to_dir.string() + ": " + ec.message());
}

/// The file plus its raw payload, if it has one.
std::vector<fs::path> with_payload(const fs::path& p) {
  std::vector<fs::path> files{p};
  if (format_for_path(p) == VolumeFormat::kRaw) files.push_back(p.parent_path() / (volume_stem(p) + ".vol.bin"));
  return files;
}

}  // namespace

std::size_t corrupt_dataset(const fs::path& input_dir, const NoiseSpec& spec, const fs::path& output_dir,
                            std::uint64_t base_seed, unsigned jobs) {
  const auto volumes = list_intensity_volumes(input_dir);
  if (volumes.empty()) throw InvalidArgument("no volumes found in " + input_dir.string());

  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec || !fs::is_directory(output_dir)) throw IoError("cannot create output directory " + output_dir.string());
  if (fs::equivalent(input_dir, output_dir)) throw InvalidArgument("corruption output must differ from input");

  const bool identity = std::holds_alternative<Identity>(spec.variant());
  parallel_for(volumes.size(), jobs, [&](std::size_t i) {
    if (identity) {
      for (const auto& f : with_payload(volumes[i])) copy_verbatim(f, output_dir);
      return;
    }
    const auto vol = load_volume(volumes[i]);
    save_volume(apply_noise(vol, spec, 1, base_seed + i), output_dir / volumes[i].filename());
  });

  std::vector<std::string> files, labels;
  for (const auto& v : volumes) files.push_back(v.filename().string());
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    const auto& p = entry.path();
    if (entry.is_regular_file() && is_label_file(p)) {
      for (const auto& f : with_payload(p)) copy_verbatim(f, output_dir);
      labels.push_back(p.filename().string());
    }
  }
  std::sort(labels.begin(), labels.end());
  if (fs::exists(input_dir / kCohortManifest)) copy_verbatim(input_dir / kCohortManifest, output_dir);

  std::vector<std::string> hashed = files;
  hashed.insert(hashed.end(), labels.begin(), labels.end());
  json manifest = {{"name", spec.name()},
                   {"spec", noise_spec_to_json(spec)},
                   {"source", input_dir.string()},
                   {"base_seed", base_seed},
                   {"files", files},
                   {"labels", labels},
                   {"content_crc", content_crc(output_dir, hashed)}};
  write_json(output_dir / kDatasetManifest, manifest);
  return volumes.size();
}

}  // namespace texbias
