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

#include "texbias/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>
#include <random>

#include "texbias/dataset.hpp"
#include "texbias/error.hpp"
#include "texbias/filters.hpp"
#include "texbias/io.hpp"
#include "texbias/parallel.hpp"

namespace texbias {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

std::string Feature::to_string() const {
  char buf[48];
  switch (kind) {
    case FeatureKind::kIntensity: return "intensity";
    case FeatureKind::kGaussian: std::snprintf(buf, sizeof(buf), "gaussian:%g", param); return buf;
    case FeatureKind::kMedian: std::snprintf(buf, sizeof(buf), "median:%g", param); return buf;
    case FeatureKind::kGradientMagnitude: std::snprintf(buf, sizeof(buf), "gradmag:%g", param); return buf;
    case FeatureKind::kCoordX: return "coord_x";
    case FeatureKind::kCoordY: return "coord_y";
    case FeatureKind::kCoordZ: return "coord_z";
  }
  return "intensity";
}

Feature Feature::parse(const std::string& s) {
  if (s == "intensity") return {FeatureKind::kIntensity, 0.0};
  if (s == "coord_x") return {FeatureKind::kCoordX, 0.0};
  if (s == "coord_y") return {FeatureKind::kCoordY, 0.0};
  if (s == "coord_z") return {FeatureKind::kCoordZ, 0.0};
  const auto colon = s.find(':');
  if (colon != std::string::npos) {
    const auto head = s.substr(0, colon);
    double param = 0.0;
    try {
      param = std::stod(s.substr(colon + 1));
    } catch (const std::exception&) {
      throw InvalidArgument("bad feature parameter in \"" + s + "\"");
    }
    if (head == "gaussian" && param > 0) return {FeatureKind::kGaussian, param};
    if (head == "median" && param >= 2 && param == std::floor(param)) return {FeatureKind::kMedian, param};
    if (head == "gradmag" && param > 0) return {FeatureKind::kGradientMagnitude, param};
  }
  throw InvalidArgument("unknown feature \"" + s + "\"");
}

FeatureRecipe FeatureRecipe::standard() {
  return {{{FeatureKind::kIntensity, 0.0},
           {FeatureKind::kGaussian, 1.0},
           {FeatureKind::kGaussian, 2.0},
           {FeatureKind::kGaussian, 4.0},
           {FeatureKind::kMedian, 3.0},
           {FeatureKind::kGradientMagnitude, 1.0},
           {FeatureKind::kCoordX, 0.0},
           {FeatureKind::kCoordY, 0.0},
           {FeatureKind::kCoordZ, 0.0}}};
}

json FeatureRecipe::to_json() const {
  json names = json::array();
  for (const auto& f : features) names.push_back(f.to_string());
  return {{"features", names}};
}

FeatureRecipe FeatureRecipe::from_json(const json& j) {
  FeatureRecipe r;
  try {
    for (const auto& s : j.at("features")) r.features.push_back(Feature::parse(s.get<std::string>()));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed feature recipe: ") + e.what());
  }
  if (r.features.empty()) throw FormatError("feature recipe is empty");
  return r;
}

Volume3D gradient_magnitude(const Volume3D& vol) {
  const auto& d = vol.dims();
  const auto v = vol.data();
  std::vector<double> out(v.size());
  const std::size_t strides[3] = {1, d.nx, d.nx * d.ny};

  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        const std::size_t i = d.index(x, y, z);
        const std::size_t coord[3] = {x, y, z};
        double sq = 0.0;
        for (int a = 0; a < 3; ++a) {
          const std::size_t n = d[a];
          if (n < 2) continue;
          const std::size_t s = strides[a];
          double g;
          if (coord[a] == 0)
            g = v[i + s] - v[i];
          else if (coord[a] == n - 1)
            g = v[i] - v[i - s];
          else
            g = 0.5 * (v[i + s] - v[i - s]);
          sq += g * g;
        }
        out[i] = std::sqrt(sq);
      }
    }
  }
  return vol.with_data(std::move(out));
}

FeatureMatrix extract_features(const Volume3D& vol, const FeatureRecipe& recipe, unsigned jobs) {
  const auto& d = vol.dims();
  FeatureMatrix m;
  m.rows = vol.size();
  m.cols = recipe.size();
  m.values.resize(m.rows * m.cols);

  std::map<double, Volume3D> blurred;
  auto blur = [&](double sigma) -> const Volume3D& {
    auto it = blurred.find(sigma);
    if (it == blurred.end()) it = blurred.emplace(sigma, gaussian_blur(vol, sigma, jobs)).first;
    return it->second;
  };
  auto put_column = [&](std::size_t col, std::span<const double> src) {
    for (std::size_t i = 0; i < m.rows; ++i) m.values[i * m.cols + col] = src[i];
  };

  for (std::size_t col = 0; col < recipe.size(); ++col) {
    const auto& f = recipe.features[col];
    switch (f.kind) {
      case FeatureKind::kIntensity: put_column(col, vol.data()); break;
      case FeatureKind::kGaussian: put_column(col, blur(f.param).data()); break;
      case FeatureKind::kMedian: put_column(col, median_filter(vol, int(f.param), jobs).data()); break;
      case FeatureKind::kGradientMagnitude: put_column(col, gradient_magnitude(blur(f.param)).data()); break;
      case FeatureKind::kCoordX:
      case FeatureKind::kCoordY:
      case FeatureKind::kCoordZ: {
        const int axis = f.kind == FeatureKind::kCoordX ? 0 : f.kind == FeatureKind::kCoordY ? 1 : 2;
        const double n = double(d[axis]);
        for (std::size_t z = 0; z < d.nz; ++z)
          for (std::size_t y = 0; y < d.ny; ++y)
            for (std::size_t x = 0; x < d.nx; ++x) {
              const std::size_t c[3] = {x, y, z};
              m.values[d.index(x, y, z) * m.cols + col] = double(c[axis]) / n;
            }
        break;
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (datasets.empty()) throw InvalidArgument("training needs at least one dataset");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (epochs < 1) throw InvalidArgument("epochs must be positive");
  if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (samples_per_volume < 1) throw InvalidArgument("samples_per_volume must be positive");
  if (!(l2 > 0.0)) throw InvalidArgument("l2 must be positive");
  if (recipe.features.empty()) throw InvalidArgument("feature recipe is empty");
}

json TrainConfig::to_json() const {
  return {{"model_name", model_name},
          {"datasets", datasets},
          {"learning_rate", learning_rate},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"samples_per_volume", samples_per_volume},
          {"seed", seed},
          {"l2", l2},
          {"recipe", recipe.to_json()}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    c.model_name = j.value("model_name", std::string{});
    c.datasets = j.at("datasets").get<std::vector<std::string>>();
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.samples_per_volume = j.value("samples_per_volume", c.samples_per_volume);
    c.seed = j.value("seed", c.seed);
    c.l2 = j.value("l2", c.l2);
    if (j.contains("recipe")) c.recipe = FeatureRecipe::from_json(j.at("recipe"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

void ModelParams::validate() const {
  if (num_classes < 2) throw InvalidArgument("model needs at least 2 classes");
  const std::size_t d = recipe.size();
  if (weights.size() != std::size_t(num_classes)) throw InvalidArgument("weight row count != num_classes");
  for (const auto& row : weights) {
    if (row.size() != d + 1) throw InvalidArgument("weight column count != D + 1");
    for (double w : row)
      if (!std::isfinite(w)) throw InvalidArgument("non-finite model weight");
  }
  if (feature_mean.size() != d || feature_sd.size() != d)
    throw InvalidArgument("feature statistics do not match the recipe");
  for (double s : feature_sd)
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("feature_sd must be positive");
}

json ModelParams::to_json() const {
  return {{"weights", weights},
          {"recipe", recipe.to_json()},
          {"feature_mean", feature_mean},
          {"feature_sd", feature_sd},
          {"num_classes", num_classes},
          {"config", config.to_json()},
          {"epoch_loss", epoch_loss},
          {"absent_classes", absent_classes}};
}

ModelParams ModelParams::from_json(const json& j) {
  ModelParams m;
  try {
    m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    m.recipe = FeatureRecipe::from_json(j.at("recipe"));
    m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    m.feature_sd = j.at("feature_sd").get<std::vector<double>>();
    m.num_classes = j.at("num_classes").get<int>();
    if (j.contains("config")) m.config = TrainConfig::from_json(j.at("config"));
    m.epoch_loss = j.value("epoch_loss", std::vector<double>{});
    m.absent_classes = j.value("absent_classes", std::vector<int>{});
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model: ") + e.what());
  }
  m.validate();
  return m;
}

void save_model(const ModelParams& model, const fs::path& path) { write_json(path, model.to_json()); }

ModelParams load_model(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such model file: " + path.string());
  return ModelParams::from_json(read_json(path));
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

namespace {

/// Scores W [x; 1] for one row.
void class_scores(std::span<const double> w, std::size_t c, std::span<const double> x, double* out) {
  const std::size_t d = x.size();
  for (std::size_t k = 0; k < c; ++k) {
    const double* wk = w.data() + k * (d + 1);
    double s = wk[d];
    for (std::size_t j = 0; j < d; ++j) s += wk[j] * x[j];
    out[k] = s;
  }
}

}  // namespace

LossAndGradient softmax_loss_and_gradient(std::span<const double> weights, std::size_t num_classes,
                                          std::span<const double> x, std::span<const int> y, double l2) {
  const std::size_t b = y.size();
  const std::size_t cols = weights.size() / num_classes;
  const std::size_t d = cols - 1;
  if (b == 0 || x.size() != b * d || cols * num_classes != weights.size())
    throw InvalidArgument("loss inputs have inconsistent shapes");

  LossAndGradient out;
  out.gradient.assign(weights.size(), 0.0);
  std::vector<double> p(num_classes);
  double ce = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const auto xi = x.subspan(i * d, d);
    class_scores(weights, num_classes, xi, p.data());
    const auto yi = std::size_t(y[i]);
    const double top = *std::max_element(p.begin(), p.end());
    const double target = p[yi];
    double z = 0.0;
    for (auto& v : p) z += (v = std::exp(v - top));
    for (auto& v : p) v /= z;
    ce += top + std::log(z) - target;
    for (std::size_t k = 0; k < num_classes; ++k) {
      const double delta = p[k] - (k == yi ? 1.0 : 0.0);
      double* g = out.gradient.data() + k * cols;
      for (std::size_t j = 0; j < d; ++j) g[j] += delta * xi[j];
      g[d] += delta;
    }
  }
  const double inv_b = 1.0 / double(b);
  double reg = 0.0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t idx = k * cols + j;
      out.gradient[idx] *= inv_b;
      if (j < d) {
        out.gradient[idx] += l2 * weights[idx];
        reg += weights[idx] * weights[idx];
      }
    }
  }
  out.loss = ce * inv_b + 0.5 * l2 * reg;
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::size_t draw_index(std::mt19937_64& rng, std::size_t n) { return std::size_t(rng() % n); }

/// Fisher-Yates on our own draws so results do not depend on the standard library.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw_index(rng, i)]);
}

/// Sampled training rows for one volume, for every epoch.
struct VolumeSamples {
  std::size_t dataset = 0;
  std::string id;
  std::vector<double> x;  // epochs * spv * D
  std::vector<int> y;     // epochs * spv
  std::vector<bool> present;
};

VolumeSamples sample_volume(const fs::path& vol_path, const fs::path& label_path, int num_classes,
                            const TrainConfig& cfg, std::uint64_t unit_seed) {
  const auto vol = load_volume(vol_path);
  const auto labels = load_labelmap(label_path, num_classes);
  if (labels.dims() != vol.dims())
    throw FormatError("label map dims differ from volume dims: " + label_path.string());
  const auto features = extract_features(vol, cfg.recipe);

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[std::size_t(labels[i])].push_back(i);

  VolumeSamples s;
  s.present.assign(std::size_t(num_classes), false);
  std::vector<int> present;
  for (int c = 0; c < num_classes; ++c)
    if (!by_class[std::size_t(c)].empty()) {
      present.push_back(c);
      s.present[std::size_t(c)] = true;
    }

  const std::size_t spv = cfg.samples_per_volume;
  const std::size_t per_class = spv / present.size();
  const std::size_t d = cfg.recipe.size();
  s.x.reserve(std::size_t(cfg.epochs) * spv * d);
  s.y.reserve(std::size_t(cfg.epochs) * spv);

  for (int e = 0; e < cfg.epochs; ++e) {
    std::mt19937_64 rng(mix_seed(unit_seed, std::uint64_t(e)));
    std::vector<std::size_t> picks;
    picks.reserve(spv);
    for (int c : present) {
      const auto& pool = by_class[std::size_t(c)];
      for (std::size_t k = 0; k < per_class; ++k) picks.push_back(pool[draw_index(rng, pool.size())]);
    }
    while (picks.size() < spv) picks.push_back(draw_index(rng, labels.size()));
    seeded_shuffle(picks, rng);
    for (auto i : picks) {
      const auto row = features.row(i);
      s.x.insert(s.x.end(), row.begin(), row.end());
      s.y.push_back(labels[i]);
    }
  }
  return s;
}

}  // namespace

ModelParams train(const TrainConfig& config, const fs::path& data_root, unsigned jobs) {
  config.validate();

  struct Unit {
    std::size_t dataset;
    fs::path volume;
    fs::path labels;
    std::string id;
  };
  std::vector<Unit> units;
  std::vector<std::vector<std::size_t>> units_by_dataset(config.datasets.size());
  int num_classes = 0;
  for (std::size_t ds = 0; ds < config.datasets.size(); ++ds) {
    const auto dir = data_root / config.datasets[ds];
    if (!fs::exists(dir / kCohortManifest))
      throw InvalidArgument("missing dataset \"" + config.datasets[ds] + "\" under " + data_root.string());
    const auto cohort = load_cohort_manifest(dir);
    num_classes = std::max(num_classes, cohort.num_classes);
    for (const auto& e : cohort.in_split(Split::kTrain)) {
      units_by_dataset[ds].push_back(units.size());
      units.push_back({ds, dir / e.volume_file, dir / e.label_file, e.id});
    }
    if (units_by_dataset[ds].empty())
      throw InvalidArgument("dataset \"" + config.datasets[ds] + "\" has no training subjects");
  }
  if (num_classes < 2) throw FormatError("training data declares fewer than 2 classes");

  std::vector<VolumeSamples> samples(units.size());
  parallel_for(units.size(), jobs, [&](std::size_t u) {
    const auto& unit = units[u];
    const std::uint64_t unit_seed =
        mix_seed(config.seed, stable_hash(config.datasets[unit.dataset] + "/" + unit.id));
    samples[u] = sample_volume(unit.volume, unit.labels, num_classes, config, unit_seed);
  });

  const std::size_t d = config.recipe.size();
  const std::size_t c = std::size_t(num_classes);
  ModelParams model;
  model.num_classes = num_classes;
  model.recipe = config.recipe;
  model.config = config;

  std::vector<bool> seen(c, false);
  for (const auto& s : samples)
    for (std::size_t k = 0; k < c; ++k)
      if (s.present[k]) seen[k] = true;
  for (std::size_t k = 0; k < c; ++k)
    if (!seen[k]) {
      model.absent_classes.push_back(int(k));
      std::cerr << "warning: class " << k << " is absent from every training volume; its weights stay zero\n";
    }

  // Standardization statistics over every sampled row, in unit order.
  model.feature_mean.assign(d, 0.0);
  model.feature_sd.assign(d, 0.0);
  std::size_t total = 0;
  for (const auto& s : samples) {
    for (std::size_t r = 0; r < s.y.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) model.feature_mean[j] += s.x[r * d + j];
    total += s.y.size();
  }
  for (auto& m : model.feature_mean) m /= double(total);
  for (const auto& s : samples)
    for (std::size_t r = 0; r < s.y.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) {
        const double dev = s.x[r * d + j] - model.feature_mean[j];
        model.feature_sd[j] += dev * dev;
      }
  for (auto& sd : model.feature_sd) {
    sd = std::sqrt(sd / double(total));
    if (!(sd > 1e-12)) sd = 1.0;
  }
  for (auto& s : samples)
    for (std::size_t r = 0; r < s.y.size(); ++r)
      for (std::size_t j = 0; j < d; ++j)
        s.x[r * d + j] = (s.x[r * d + j] - model.feature_mean[j]) / model.feature_sd[j];

  // Mini-batch SGD. Volumes are visited round-robin across datasets, each
  // dataset's subjects in a per-epoch shuffled order.
  std::vector<double> w(c * (d + 1), 0.0);
  const std::size_t spv = config.samples_per_volume;
  for (int e = 0; e < config.epochs; ++e) {
    std::mt19937_64 rng(mix_seed(config.seed, 0xE90C0000ULL + std::uint64_t(e)));
    auto order_by_dataset = units_by_dataset;
    for (auto& o : order_by_dataset) seeded_shuffle(o, rng);
    std::vector<std::size_t> order;
    for (std::size_t round = 0; order.size() < units.size(); ++round)
      for (const auto& o : order_by_dataset)
        if (round < o.size()) order.push_back(o[round]);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (auto u : order) {
      const auto& s = samples[u];
      const std::size_t base = std::size_t(e) * spv;
      for (std::size_t start = 0; start < spv; start += config.batch_size) {
        const std::size_t n = std::min(config.batch_size, spv - start);
        const std::span<const double> xb(s.x.data() + (base + start) * d, n * d);
        const std::span<const int> yb(s.y.data() + base + start, n);
        const auto lg = softmax_loss_and_gradient(w, c, xb, yb, config.l2);
        for (std::size_t k = 0; k < c; ++k) {
          if (!seen[k]) continue;
          for (std::size_t j = 0; j <= d; ++j) w[k * (d + 1) + j] -= config.learning_rate * lg.gradient[k * (d + 1) + j];
        }
        loss_sum += lg.loss * double(n);
        loss_count += n;
      }
    }
    model.epoch_loss.push_back(loss_sum / double(loss_count));
  }

  model.weights.assign(c, std::vector<double>(d + 1));
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t j = 0; j <= d; ++j) model.weights[k][j] = w[k * (d + 1) + j];
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

LabelMap predict_features(const ModelParams& model, const FeatureMatrix& features, const Dims& dims) {
  model.validate();
  const std::size_t d = model.recipe.size();
  if (features.cols != d) throw InvalidArgument("feature count does not match the model recipe");
  if (features.rows != dims.count()) throw InvalidArgument("feature rows do not match dims");

  const std::size_t c = std::size_t(model.num_classes);
  std::vector<std::uint16_t> labels(features.rows);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const auto row = features.row(i);
    for (std::size_t j = 0; j < d; ++j) x[j] = (row[j] - model.feature_mean[j]) / model.feature_sd[j];
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c; ++k) {
      const auto& wk = model.weights[k];
      double s = wk[d];
      for (std::size_t j = 0; j < d; ++j) s += wk[j] * x[j];
      if (s > best_score) {
        best_score = s;
        best = k;
      }
    }
    labels[i] = std::uint16_t(best);
  }
  return LabelMap(dims, std::move(labels), model.num_classes);
}

LabelMap predict(const ModelParams& model, const Volume3D& vol, unsigned jobs) {
  const auto features = extract_features(vol, model.recipe, jobs);
  auto out = predict_features(model, features, vol.dims());
  return LabelMap(vol.dims(), std::vector<std::uint16_t>(out.labels().begin(), out.labels().end()),
                  model.num_classes, vol.spacing());
}

}  // namespace texbias
