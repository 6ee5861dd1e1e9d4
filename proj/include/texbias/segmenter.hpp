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
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "texbias/volume.hpp"

namespace texbias {

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

enum class FeatureKind {
  kIntensity,
  kGaussian,           // param: sigma
  kMedian,             // param: window size
  kGradientMagnitude,  // param: sigma of the pre-smoothing blur
  kCoordX,
  kCoordY,
  kCoordZ,
};

struct Feature {
  FeatureKind kind = FeatureKind::kIntensity;
  double param = 0.0;

  /// "intensity", "gaussian:2", "median:3", "gradmag:1", "coord_x", ...
  std::string to_string() const;
  static Feature parse(const std::string& s);

  friend bool operator==(const Feature&, const Feature&) = default;
};

/// Ordered per-voxel feature list. Serialized with every model.
struct FeatureRecipe {
  std::vector<Feature> features;

  /// intensity, gaussian 1/2/4, median 3, gradient magnitude of the sigma=1
  /// blur, and normalized x/y/z coordinates (D = 9).
  static FeatureRecipe standard();

  std::size_t size() const noexcept { return features.size(); }
  nlohmann::json to_json() const;
  static FeatureRecipe from_json(const nlohmann::json& j);

  friend bool operator==(const FeatureRecipe&, const FeatureRecipe&) = default;
};

/// Row-major N x D matrix; row i holds voxel i's features.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

/// Central differences in the interior, one-sided differences on the faces, in
/// voxel units.
Volume3D gradient_magnitude(const Volume3D& vol);

FeatureMatrix extract_features(const Volume3D& vol, const FeatureRecipe& recipe, unsigned jobs = 1);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::string model_name;
  std::vector<std::string> datasets;
  double learning_rate = 0.05;
  int epochs = 5;
  std::size_t batch_size = 256;
  std::size_t samples_per_volume = 4096;
  std::uint64_t seed = 0;
  double l2 = 1e-4;
  FeatureRecipe recipe = FeatureRecipe::standard();

  /// Throws InvalidArgument unless there is a dataset and every hyperparameter is positive.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Multinomial logistic regression over standardized features.
struct ModelParams {
  int num_classes = 0;
  FeatureRecipe recipe;
  /// num_classes rows of (D + 1) entries; the last column is the bias.
  std::vector<std::vector<double>> weights;
  std::vector<double> feature_mean;
  std::vector<double> feature_sd;
  TrainConfig config;
  /// Mean training loss per epoch.
  std::vector<double> epoch_loss;
  /// Classes never seen in any training volume; their weights stay zero.
  std::vector<int> absent_classes;

  /// Throws InvalidArgument on shape mismatches or non-finite weights.
  void validate() const;
  nlohmann::json to_json() const;
  static ModelParams from_json(const nlohmann::json& j);
};

void save_model(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

/// Softmax cross-entropy averaged over the batch plus 0.5 * l2 * |W|^2 (bias
/// column excluded). `weights` is C x (D + 1) row-major, `x` is B x D row-major.
struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as weights
};
LossAndGradient softmax_loss_and_gradient(std::span<const double> weights, std::size_t num_classes,
                                          std::span<const double> x, std::span<const int> y,
                                          double l2);

/// Trains on the train split of every dataset named in config, each found at
/// data_root/<name>. Deterministic in (config, data) for any `jobs`.
ModelParams train(const TrainConfig& config, const std::filesystem::path& data_root, unsigned jobs = 1);

/// Per-voxel argmax of class scores; ties go to the lowest class index.
LabelMap predict(const ModelParams& model, const Volume3D& vol, unsigned jobs = 1);
/// Same, from features already extracted with model.recipe.
LabelMap predict_features(const ModelParams& model, const FeatureMatrix& features, const Dims& dims);

}  // namespace texbias
