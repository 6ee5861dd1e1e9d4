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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "texbias/segmenter.hpp"
#include "texbias/volume.hpp"

namespace texbias {

enum class DiceFlag {
  kNormal,
  kBothEmpty,  // scored 1.0
  kOneEmpty,   // scored 0.0
};

/// Per-class Dice with how each class was scored.
struct DiceVector {
  std::vector<double> values;
  std::vector<DiceFlag> flags;

  std::size_t size() const noexcept { return values.size(); }
  /// Mean over classes 1..C-1.
  double mean_foreground() const;
};

/// 2 |pred = c and gt = c| / (|pred = c| + |gt = c|) for every class c.
DiceVector dice_per_class(const LabelMap& pred, const LabelMap& gt);

/// One model x condition entry: per-class Dice averaged over test subjects.
struct MatrixCell {
  bool skipped = false;
  std::vector<double> mean;                       // per class
  std::vector<std::string> subjects;              // sorted ids
  std::vector<std::vector<double>> per_subject;   // subjects x classes
  /// Classes that were empty in both maps for every subject.
  std::vector<bool> all_both_empty;
};

/// models x conditions x classes Dice tensor.
class RobustnessMatrix {
 public:
  RobustnessMatrix() = default;
  RobustnessMatrix(std::vector<std::string> models, std::vector<std::string> conditions, int num_classes);

  const std::vector<std::string>& models() const noexcept { return models_; }
  const std::vector<std::string>& conditions() const noexcept { return conditions_; }
  int num_classes() const noexcept { return num_classes_; }

  void set(std::size_t model, std::size_t condition, MatrixCell cell);
  void mark_skipped(std::size_t model, std::size_t condition);
  const std::optional<MatrixCell>& cell(std::size_t model, std::size_t condition) const;
  /// By name; throws InvalidArgument if absent or never set. Skipped cells are
  /// returned with `skipped` true.
  const MatrixCell& at(const std::string& model, const std::string& condition) const;

  /// Every cell either computed or explicitly skipped.
  bool complete() const;
  std::size_t model_index(const std::string& name) const;
  std::size_t condition_index(const std::string& name) const;

  /// Appends another matrix's rows (same conditions and classes).
  void append_models(const RobustnessMatrix& other);

 private:
  std::vector<std::string> models_;
  std::vector<std::string> conditions_;
  int num_classes_ = 0;
  std::vector<std::optional<MatrixCell>> cells_;
};

/// Predicts every test-split subject of each condition directory (named by
/// directory name) and averages per-class Dice across subjects in sorted id order.
RobustnessMatrix evaluate_model(const ModelParams& model, const std::string& model_name,
                                const std::vector<std::filesystem::path>& conditions, unsigned jobs = 1);

/// Shares feature extraction across models with the same recipe.
RobustnessMatrix evaluate_models(const std::vector<ModelParams>& models, const std::vector<std::string>& names,
                                 const std::vector<std::filesystem::path>& conditions, unsigned jobs = 1);

}  // namespace texbias
