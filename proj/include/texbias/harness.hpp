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
#include <vector>

#include <nlohmann/json.hpp>

#include "texbias/metrics.hpp"
#include "texbias/phantom.hpp"
#include "texbias/segmenter.hpp"

namespace texbias {

/// A named training combination.
struct ModelEntry {
  std::string name;
  std::vector<std::string> datasets;

  friend bool operator==(const ModelEntry&, const ModelEntry&) = default;
};

/// The eleven training combinations, in canonical order.
std::vector<ModelEntry> default_model_grid();
/// The sixteen test conditions, in report row order.
std::vector<std::string> default_conditions();
/// Conditions never used for training by the default grid.
std::vector<std::string> held_out_conditions();

struct CohortConfig {
  /// Existing cohort directory; when set, no phantoms are generated.
  std::optional<std::filesystem::path> path;
  std::size_t count = 20;
  PhantomSpec phantom;
};

struct ExperimentConfig {
  CohortConfig cohort;
  std::vector<std::string> conditions = default_conditions();
  std::vector<ModelEntry> models = default_model_grid();
  /// Hyperparameters shared by every model; datasets, name and seed are filled per model.
  TrainConfig train;
  std::uint64_t seed = 1;
  std::filesystem::path output;
  unsigned jobs = 1;
  bool resume = false;

  /// Throws InvalidArgument on an empty grid, duplicate names or bad dataset names.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults.
  static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Per-unit seed derived from the master seed and a unit name.
std::uint64_t derive_seed(std::uint64_t master, const std::string& unit);

/// Cohort -> corrupted datasets -> training -> evaluation -> reports, under
/// cfg.output. A failing stage leaves its outputs plus a FAILED marker naming
/// the stage and throws Error(kStage).
RobustnessMatrix run_experiment(const ExperimentConfig& cfg);

enum class ReportFormat { kCsv, kMarkdown };

/// Per-class cells above this in every class mark a row in markdown reports.
inline constexpr double kReportHighlightDsc = 0.9;

/// One table per model, rows in condition order, four decimals. CSV tables
/// start with "condition,class_1,...,class_C"; with several models each table
/// is preceded by a "# <model>" line. Throws InvalidArgument on an incomplete matrix.
std::string emit_report(const RobustnessMatrix& matrix, ReportFormat format);

/// Parses emit_report CSV output back into a matrix (values quantized to 4 dp).
/// `default_model` names a table that has no "# <model>" line.
RobustnessMatrix parse_report_csv(const std::string& text, const std::string& default_model = "model");

/// Lossless JSON form, including per-subject values and both-empty flags.
nlohmann::json matrix_to_json(const RobustnessMatrix& m);
RobustnessMatrix matrix_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Slice export
// ---------------------------------------------------------------------------

enum class SliceAxis { kAxial, kCoronal, kSagittal };
SliceAxis slice_axis_from_string(const std::string& s);

/// Min-max windowed 8-bit grayscale PNG of one slice.
void export_slice(const Volume3D& vol, SliceAxis axis, std::size_t index, const std::filesystem::path& path);
/// RGB PNG with a fixed categorical palette.
void export_slice(const LabelMap& labels, SliceAxis axis, std::size_t index, const std::filesystem::path& path);

}  // namespace texbias
