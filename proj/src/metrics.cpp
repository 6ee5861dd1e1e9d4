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

#include "texbias/metrics.hpp"

#include <algorithm>

#include "texbias/dataset.hpp"
#include "texbias/error.hpp"
#include "texbias/io.hpp"
#include "texbias/parallel.hpp"

namespace texbias {

namespace fs = std::filesystem;

double DiceVector::mean_foreground() const {
  if (values.size() < 2) throw InvalidArgument("no foreground classes");
  double s = 0.0;
  for (std::size_t c = 1; c < values.size(); ++c) s += values[c];
  return s / double(values.size() - 1);
}

DiceVector dice_per_class(const LabelMap& pred, const LabelMap& gt) {
  if (pred.dims() != gt.dims()) throw InvalidArgument("dice: label map dims differ");
  if (pred.num_classes() != gt.num_classes()) throw InvalidArgument("dice: class counts differ");
  const auto c = std::size_t(gt.num_classes());
  std::vector<std::size_t> n_pred(c, 0), n_gt(c, 0), n_both(c, 0);
  const auto p = pred.labels();
  const auto g = gt.labels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    ++n_pred[p[i]];
    ++n_gt[g[i]];
    if (p[i] == g[i]) ++n_both[p[i]];
  }
  DiceVector out;
  out.values.resize(c);
  out.flags.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    if (n_pred[k] == 0 && n_gt[k] == 0) {
      out.values[k] = 1.0;
      out.flags[k] = DiceFlag::kBothEmpty;
    } else if (n_pred[k] == 0 || n_gt[k] == 0) {
      out.values[k] = 0.0;
      out.flags[k] = DiceFlag::kOneEmpty;
    } else {
      out.values[k] = 2.0 * double(n_both[k]) / double(n_pred[k] + n_gt[k]);
      out.flags[k] = DiceFlag::kNormal;
    }
  }
  return out;
}

RobustnessMatrix::RobustnessMatrix(std::vector<std::string> models, std::vector<std::string> conditions,
                                   int num_classes)
    : models_(std::move(models)),
      conditions_(std::move(conditions)),
      num_classes_(num_classes),
      cells_(models_.size() * conditions_.size()) {
  if (num_classes_ < 1) throw InvalidArgument("matrix needs at least one class");
}

void RobustnessMatrix::set(std::size_t model, std::size_t condition, MatrixCell cell) {
  if (model >= models_.size() || condition >= conditions_.size()) throw InvalidArgument("matrix cell out of range");
  if (!cell.skipped && cell.mean.size() != std::size_t(num_classes_))
    throw InvalidArgument("matrix cell class count mismatch");
  cells_[model * conditions_.size() + condition] = std::move(cell);
}

void RobustnessMatrix::mark_skipped(std::size_t model, std::size_t condition) {
  MatrixCell cell;
  cell.skipped = true;
  set(model, condition, std::move(cell));
}

const std::optional<MatrixCell>& RobustnessMatrix::cell(std::size_t model, std::size_t condition) const {
  if (model >= models_.size() || condition >= conditions_.size()) throw InvalidArgument("matrix cell out of range");
  return cells_[model * conditions_.size() + condition];
}

const MatrixCell& RobustnessMatrix::at(const std::string& model, const std::string& condition) const {
  const auto& c = cell(model_index(model), condition_index(condition));
  if (!c) throw InvalidArgument("no result for " + model + " on " + condition);
  return *c;
}

bool RobustnessMatrix::complete() const {
  return std::all_of(cells_.begin(), cells_.end(), [](const auto& c) { return c.has_value(); });
}

std::size_t RobustnessMatrix::model_index(const std::string& name) const {
  const auto it = std::find(models_.begin(), models_.end(), name);
  if (it == models_.end()) throw InvalidArgument("unknown model \"" + name + "\"");
  return std::size_t(it - models_.begin());
}

std::size_t RobustnessMatrix::condition_index(const std::string& name) const {
  const auto it = std::find(conditions_.begin(), conditions_.end(), name);
  if (it == conditions_.end()) throw InvalidArgument("unknown condition \"" + name + "\"");
  return std::size_t(it - conditions_.begin());
}

void RobustnessMatrix::append_models(const RobustnessMatrix& other) {
  if (other.conditions_ != conditions_ || other.num_classes_ != num_classes_)
    throw InvalidArgument("cannot append matrices with different conditions or classes");
  for (const auto& name : other.models_)
    if (std::find(models_.begin(), models_.end(), name) != models_.end())
      throw InvalidArgument("model \"" + name + "\" is already in the matrix");
  models_.insert(models_.end(), other.models_.begin(), other.models_.end());
  cells_.insert(cells_.end(), other.cells_.begin(), other.cells_.end());
}

RobustnessMatrix evaluate_model(const ModelParams& model, const std::string& model_name,
                                const std::vector<fs::path>& conditions, unsigned jobs) {
  return evaluate_models({model}, {model_name}, conditions, jobs);
}

RobustnessMatrix evaluate_models(const std::vector<ModelParams>& models, const std::vector<std::string>& names,
                                 const std::vector<fs::path>& conditions, unsigned jobs) {
  if (models.empty() || models.size() != names.size()) throw InvalidArgument("need one name per model");
  const int num_classes = models.front().num_classes;
  for (const auto& m : models) {
    m.validate();
    if (m.num_classes != num_classes) throw InvalidArgument("models disagree on class count");
  }

  struct Unit {
    std::size_t condition;
    std::string id;
    fs::path volume;
    fs::path labels;
  };
  std::vector<Unit> units;
  std::vector<std::string> condition_names;
  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    const auto& dir = conditions[ci];
    condition_names.push_back(dir.filename().string());
    auto test = load_cohort_manifest(dir).in_split(Split::kTest);
    if (test.empty()) throw InvalidArgument("condition " + dir.string() + " has no test subjects");
    std::sort(test.begin(), test.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& e : test) {
      if (!fs::exists(dir / e.label_file)) throw IoError("missing ground truth " + (dir / e.label_file).string());
      units.push_back({ci, e.id, dir / e.volume_file, dir / e.label_file});
    }
  }

  // Distinct recipes, so features are extracted once per recipe.
  std::vector<FeatureRecipe> recipes;
  std::vector<std::size_t> recipe_of(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    auto it = std::find(recipes.begin(), recipes.end(), models[m].recipe);
    if (it == recipes.end()) it = recipes.insert(recipes.end(), models[m].recipe);
    recipe_of[m] = std::size_t(it - recipes.begin());
  }

  // dice[unit][model]
  std::vector<std::vector<DiceVector>> dice(units.size(), std::vector<DiceVector>(models.size()));
  parallel_for(units.size(), jobs, [&](std::size_t u) {
    const auto vol = load_volume(units[u].volume);
    const auto gt = load_labelmap(units[u].labels, num_classes);
    if (gt.dims() != vol.dims()) throw FormatError("ground truth dims differ from volume: " + units[u].labels.string());
    for (std::size_t r = 0; r < recipes.size(); ++r) {
      const auto features = extract_features(vol, recipes[r]);
      for (std::size_t m = 0; m < models.size(); ++m)
        if (recipe_of[m] == r) dice[u][m] = dice_per_class(predict_features(models[m], features, vol.dims()), gt);
    }
  });

  RobustnessMatrix matrix(names, condition_names, num_classes);
  const auto c = std::size_t(num_classes);
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
      MatrixCell cell;
      cell.mean.assign(c, 0.0);
      cell.all_both_empty.assign(c, true);
      for (std::size_t u = 0; u < units.size(); ++u) {
        if (units[u].condition != ci) continue;
        const auto& dv = dice[u][m];
        cell.subjects.push_back(units[u].id);
        cell.per_subject.push_back(dv.values);
        for (std::size_t k = 0; k < c; ++k) {
          cell.mean[k] += dv.values[k];
          if (dv.flags[k] != DiceFlag::kBothEmpty) cell.all_both_empty[k] = false;
        }
      }
      for (auto& v : cell.mean) v /= double(cell.subjects.size());
      matrix.set(m, ci, std::move(cell));
    }
  }
  return matrix;
}

}  // namespace texbias
