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

#include "texbias/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include "texbias/dataset.hpp"
#include "texbias/error.hpp"
#include "texbias/filters.hpp"
#include "texbias/io.hpp"

namespace texbias {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<ModelEntry> default_model_grid() {
  return {
      {"MODEL_T2Norm", {"t2norm"}},
      {"MODEL_GAUS1", {"gaus1"}},
      {"MODEL_GAUS3", {"gaus3"}},
      {"MODEL_GAUS4", {"gaus4"}},
      {"MODEL_GAUS134", {"gaus1", "gaus3", "gaus4"}},
      {"MODEL_SNP01", {"snp01"}},
      {"MODEL_SNP05", {"snp05"}},
      {"MODEL_SNP10", {"snp10"}},
      {"MODEL_SNP010510", {"snp01", "snp05", "snp10"}},
      {"MODEL_GAUS134_SNP010510", {"gaus1", "gaus3", "gaus4", "snp01", "snp05", "snp10"}},
      {"MODEL_MEDIAN5", {"median5"}},
  };
}

std::vector<std::string> default_conditions() {
  return {"t2norm", "gaus1", "gaus2", "gaus3", "gaus4", "gaus5", "snp01", "snp03",
          "snp05", "snp07", "snp10", "snp15", "snp20", "median2", "median5", "median8"};
}

std::vector<std::string> held_out_conditions() {
  return {"gaus2", "gaus5", "snp03", "snp07", "snp15", "snp20", "median2", "median8"};
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& unit) {
  std::uint64_t x = master ^ stable_hash(unit);
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (models.empty()) throw InvalidArgument("experiment has no models");
  if (conditions.empty()) throw InvalidArgument("experiment has no test conditions");
  if (output.empty()) throw InvalidArgument("experiment output directory is not set");
  std::set<std::string> seen;
  for (const auto& c : conditions) {
    NoiseSpec::parse(c);
    if (!seen.insert(c).second) throw InvalidArgument("duplicate condition \"" + c + "\"");
  }
  seen.clear();
  for (const auto& m : models) {
    if (m.name.empty() || !seen.insert(m.name).second)
      throw InvalidArgument("model names must be unique and non-empty");
    if (m.datasets.empty()) throw InvalidArgument("model " + m.name + " has no training datasets");
    for (const auto& d : m.datasets) NoiseSpec::parse(d);
  }
  if (!cohort.path && cohort.count < 3) throw InvalidArgument("cohort count must be >= 3");
  auto t = train;
  t.datasets = {"t2norm"};
  t.validate();
}

json ExperimentConfig::to_json() const {
  json models_j = json::array();
  for (const auto& m : models) models_j.push_back({{"name", m.name}, {"datasets", m.datasets}});
  json cohort_j = {{"count", cohort.count},
                   {"size", {cohort.phantom.dims.nx, cohort.phantom.dims.ny, cohort.phantom.dims.nz}},
                   {"classes", cohort.phantom.num_classes},
                   {"intensity_jitter_sd", cohort.phantom.intensity_jitter_sd},
                   {"acquisition_noise_sd", cohort.phantom.acquisition_noise_sd}};
  if (!cohort.phantom.intensity_table.empty()) cohort_j["intensity_table"] = cohort.phantom.intensity_table;
  if (cohort.path) cohort_j["path"] = cohort.path->string();
  return {{"cohort", cohort_j},
          {"conditions", conditions},
          {"models", models_j},
          {"train",
           {{"learning_rate", train.learning_rate},
            {"epochs", train.epochs},
            {"batch_size", train.batch_size},
            {"samples_per_volume", train.samples_per_volume},
            {"l2", train.l2},
            {"recipe", train.recipe.to_json()}}},
          {"seed", seed},
          {"output", output.string()},
          {"jobs", jobs}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("cohort")) {
      const auto& c = j.at("cohort");
      if (c.contains("path")) cfg.cohort.path = c.at("path").get<std::string>();
      cfg.cohort.count = c.value("count", cfg.cohort.count);
      if (c.contains("size")) {
        const auto s = c.at("size").get<std::vector<std::size_t>>();
        if (s.size() != 3) throw InvalidArgument("cohort.size must have 3 entries");
        cfg.cohort.phantom.dims = {s[0], s[1], s[2]};
      }
      cfg.cohort.phantom.num_classes = c.value("classes", cfg.cohort.phantom.num_classes);
      cfg.cohort.phantom.intensity_jitter_sd = c.value("intensity_jitter_sd", cfg.cohort.phantom.intensity_jitter_sd);
      cfg.cohort.phantom.acquisition_noise_sd = c.value("acquisition_noise_sd", cfg.cohort.phantom.acquisition_noise_sd);
      if (c.contains("intensity_table"))
        cfg.cohort.phantom.intensity_table = c.at("intensity_table").get<std::vector<double>>();
    }
    if (j.contains("conditions")) cfg.conditions = j.at("conditions").get<std::vector<std::string>>();
    if (j.contains("models")) {
      cfg.models.clear();
      for (const auto& m : j.at("models"))
        cfg.models.push_back({m.at("name").get<std::string>(), m.at("datasets").get<std::vector<std::string>>()});
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.samples_per_volume = t.value("samples_per_volume", cfg.train.samples_per_volume);
      cfg.train.l2 = t.value("l2", cfg.train.l2);
      if (t.contains("recipe")) cfg.train.recipe = FeatureRecipe::from_json(t.at("recipe"));
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
    cfg.jobs = j.value("jobs", cfg.jobs);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed experiment config: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kFailedMarker = "FAILED";

/// Runs one stage; on failure writes the marker and rethrows as a stage error.
template <typename Fn>
auto run_stage(const fs::path& root, const std::string& stage, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      std::cerr << "[" << stage << "] done in "
                << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s\n";
    } else {
      auto r = fn();
      std::cerr << "[" << stage << "] done in "
                << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s\n";
      return r;
    }
  } catch (const std::exception& e) {
    const std::string msg = "stage \"" + stage + "\" failed: " + e.what();
    try {
      write_file_atomic(root / kFailedMarker, msg + "\n");
    } catch (...) {
    }
    throw Error(ErrorKind::kStage, msg);
  }
}

bool cohort_matches(const fs::path& dir, const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!fs::exists(dir / kCohortManifest)) return false;
  try {
    const auto m = load_cohort_manifest(dir);
    if (m.seed != seed || m.subjects.size() != cfg.cohort.count ||
        m.num_classes != cfg.cohort.phantom.num_classes)
      return false;
    for (const auto& e : m.subjects)
      if (!fs::exists(dir / e.volume_file) || !fs::exists(dir / e.label_file)) return false;
    const auto& g = m.generator;
    const auto& p = cfg.cohort.phantom;
    return g.value("intensity_jitter_sd", -1.0) == p.intensity_jitter_sd &&
           g.value("acquisition_noise_sd", -1.0) == p.acquisition_noise_sd &&
           g.value("dims", std::vector<std::size_t>{}) == std::vector<std::size_t>{p.dims.nx, p.dims.ny, p.dims.nz};
  } catch (const std::exception&) {
    return false;
  }
}

bool dataset_matches(const fs::path& dir, const NoiseSpec& spec, std::uint64_t base_seed) {
  if (!fs::exists(dir / kDatasetManifest)) return false;
  try {
    const auto j = read_json(dir / kDatasetManifest);
    if (j.at("name") != spec.name() || j.at("spec") != noise_spec_to_json(spec) ||
        j.at("base_seed").get<std::uint64_t>() != base_seed)
      return false;
    auto files = j.at("files").get<std::vector<std::string>>();
    const auto labels = j.at("labels").get<std::vector<std::string>>();
    files.insert(files.end(), labels.begin(), labels.end());
    return content_crc(dir, files) == j.at("content_crc").get<std::uint32_t>();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

RobustnessMatrix run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& root = cfg.output;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw IoError("cannot create output directory " + root.string());
  fs::remove(root / kFailedMarker, ec);
  write_json(root / "experiment.json", cfg.to_json());

  // 1. cohort
  const std::uint64_t cohort_seed = derive_seed(cfg.seed, "cohort");
  const fs::path cohort_dir = cfg.cohort.path.value_or(root / "cohort");
  run_stage(root, "cohort", [&] {
    if (cfg.cohort.path) {
      load_cohort_manifest(*cfg.cohort.path);
      return;
    }
    if (cfg.resume && cohort_matches(cohort_dir, cfg, cohort_seed)) return;
    generate_cohort(cfg.cohort.count, cfg.cohort.phantom, cohort_seed, cohort_dir, cfg.jobs);
  });

  // 2. corrupted datasets: every test condition plus every training dataset
  std::vector<std::string> datasets = cfg.conditions;
  for (const auto& m : cfg.models)
    for (const auto& d : m.datasets)
      if (std::find(datasets.begin(), datasets.end(), d) == datasets.end()) datasets.push_back(d);
  const fs::path data_root = root / "datasets";
  run_stage(root, "corrupt", [&] {
    for (const auto& name : datasets) {
      const auto spec = NoiseSpec::parse(name);
      const auto base_seed = derive_seed(cfg.seed, "dataset/" + name);
      const auto dir = data_root / name;
      if (cfg.resume && dataset_matches(dir, spec, base_seed)) continue;
      corrupt_dataset(cohort_dir, spec, dir, base_seed, cfg.jobs);
    }
  });

  // 3. training
  std::vector<ModelParams> models;
  std::vector<std::string> names;
  run_stage(root, "train", [&] {
    fs::create_directories(root / "models");
    for (const auto& entry : cfg.models) {
      TrainConfig tc = cfg.train;
      tc.model_name = entry.name;
      tc.datasets = entry.datasets;
      tc.seed = derive_seed(cfg.seed, "model/" + entry.name);
      const auto path = root / "models" / (entry.name + ".json");
      if (cfg.resume && fs::exists(path)) {
        try {
          auto m = load_model(path);
          if (m.config.to_json() == tc.to_json()) {
            models.push_back(std::move(m));
            names.push_back(entry.name);
            continue;
          }
        } catch (const std::exception&) {
        }
      }
      auto m = train(tc, data_root, cfg.jobs);
      save_model(m, path);
      models.push_back(std::move(m));
      names.push_back(entry.name);
    }
  });

  // 4. evaluation
  auto matrix = run_stage(root, "evaluate", [&] {
    std::vector<fs::path> dirs;
    for (const auto& c : cfg.conditions) dirs.push_back(data_root / c);
    return evaluate_models(models, names, dirs, cfg.jobs);
  });

  // 5. reports
  run_stage(root, "report", [&] {
    write_file_atomic(root / "matrix.csv", emit_report(matrix, ReportFormat::kCsv));
    write_json(root / "matrix.json", matrix_to_json(matrix));
    write_file_atomic(root / "report.md", emit_report(matrix, ReportFormat::kMarkdown));

    json summary = {{"seed", cfg.seed}, {"models", json::object()}};
    const auto held_out = held_out_conditions();
    for (const auto& name : names) {
      json per_condition = json::object();
      double unseen = 0.0;
      std::size_t n_unseen = 0;
      for (const auto& c : cfg.conditions) {
        const auto& cell = matrix.at(name, c);
        DiceVector dv{cell.mean, {}};
        per_condition[c] = dv.mean_foreground();
        if (std::find(held_out.begin(), held_out.end(), c) != held_out.end()) {
          unseen += dv.mean_foreground();
          ++n_unseen;
        }
      }
      summary["models"][name] = {{"mean_foreground_dsc", per_condition}};
      if (n_unseen) summary["models"][name]["mean_unseen_dsc"] = unseen / double(n_unseen);
    }
    write_json(root / "summary.json", summary);
  });
  return matrix;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string emit_report(const RobustnessMatrix& matrix, ReportFormat format) {
  if (!matrix.complete()) throw InvalidArgument("cannot report an incomplete matrix");
  const auto c = std::size_t(matrix.num_classes());
  const bool many = matrix.models().size() > 1;
  std::ostringstream out;

  for (std::size_t m = 0; m < matrix.models().size(); ++m) {
    const auto& model = matrix.models()[m];
    if (format == ReportFormat::kCsv) {
      if (m > 0) out << "\n";
      if (many) out << "# " << model << "\n";
      out << "condition";
      for (std::size_t k = 1; k <= c; ++k) out << ",class_" << k;
      out << "\n";
      for (std::size_t ci = 0; ci < matrix.conditions().size(); ++ci) {
        const auto& cell = *matrix.cell(m, ci);
        out << matrix.conditions()[ci];
        for (std::size_t k = 0; k < c; ++k) out << "," << (cell.skipped ? "skipped" : fixed4(cell.mean[k]));
        out << "\n";
      }
      continue;
    }

    if (m > 0) out << "\n";
    out << "## " << model << "\n\n| Condition |";
    for (std::size_t k = 1; k <= c; ++k) out << " " << k << " |";
    out << "\n|---|";
    for (std::size_t k = 0; k < c; ++k) out << "---|";
    out << "\n";
    for (std::size_t ci = 0; ci < matrix.conditions().size(); ++ci) {
      const auto& cell = *matrix.cell(m, ci);
      const bool highlight = !cell.skipped && std::all_of(cell.mean.begin(), cell.mean.end(),
                                                          [](double v) { return v > kReportHighlightDsc; });
      out << "| " << (highlight ? "✓ " : "") << matrix.conditions()[ci] << " |";
      for (std::size_t k = 0; k < c; ++k) {
        if (cell.skipped)
          out << " skipped |";
        else if (!cell.all_both_empty.empty() && cell.all_both_empty[k])
          out << " — |";
        else
          out << " " << fixed4(cell.mean[k]) << " |";
      }
      out << "\n";
    }
  }
  return out.str();
}

RobustnessMatrix parse_report_csv(const std::string& text, const std::string& default_model) {
  struct Table {
    std::string model;
    std::vector<std::string> conditions;
    std::vector<std::optional<std::vector<double>>> rows;
  };
  std::vector<Table> tables;
  int num_classes = -1;
  std::string pending_model;

  std::istringstream in(text);
  std::string line;
  bool expect_header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      expect_header = true;
      continue;
    }
    if (line.rfind("# ", 0) == 0) {
      pending_model = line.substr(2);
      expect_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
    if (expect_header) {
      if (fields.empty() || fields[0] != "condition") throw FormatError("expected a condition,class_... header");
      const int c = int(fields.size()) - 1;
      if (num_classes >= 0 && c != num_classes) throw FormatError("tables disagree on class count");
      num_classes = c;
      tables.push_back({pending_model.empty() ? default_model : pending_model, {}, {}});
      pending_model.clear();
      expect_header = false;
      continue;
    }
    if (int(fields.size()) != num_classes + 1) throw FormatError("row has the wrong number of fields: " + line);
    auto& t = tables.back();
    t.conditions.push_back(fields[0]);
    if (fields[1] == "skipped") {
      t.rows.emplace_back();
      continue;
    }
    std::vector<double> values;
    for (std::size_t k = 1; k < fields.size(); ++k) {
      try {
        values.push_back(std::stod(fields[k]));
      } catch (const std::exception&) {
        throw FormatError("bad number \"" + fields[k] + "\"");
      }
    }
    t.rows.emplace_back(std::move(values));
  }
  if (tables.empty()) throw FormatError("no tables in report");

  std::vector<std::string> models;
  for (const auto& t : tables) {
    if (t.conditions != tables.front().conditions) throw FormatError("tables disagree on conditions");
    models.push_back(t.model);
  }
  RobustnessMatrix m(models, tables.front().conditions, num_classes);
  for (std::size_t mi = 0; mi < tables.size(); ++mi)
    for (std::size_t ci = 0; ci < tables[mi].rows.size(); ++ci) {
      if (!tables[mi].rows[ci]) {
        m.mark_skipped(mi, ci);
        continue;
      }
      MatrixCell cell;
      cell.mean = *tables[mi].rows[ci];
      m.set(mi, ci, std::move(cell));
    }
  return m;
}

json matrix_to_json(const RobustnessMatrix& m) {
  json cells = json::array();
  for (std::size_t mi = 0; mi < m.models().size(); ++mi)
    for (std::size_t ci = 0; ci < m.conditions().size(); ++ci) {
      const auto& cell = m.cell(mi, ci);
      if (!cell) {
        cells.push_back(nullptr);
        continue;
      }
      cells.push_back({{"model", m.models()[mi]},
                       {"condition", m.conditions()[ci]},
                       {"skipped", cell->skipped},
                       {"mean", cell->mean},
                       {"subjects", cell->subjects},
                       {"per_subject", cell->per_subject},
                       {"all_both_empty", cell->all_both_empty}});
    }
  return {{"models", m.models()}, {"conditions", m.conditions()}, {"num_classes", m.num_classes()}, {"cells", cells}};
}

RobustnessMatrix matrix_from_json(const json& j) {
  try {
    RobustnessMatrix m(j.at("models").get<std::vector<std::string>>(),
                       j.at("conditions").get<std::vector<std::string>>(), j.at("num_classes").get<int>());
    for (const auto& c : j.at("cells")) {
      if (c.is_null()) continue;
      const auto mi = m.model_index(c.at("model").get<std::string>());
      const auto ci = m.condition_index(c.at("condition").get<std::string>());
      if (c.at("skipped").get<bool>()) {
        m.mark_skipped(mi, ci);
        continue;
      }
      MatrixCell cell;
      cell.mean = c.at("mean").get<std::vector<double>>();
      cell.subjects = c.value("subjects", std::vector<std::string>{});
      cell.per_subject = c.value("per_subject", std::vector<std::vector<double>>{});
      cell.all_both_empty = c.value("all_both_empty", std::vector<bool>{});
      m.set(mi, ci, std::move(cell));
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed matrix JSON: ") + e.what());
  }
}

}  // namespace texbias
