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

// Command-line front end: phantom, corrupt, normalize, train, predict, dice,
// evaluate, run, report, slice.
//
// Exit codes: 0 success, 1 validation error, 2 stage or I/O failure.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "texbias/dataset.hpp"
#include "texbias/error.hpp"
#include "texbias/filters.hpp"
#include "texbias/harness.hpp"
#include "texbias/io.hpp"
#include "texbias/metrics.hpp"
#include "texbias/phantom.hpp"
#include "texbias/segmenter.hpp"

namespace fs = std::filesystem;
using namespace texbias;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitFailure = 2;

struct Globals {
  std::uint64_t seed = 1;
  unsigned jobs = 0;
  bool resume = false;
};

Dims parse_dims(const std::string& s) {
  std::vector<std::size_t> v;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      v.push_back(std::stoul(part));
    } catch (const std::exception&) {
      throw InvalidArgument("bad size \"" + s + "\" (expected X,Y,Z)");
    }
  }
  if (v.size() == 1) v = {v[0], v[0], v[0]};
  if (v.size() != 3) throw InvalidArgument("bad size \"" + s + "\" (expected X,Y,Z)");
  return {v[0], v[1], v[2]};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');)
    if (!part.empty()) out.push_back(part);
  return out;
}

void print_dice(const DiceVector& dv) {
  std::cout << "class,dsc,flag\n";
  for (std::size_t k = 0; k < dv.size(); ++k) {
    const char* flag = dv.flags[k] == DiceFlag::kBothEmpty ? "both-empty"
                       : dv.flags[k] == DiceFlag::kOneEmpty ? "one-empty"
                                                            : "normal";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", dv.values[k]);
    std::cout << k << "," << buf << "," << flag << "\n";
  }
  if (dv.size() > 1) std::cout << "# mean foreground DSC " << dv.mean_foreground() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Textural-corruption robustness experiments on 3D volumes"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_flag("--resume", g.resume, "Skip stages whose outputs verify");

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic labelled cohort");
  std::size_t count = 20;
  std::string size = "64,64,64";
  int classes = 10;
  std::string out_dir;
  phantom->add_option("--count", count, "Number of subjects")->capture_default_str();
  phantom->add_option("--size", size, "Volume size X,Y,Z")->capture_default_str();
  phantom->add_option("--classes", classes, "Number of classes including background")->capture_default_str();
  phantom->add_option("--out", out_dir, "Output directory")->required();

  // corrupt
  auto* corrupt = app.add_subcommand("corrupt", "Apply a textural corruption to every volume in a dataset");
  std::string filter, in_path;
  double sigma = 1.0, prob = 0.0;
  int median_size = 3;
  std::optional<std::uint64_t> snp_seed;
  std::optional<double> black, white;
  corrupt->add_option("--filter", filter, "identity | gaussian | median | snp")
      ->required()
      ->check(CLI::IsMember({"identity", "gaussian", "median", "snp"}));
  corrupt->add_option("--sigma", sigma, "Gaussian sigma");
  corrupt->add_option("--size", median_size, "Median window edge");
  corrupt->add_option("--prob", prob, "Salt-and-pepper probability in [0, 0.5]");
  corrupt->add_option("--seed", snp_seed, "Salt-and-pepper base seed (default: global --seed)");
  corrupt->add_option("--black", black, "Override the pepper value");
  corrupt->add_option("--white", white, "Override the salt value");
  corrupt->add_option("--in", in_path, "Input dataset directory")->required();
  corrupt->add_option("--out", out_dir, "Output dataset directory")->required();

  // normalize
  auto* normalize = app.add_subcommand("normalize", "Zero-mean, unit-variance normalization of one volume");
  normalize->add_option("--in", in_path, "Input volume")->required();
  normalize->add_option("--out", out_dir, "Output volume")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the reference segmenter");
  std::string config_path, data_dir, model_path;
  train_cmd->add_option("--config", config_path, "Training config JSON")->required();
  train_cmd->add_option("--data", data_dir, "Directory holding one subdirectory per dataset")->required();
  train_cmd->add_option("--out", model_path, "Output model JSON")->required();

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Segment one volume");
  predict_cmd->add_option("--model", model_path, "Model JSON")->required();
  predict_cmd->add_option("--in", in_path, "Input volume")->required();
  predict_cmd->add_option("--out", out_dir, "Output label map")->required();

  // dice
  auto* dice_cmd = app.add_subcommand("dice", "Per-class Dice between two label maps");
  std::string pred_path, gt_path;
  std::optional<int> dice_classes;
  dice_cmd->add_option("--pred", pred_path, "Predicted label map")->required();
  dice_cmd->add_option("--gt", gt_path, "Ground-truth label map")->required();
  dice_cmd->add_option("--classes", dice_classes, "Number of classes (default: inferred)");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a model on test conditions");
  std::string conditions;
  std::string format = "md";
  evaluate_cmd->add_option("--model", model_path, "Model JSON")->required();
  evaluate_cmd->add_option("--data", data_dir, "Directory holding one subdirectory per condition")->required();
  evaluate_cmd->add_option("--conditions", conditions, "Comma-separated condition names (default: all 16)");
  evaluate_cmd->add_option("--format", format, "md | csv")->check(CLI::IsMember({"md", "csv"}));
  evaluate_cmd->add_option("--out", out_dir, "Write the report here instead of stdout");

  // run
  auto* run_cmd = app.add_subcommand("run", "Run the full experiment grid");
  std::string run_out;
  run_cmd->add_option("--config", config_path, "experiment.json (default: built-in grid)");
  run_cmd->add_option("--out", run_out, "Output root (overrides the config)");

  // report
  auto* report_cmd = app.add_subcommand("report", "Render a stored matrix");
  std::string matrix_path;
  report_cmd->add_option("--matrix", matrix_path, "matrix.json or matrix.csv")->required();
  report_cmd->add_option("--format", format, "md | csv")->check(CLI::IsMember({"md", "csv"}));

  // slice
  auto* slice_cmd = app.add_subcommand("slice", "Export one slice as PNG");
  std::string axis = "axial";
  std::size_t index = 0;
  bool as_labels = false;
  slice_cmd->add_option("--in", in_path, "Volume or label map")->required();
  slice_cmd->add_option("--axis", axis, "axial | coronal | sagittal")
      ->check(CLI::IsMember({"axial", "coronal", "sagittal"}));
  slice_cmd->add_option("--index", index, "Slice index")->required();
  slice_cmd->add_flag("--labels", as_labels, "Render with the categorical label palette");
  slice_cmd->add_option("--out", out_dir, "Output PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*phantom) {
      PhantomSpec spec;
      spec.dims = parse_dims(size);
      spec.num_classes = classes;
      const auto m = generate_cohort(count, spec, g.seed, out_dir, g.jobs);
      const auto c = split_counts(count);
      std::cout << "wrote " << m.subjects.size() << " subjects (train " << c.train << ", val " << c.val
                << ", test " << c.test << ") to " << out_dir << "\n";
    } else if (*corrupt) {
      NoiseSpec spec;
      if (filter == "identity")
        spec = NoiseSpec::identity();
      else if (filter == "gaussian")
        spec = NoiseSpec::gaussian(sigma);
      else if (filter == "median")
        spec = NoiseSpec::median(median_size);
      else
        spec = NoiseSpec(SaltPepper{prob, 0, black, white});
      const auto n = corrupt_dataset(in_path, spec, out_dir, snp_seed.value_or(g.seed), g.jobs);
      std::cout << "wrote " << n << " volumes as " << spec.name() << " to " << out_dir << "\n";
    } else if (*normalize) {
      save_volume(normalize_zmuv(load_volume(in_path)), out_dir);
    } else if (*train_cmd) {
      auto j = read_json(config_path);
      if (j.contains("train") && !j.contains("datasets")) j = j.at("train");
      auto tc = TrainConfig::from_json(j);
      if (!j.contains("seed")) tc.seed = g.seed;
      const auto model = train(tc, data_dir, g.jobs);
      save_model(model, model_path);
      std::cout << "final epoch loss " << model.epoch_loss.back() << "\n";
    } else if (*predict_cmd) {
      const auto model = load_model(model_path);
      save_labelmap(predict(model, load_volume(in_path), g.jobs), out_dir);
    } else if (*dice_cmd) {
      const auto gt = load_labelmap(gt_path, dice_classes);
      const auto pred = load_labelmap(pred_path, gt.num_classes());
      print_dice(dice_per_class(pred, gt));
    } else if (*evaluate_cmd) {
      const auto model = load_model(model_path);
      std::vector<fs::path> dirs;
      for (const auto& c : conditions.empty() ? default_conditions() : split_list(conditions))
        dirs.push_back(fs::path(data_dir) / c);
      const auto name = model.config.model_name.empty() ? fs::path(model_path).stem().string() : model.config.model_name;
      const auto matrix = evaluate_model(model, name, dirs, g.jobs);
      const auto text = emit_report(matrix, format == "csv" ? ReportFormat::kCsv : ReportFormat::kMarkdown);
      if (out_dir.empty())
        std::cout << text;
      else
        write_file_atomic(out_dir, text);
    } else if (*run_cmd) {
      ExperimentConfig cfg;
      if (!config_path.empty()) cfg = ExperimentConfig::from_json(read_json(config_path));
      if (app.count("--seed") || config_path.empty()) cfg.seed = g.seed;
      if (app.count("--jobs") || config_path.empty()) cfg.jobs = g.jobs;
      if (!run_out.empty()) cfg.output = run_out;
      if (cfg.output.empty()) cfg.output = "texbias-run";
      cfg.resume = g.resume;
      run_experiment(cfg);
      std::cout << "wrote " << (cfg.output / "matrix.csv").string() << "\n";
    } else if (*report_cmd) {
      RobustnessMatrix m;
      if (fs::path(matrix_path).extension() == ".json") {
        m = matrix_from_json(read_json(matrix_path));
      } else {
        const auto bytes = read_file_bytes(matrix_path);
        m = parse_report_csv(std::string(bytes.begin(), bytes.end()));
      }
      std::cout << emit_report(m, format == "csv" ? ReportFormat::kCsv : ReportFormat::kMarkdown);
    } else if (*slice_cmd) {
      const auto ax = slice_axis_from_string(axis);
      if (as_labels)
        export_slice(load_labelmap(in_path), ax, index, out_dir);
      else
        export_slice(load_volume(in_path), ax, index, out_dir);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kInvalidArgument || e.kind() == ErrorKind::kFormat ? kExitValidation
                                                                                     : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
