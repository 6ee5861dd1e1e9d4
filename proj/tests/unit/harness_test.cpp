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

#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "texbias/dataset.hpp"
#include "texbias/error.hpp"
#include "texbias/harness.hpp"
#include "texbias/io.hpp"

namespace texbias {
namespace {

namespace fs = std::filesystem;

// The eleven training combinations, transcribed by hand.
const std::vector<ModelEntry> kExpectedGrid = {
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

TEST(Grid, MatchesElevenCombinations) { EXPECT_EQ(default_model_grid(), kExpectedGrid); }

TEST(Grid, HeldOutConditionsNeverTrainedOn) {
  const auto held_out = held_out_conditions();
  EXPECT_EQ(held_out, (std::vector<std::string>{"gaus2", "gaus5", "snp03", "snp07", "snp15", "snp20", "median2",
                                                "median8"}));
  for (const auto& m : default_model_grid())
    for (const auto& d : m.datasets)
      EXPECT_EQ(std::count(held_out.begin(), held_out.end(), d), 0) << m.name << " trains on " << d;
}

TEST(Grid, SixteenConditionsInCanonicalOrder) {
  const std::vector<std::string> expected = {"t2norm", "gaus1",  "gaus2",  "gaus3",  "gaus4",   "gaus5",
                                             "snp01",  "snp03",  "snp05",  "snp07",  "snp10",   "snp15",
                                             "snp20",  "median2", "median5", "median8"};
  EXPECT_EQ(default_conditions(), expected);
  // Held-out and trained-on conditions partition the test set.
  std::set<std::string> trained;
  for (const auto& m : default_model_grid()) trained.insert(m.datasets.begin(), m.datasets.end());
  EXPECT_EQ(trained.size() + held_out_conditions().size(), expected.size());
}

TEST(Seeds, DeriveSeedIsStableAndUnitSpecific) {
  EXPECT_EQ(derive_seed(1, "cohort"), derive_seed(1, "cohort"));
  EXPECT_NE(derive_seed(1, "cohort"), derive_seed(2, "cohort"));
  EXPECT_NE(derive_seed(1, "model/A"), derive_seed(1, "model/B"));
}

TEST(ExperimentConfig, JsonRoundTrip) {
  ExperimentConfig c;
  c.seed = 42;
  c.cohort.count = 7;
  c.cohort.phantom.dims = {20, 21, 22};
  c.train.epochs = 2;
  c.conditions = {"t2norm", "snp20"};
  c.models = {{"M", {"t2norm"}}};
  const auto back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.cohort.phantom.dims, (Dims{20, 21, 22}));
}

TEST(ExperimentConfig, ValidationErrors) {
  ExperimentConfig c;
  c.models.push_back(c.models.front());
  EXPECT_THROW(c.validate(), Error);
  c = ExperimentConfig{};
  c.conditions = {"gaus9x"};
  EXPECT_THROW(c.validate(), Error);
  c = ExperimentConfig{};
  c.models.clear();
  EXPECT_THROW(c.validate(), Error);
}

// ----------------------------------------------------------------- reports

RobustnessMatrix small_matrix() {
  RobustnessMatrix m({"A", "B"}, {"t2norm", "snp20"}, 3);
  MatrixCell good;
  good.mean = {0.99, 0.95, 0.91};
  MatrixCell mixed;
  mixed.mean = {0.98765, 0.5, 0.0};
  mixed.all_both_empty = {false, false, true};
  m.set(0, 0, good);
  m.set(0, 1, mixed);
  m.set(1, 0, mixed);
  m.mark_skipped(1, 1);
  return m;
}

TEST(Report, CsvLayout) {
  const auto csv = emit_report(small_matrix(), ReportFormat::kCsv);
  EXPECT_EQ(csv,
            "# A\n"
            "condition,class_1,class_2,class_3\n"
            "t2norm,0.9900,0.9500,0.9100\n"
            "snp20,0.9877,0.5000,0.0000\n"
            "\n"
            "# B\n"
            "condition,class_1,class_2,class_3\n"
            "t2norm,0.9877,0.5000,0.0000\n"
            "snp20,skipped,skipped,skipped\n");
}

TEST(Report, SingleModelCsvHasNoTitle) {
  RobustnessMatrix m({"A"}, {"t2norm"}, 2);
  MatrixCell c;
  c.mean = {1.0, 0.25};
  m.set(0, 0, c);
  EXPECT_EQ(emit_report(m, ReportFormat::kCsv), "condition,class_1,class_2\nt2norm,1.0000,0.2500\n");
}

TEST(Report, MarkdownMarksRowsAboveThreshold) {
  const auto md = emit_report(small_matrix(), ReportFormat::kMarkdown);
  EXPECT_NE(md.find("## A"), std::string::npos);
  EXPECT_NE(md.find("| ✓ t2norm | 0.9900 | 0.9500 | 0.9100 |"), std::string::npos);
  EXPECT_NE(md.find("| snp20 | 0.9877 | 0.5000 | — |"), std::string::npos);
  EXPECT_EQ(md.find("✓ snp20"), std::string::npos);
}

TEST(Report, IncompleteMatrixRejected) {
  RobustnessMatrix m({"A"}, {"t2norm"}, 2);
  EXPECT_THROW(emit_report(m, ReportFormat::kCsv), Error);
}

TEST(Report, CsvRoundTripIsExactAtFourDecimals) {
  const auto m = small_matrix();
  const auto csv = emit_report(m, ReportFormat::kCsv);
  const auto back = parse_report_csv(csv);
  EXPECT_EQ(back.models(), m.models());
  EXPECT_EQ(back.conditions(), m.conditions());
  EXPECT_EQ(back.at("A", "snp20").mean[0], 0.9877);
  EXPECT_TRUE(back.at("B", "snp20").skipped);
  EXPECT_EQ(emit_report(back, ReportFormat::kCsv), csv);
}

TEST(Report, MatrixJsonIsLossless) {
  const auto m = small_matrix();
  const auto back = matrix_from_json(matrix_to_json(m));
  EXPECT_EQ(back.at("A", "snp20").mean, m.at("A", "snp20").mean);
  EXPECT_EQ(back.at("A", "snp20").all_both_empty, m.at("A", "snp20").all_both_empty);
  EXPECT_EQ(emit_report(back, ReportFormat::kMarkdown), emit_report(m, ReportFormat::kMarkdown));
}

// ------------------------------------------------------------------ slices

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return std::uint32_t(b[off]) << 24 | std::uint32_t(b[off + 1]) << 16 | std::uint32_t(b[off + 2]) << 8 | b[off + 3];
}

TEST(Slice, WritesPngWithPlaneSize) {
  testing::TempDir dir;
  const auto v = testing::random_volume({7, 5, 3}, 1);
  const std::pair<SliceAxis, std::pair<std::uint32_t, std::uint32_t>> cases[] = {
      {SliceAxis::kAxial, {7, 5}}, {SliceAxis::kCoronal, {7, 3}}, {SliceAxis::kSagittal, {5, 3}}};
  for (auto [axis, wh] : cases) {
    export_slice(v, axis, 1, dir / "s.png");
    const auto b = read_file_bytes(dir / "s.png");
    ASSERT_GT(b.size(), 24u);
    EXPECT_EQ(b[1], 'P');
    EXPECT_EQ(b[2], 'N');
    EXPECT_EQ(b[3], 'G');
    EXPECT_EQ(be32(b, 16), wh.first);
    EXPECT_EQ(be32(b, 20), wh.second);
  }
  export_slice(testing::random_labels({7, 5, 3}, 4, 1), SliceAxis::kAxial, 2, dir / "l.png");
  EXPECT_TRUE(fs::exists(dir / "l.png"));
}

TEST(Slice, OutOfRangeIndexRejected) {
  testing::TempDir dir;
  EXPECT_THROW(export_slice(testing::random_volume({4, 4, 4}, 1), SliceAxis::kAxial, 4, dir / "s.png"), Error);
  EXPECT_THROW(slice_axis_from_string("oblique"), Error);
}

// -------------------------------------------------------------- end to end

ExperimentConfig tiny_experiment(const fs::path& out) {
  ExperimentConfig c;
  c.cohort.count = 4;
  c.cohort.phantom.dims = {20, 20, 20};
  c.cohort.phantom.num_classes = 4;
  c.conditions = {"t2norm", "gaus2", "snp05"};
  c.models = {{"MODEL_T2Norm", {"t2norm"}}, {"MODEL_SNP", {"snp01", "snp05"}}};
  c.train.epochs = 2;
  c.train.samples_per_volume = 256;
  c.train.batch_size = 64;
  c.seed = 3;
  c.output = out;
  return c;
}

TEST(RunExperiment, ProducesAllArtifactsDeterministically) {
  testing::TempDir a, b;
  const auto m = run_experiment(tiny_experiment(a.path()));
  EXPECT_TRUE(m.complete());
  EXPECT_EQ(m.models().size(), 2u);
  for (const char* f : {"experiment.json", "matrix.csv", "matrix.json", "report.md", "summary.json",
                        "models/MODEL_SNP.json", "datasets/snp01/dataset.json", "cohort/cohort.json"})
    EXPECT_TRUE(fs::exists(a / f)) << f;
  run_experiment(tiny_experiment(b.path()));
  EXPECT_EQ(read_file_bytes(a / "matrix.csv"), read_file_bytes(b / "matrix.csv"));
  const auto summary = read_json(a / "summary.json");
  EXPECT_TRUE(summary.at("models").at("MODEL_T2Norm").contains("mean_unseen_dsc"));
}

TEST(RunExperiment, ResumeReusesVerifiedOutputs) {
  testing::TempDir a;
  auto cfg = tiny_experiment(a.path());
  run_experiment(cfg);
  const auto model_time = fs::last_write_time(a / "models" / "MODEL_T2Norm.json");
  const auto csv = read_file_bytes(a / "matrix.csv");
  cfg.resume = true;
  run_experiment(cfg);
  EXPECT_EQ(fs::last_write_time(a / "models" / "MODEL_T2Norm.json"), model_time);
  EXPECT_EQ(read_file_bytes(a / "matrix.csv"), csv);

  // A tampered dataset no longer verifies and is rebuilt.
  save_volume(Volume3D({20, 20, 20}, 0.0), a / "datasets" / "snp05" / "sub-000.nii");
  run_experiment(cfg);
  EXPECT_EQ(read_file_bytes(a / "matrix.csv"), csv);
}

TEST(RunExperiment, FailedStageLeavesMarker) {
  testing::TempDir a;
  auto cfg = tiny_experiment(a / "out");
  cfg.cohort.path = a / "missing";
  try {
    run_experiment(cfg);
    FAIL() << "missing cohort accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kStage);
  }
  EXPECT_TRUE(fs::exists(a / "out" / "FAILED"));
}

}  // namespace
}  // namespace texbias
