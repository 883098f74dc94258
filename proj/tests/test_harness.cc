// Copyright 2026 The PETS-cpp Authors
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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pets/harness/config.h"
#include "pets/harness/experiment.h"
#include "pets/harness/export.h"

namespace {

namespace fs = std::filesystem;
using namespace pets::harness;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pets_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

ExperimentConfig tiny() {
  ExperimentConfig cfg;
  cfg.name = "tiny";
  cfg.trials = 3;
  cfg.task_horizon = 8;
  cfg.seeds = {0, 1};
  cfg.model.hidden_widths = {8};
  cfg.model.epochs = 2;
  cfg.model.ensemble_size = 2;
  cfg.planner.horizon = 3;
  cfg.planner.population = 10;
  cfg.planner.iterations = 2;
  cfg.planner.elites = 3;
  cfg.planner.particles = 4;
  return cfg;
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig cfg = tiny();
  cfg.dynamics = DynamicsSource::kGroundTruth;
  cfg.sweep.horizons = {2, 4};
  cfg.sweep.noise_fractions = {0.0, 0.1};
  cfg.sweep.grid = {"PE-TS1", "D-E"};
  cfg.planner.propagation = pets::prop::Propagation::kDS;
  cfg.model.model_class = pets::dyn::ModelClass::kDE;
  const ExperimentConfig back = config_from_json(to_json(cfg));
  EXPECT_EQ(back, cfg);
  EXPECT_EQ(canonical_json(back), canonical_json(cfg));
  EXPECT_EQ(config_hash(back), config_hash(cfg));
  EXPECT_EQ(config_hash(cfg).size(), 16u);
  ExperimentConfig other = cfg;
  other.trials += 1;
  EXPECT_NE(config_hash(other), config_hash(cfg));
}

TEST(Config, PartialDocumentKeepsDefaults) {
  const auto cfg = config_from_json(nlohmann::json::parse(R"({"trials": 4})"));
  ExperimentConfig expect;
  expect.trials = 4;
  EXPECT_EQ(cfg, expect);
}

TEST(Config, RejectsUnknownAndInvalidFields) {
  using nlohmann::json;
  EXPECT_THROW(config_from_json(json::parse(R"({"trails": 4})")), std::invalid_argument);
  EXPECT_THROW(config_from_json(json::parse(R"({"model": {"width": 4}})")),
               std::invalid_argument);
  EXPECT_THROW(config_from_json(json::parse(R"({"planner": {"horizon": 0}})")),
               std::invalid_argument);
  EXPECT_THROW(config_from_json(json::parse(R"({"dynamics": "oracle"})")),
               std::invalid_argument);
  EXPECT_THROW(config_from_json(json::parse(R"({"sweep": {"grid": ["PE-XX"]}})")),
               std::invalid_argument);
  EXPECT_THROW(config_from_json(json::parse(R"({"trials": 0})")), std::invalid_argument);
}

TEST(Config, LoadsFromFileAndResolvesOutputRoot) {
  const fs::path dir = scratch("config");
  {
    std::ofstream out(dir / "c.json");
    out << R"({"name": "abc", "seeds": [3]})";
  }
  const auto cfg = load_config(dir / "c.json");
  EXPECT_EQ(cfg.name, "abc");
  EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{3});
  EXPECT_THROW(load_config(dir / "missing.json"), std::exception);

  const char* old = std::getenv("PETS_OUTPUT_ROOT");
  const std::string saved = old ? old : "";
  setenv("PETS_OUTPUT_ROOT", dir.c_str(), 1);
  EXPECT_EQ(output_root(), dir);
  EXPECT_EQ(resolve_run_dir(cfg), dir / "abc");
  if (old) {
    setenv("PETS_OUTPUT_ROOT", saved.c_str(), 1);
  } else {
    unsetenv("PETS_OUTPUT_ROOT");
  }
}

TEST(Stats, OrderStatistics) {
  const std::vector<double> five{5, 1, 4, 2, 3};
  EXPECT_EQ(percentile(five, 5), 1.0);
  EXPECT_EQ(percentile(five, 95), 5.0);
  EXPECT_EQ(percentile(five, 50), 3.0);
  EXPECT_EQ(median(five), 3.0);
  EXPECT_EQ(mean(five), 3.0);
  const std::vector<double> four{4, 1, 3, 2};
  EXPECT_EQ(median(four), 2.5);
  EXPECT_EQ(interquartile_range(five), 2.0);
}

TEST(Export, MaxSoFar) {
  const std::vector<double> r{1, 3, 2};
  EXPECT_EQ(max_so_far(r), (std::vector<double>{1, 3, 3}));
  EXPECT_TRUE(max_so_far(std::vector<double>{}).empty());
}

TEST(Export, BandsAcrossSeeds) {
  const std::vector<SeedCurve> one{{7, {1.0, 0.5, 2.0}}};
  for (const auto& b : curve_bands(one)) {
    EXPECT_EQ(b.low, b.high);
    EXPECT_EQ(b.mean, b.low);
    EXPECT_EQ(b.seeds, 1u);
  }
  const std::vector<SeedCurve> two{{0, {1.0, 0.5}}, {1, {3.0, 4.0}}};
  const auto bands = curve_bands(two);
  ASSERT_EQ(bands.size(), 2u);
  EXPECT_EQ(bands[1].low, 1.0);
  EXPECT_EQ(bands[1].high, 4.0);
  EXPECT_EQ(bands[1].mean, 2.5);
}

TEST(Ablation, CollapsedLabels) {
  EXPECT_EQ(collapsed_label("D-TS1"), "D-E");
  EXPECT_EQ(collapsed_label("D-MM"), "D-E");
  EXPECT_EQ(collapsed_label("P-TSinf"), "P-TS1");
  EXPECT_EQ(collapsed_label("P-DS"), "P-TS1");
  EXPECT_EQ(collapsed_label("P-MM"), "P-MM");
  EXPECT_EQ(collapsed_label("PE-DS"), "PE-DS");
  EXPECT_EQ(default_grid().size(), 14u);
}

TEST(Experiment, SingleTrialIsRandomOnly) {
  ExperimentConfig cfg = tiny();
  cfg.trials = 1;
  cfg.seeds = {4};
  const fs::path dir = scratch("k1");
  const RunResult r = run_experiment(cfg, dir);
  ASSERT_TRUE(r.all_complete());
  ASSERT_EQ(r.seeds[0].trials.size(), 1u);
  EXPECT_TRUE(r.seeds[0].trials[0].random);
  const auto rows = lines(dir / "seed_4" / "trials.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "trial,kind,reward,steps,dataset_size,truncated,model_mse,model_nll");
  EXPECT_EQ(rows[1].substr(0, 9), "0,random,");
}

TEST(Experiment, DatasetGrowsByOneEpisodePerTrial) {
  const ExperimentConfig cfg = tiny();
  const RunResult r = run_experiment(cfg, scratch("growth"));
  ASSERT_TRUE(r.all_complete());
  for (const auto& s : r.seeds) {
    ASSERT_EQ(s.trials.size(), cfg.trials);
    for (const auto& t : s.trials) {
      EXPECT_EQ(t.steps, cfg.task_horizon);
      EXPECT_EQ(t.dataset_size, (t.trial + 1) * cfg.task_horizon);
      EXPECT_EQ(t.random, t.trial == 0);
      if (!t.random) {
        EXPECT_TRUE(t.model_mse.has_value());
      }
    }
    EXPECT_EQ(s.best_through(1), std::max(s.trials[0].reward, s.trials[1].reward));
  }
  EXPECT_TRUE(fs::exists(r.dir / "seed_0" / "model" / "manifest.json"));
  EXPECT_EQ(lines(r.dir / "seed_0" / "dataset.csv").size(), cfg.trials * cfg.task_horizon + 1);
}

TEST(Experiment, RunsAreByteIdentical) {
  ExperimentConfig cfg = tiny();
  cfg.environment = "cartpole-noise:0.1";
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_experiment(cfg, a);
  run_experiment(cfg, b);
  for (const char* f : {"trials.csv", "steps.csv", "dataset.csv"}) {
    for (const char* s : {"seed_0", "seed_1"}) {
      EXPECT_EQ(slurp(a / s / f), slurp(b / s / f)) << s << "/" << f;
      EXPECT_FALSE(slurp(a / s / f).empty());
    }
  }
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  EXPECT_EQ(slurp(a / "seed_0" / "model" / "member_0.json"),
            slurp(b / "seed_0" / "model" / "member_0.json"));
}

TEST(Experiment, SeedsDiffer) {
  ExperimentConfig cfg = tiny();
  cfg.trials = 1;
  const fs::path dir = scratch("seeds");
  run_experiment(cfg, dir);
  EXPECT_NE(slurp(dir / "seed_0" / "steps.csv"), slurp(dir / "seed_1" / "steps.csv"));
}

TEST(Experiment, GroundTruthSkipsRandomTrial) {
  ExperimentConfig cfg = tiny();
  cfg.dynamics = DynamicsSource::kGroundTruth;
  cfg.trials = 1;
  cfg.seeds = {0};
  const RunResult r = run_experiment(cfg, scratch("gt"));
  ASSERT_TRUE(r.all_complete());
  EXPECT_FALSE(r.seeds[0].trials[0].random);
}

TEST(Ablation, GridTimesNoiseCells) {
  ExperimentConfig cfg = tiny();
  cfg.trials = 2;
  cfg.seeds = {0};
  cfg.sweep.grid = {"PE-TS1", "D-E"};
  cfg.sweep.noise_fractions = {0.0, 0.1};
  const fs::path dir = scratch("ablate");
  const AblationResult r = run_ablation(cfg, dir);
  ASSERT_EQ(r.cells.size(), 4u);
  EXPECT_TRUE(r.all_complete());
  for (std::size_t i = 1; i < r.cells.size(); ++i) {
    EXPECT_GE(r.cells[i - 1].mean_final, r.cells[i].mean_final);
  }
  const auto rows = lines(dir / "summary.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0],
            "label,collapses_to,environment,seeds,complete,mean_final,median_final,iqr_final");
  EXPECT_TRUE(fs::exists(dir / "cell_PE-TS1_noise0.1" / "seed_0" / "trials.csv"));
  EXPECT_TRUE(fs::exists(dir / "cell_D-E_noise0" / "manifest.json"));
}

TEST(Sweep, OneRowPerHorizon) {
  ExperimentConfig cfg = tiny();
  cfg.trials = 2;
  cfg.seeds = {0};
  const fs::path dir = scratch("sweep");
  const std::vector<std::size_t> hs{2, 3};
  const SweepResult r = run_horizon_sweep(cfg, hs, dir);
  ASSERT_EQ(r.horizons.size(), 2u);
  EXPECT_EQ(r.horizons[0].horizon, 2u);
  EXPECT_TRUE(r.all_complete());
  const auto rows = lines(dir / "summary.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "horizon,seeds,complete,median_final,p5_final,p95_final");
  EXPECT_TRUE(fs::exists(dir / "horizon_3" / "seed_0" / "trials.csv"));
}

TEST(Export, CurvesFromRunAreIdempotent) {
  ExperimentConfig cfg = tiny();
  cfg.seeds = {2};
  const fs::path dir = scratch("export");
  run_experiment(cfg, dir);
  EXPECT_EQ(export_curves(dir), 1u);
  const std::string csv = slurp(dir / "curves.csv");
  const std::string bands = slurp(dir / "curves_summary.csv");
  const std::string svg = slurp(dir / "curves.svg");
  EXPECT_EQ(export_curves(dir), 1u);
  EXPECT_EQ(slurp(dir / "curves.csv"), csv);
  EXPECT_EQ(slurp(dir / "curves_summary.csv"), bands);
  EXPECT_EQ(slurp(dir / "curves.svg"), svg);

  const auto rows = lines(dir / "curves.csv");
  EXPECT_EQ(rows[0], "trial,seed,reward,reward_maxsofar");
  EXPECT_EQ(rows.size(), cfg.trials + 1);
  const auto curves = read_curves(dir);
  ASSERT_EQ(curves.size(), 1u);
  EXPECT_EQ(curves[0].seed, 2u);
  EXPECT_EQ(curves[0].reward.size(), cfg.trials);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
}

TEST(Export, MissingRunDirThrows) {
  EXPECT_THROW(export_curves(scratch("none") / "absent"), std::exception);
}

}  // namespace
