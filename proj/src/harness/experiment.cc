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

#include "pets/harness/experiment.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "pets/common/parallel.h"
#include "pets/dynmodel/diagnostics.h"
#include "pets/envs/environment.h"
#include "pets/plan/mpc.h"
#include "pets/propagate/models.h"

namespace pets::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Seed stream purposes.
constexpr std::uint64_t kRandomStream = 0;
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kPlanStream = 2;
constexpr std::uint64_t kNoiseStream = 3;

std::mutex log_mutex;

void log_line(const std::string& line) {
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << line << '\n';
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_trial_row(std::ostream& out, const TrialRecord& r) {
  out << r.trial << ',' << (r.random ? "random" : "mpc") << ',' << fmt(r.reward) << ','
      << r.steps << ',' << r.dataset_size << ',' << (r.truncated ? 1 : 0) << ','
      << (r.model_mse ? fmt(*r.model_mse) : "") << ','
      << (r.model_nll ? fmt(*r.model_nll) : "") << '\n';
  out.flush();
}

json seed_status(const SeedResult& s) {
  return {{"seed", s.seed},
          {"complete", s.complete},
          {"trials_completed", s.trials.size()},
          {"error", s.error}};
}

void write_manifest(const fs::path& dir, std::string_view kind, const ExperimentConfig& cfg,
                    const json& extra) {
  json m = {{"kind", kind},
            {"name", cfg.name},
            {"config", to_json(cfg)},
            {"config_hash", config_hash(cfg)},
            {"code_version", code_version()}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  open_out(dir / "manifest.json") << m.dump(2) << '\n';
}

std::string tag(const ExperimentConfig& cfg, std::uint64_t seed) {
  return "[" + cfg.name + " seed " + std::to_string(seed) + "]";
}

}  // namespace

double SeedResult::final_reward() const {
  if (trials.empty()) throw std::logic_error("SeedResult: no trials");
  return trials.back().reward;
}

double SeedResult::best_through(std::size_t k) const {
  if (trials.empty()) throw std::logic_error("SeedResult: no trials");
  const std::size_t end = std::min(k + 1, trials.size());
  double best = trials.front().reward;
  for (std::size_t i = 1; i < end; ++i) best = std::max(best, trials[i].reward);
  return best;
}

bool RunResult::all_complete() const {
  return std::all_of(seeds.begin(), seeds.end(), [](const SeedResult& s) { return s.complete; });
}

std::vector<double> RunResult::final_rewards() const {
  std::vector<double> out;
  for (const auto& s : seeds) {
    if (!s.trials.empty()) out.push_back(s.final_reward());
  }
  return out;
}

std::vector<double> RunResult::best_through(std::size_t k) const {
  std::vector<double> out;
  for (const auto& s : seeds) {
    if (!s.trials.empty()) out.push_back(s.best_through(k));
  }
  return out;
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& seed_dir) {
  cfg.validate();
  SeedResult result;
  result.seed = seed;
  fs::create_directories(seed_dir);

  const auto env = envs::make_environment(cfg.environment);
  const dyn::Descriptor& desc = env->spec().descriptor;
  const std::size_t ds = desc.state_dim;
  const std::size_t da = desc.action_dim;
  const bool learned = cfg.dynamics == DynamicsSource::kLearned;
  const envs::RewardFunction reward_fn = env->reward_function();

  std::ofstream trials_csv = open_out(seed_dir / "trials.csv");
  std::ofstream steps_csv = open_out(seed_dir / "steps.csv");
  std::ofstream timing_csv = open_out(seed_dir / "timing.csv");
  std::ofstream trace;
  if (cfg.planner_trace) trace = open_out(seed_dir / "planner_trace.jsonl");

  trials_csv << "trial,kind,reward,steps,dataset_size,truncated,model_mse,model_nll\n";
  steps_csv << "trial,step";
  for (std::size_t i = 0; i < ds; ++i) steps_csv << ",s_" << i;
  for (std::size_t i = 0; i < da; ++i) steps_csv << ",a_" << i;
  steps_csv << ",reward\n";
  timing_csv << "trial,train_ms,plan_ms\n";

  dyn::TransitionDataset data(desc);
  std::optional<dyn::EnsembleModel> model;

  try {
    for (std::size_t k = 0; k < cfg.trials; ++k) {
      TrialRecord rec;
      rec.trial = k;
      rec.random = learned && k == 0;

      std::unique_ptr<prop::DynamicsModel> dynamics;
      if (learned && !rec.random) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng train_rng(derive_seed(seed, {k, kTrainStream}));
        model = dyn::train(data, cfg.model, train_rng);
        rec.train_ms = ms_since(t0);
        dynamics = std::make_unique<prop::LearnedDynamics>(*model);
      } else if (!learned) {
        dynamics = std::make_unique<prop::EnvironmentDynamics>(*env);
      }

      Rng random_rng(derive_seed(seed, {k, kRandomStream}));
      Rng plan_rng(derive_seed(seed, {k, kPlanStream}));
      Rng noise_rng(derive_seed(seed, {k, kNoiseStream}));
      plan::ActionPlan action_plan =
          plan::ActionPlan::initial(cfg.planner.horizon, desc.action_low, desc.action_high);

      dyn::TransitionDataset trajectory(desc);
      std::vector<double> state = env->initial_state();
      std::vector<double> next(ds);
      std::vector<double> action(da);
      for (std::size_t t = 0; t < cfg.task_horizon; ++t) {
        if (rec.random) {
          for (std::size_t i = 0; i < da; ++i) {
            action[i] = uniform(random_rng, desc.action_low[i], desc.action_high[i]);
          }
        } else {
          const auto t0 = std::chrono::steady_clock::now();
          plan::MpcStepResult step =
              plan::mpc_step(*dynamics, state, action_plan, cfg.planner, reward_fn, plan_rng);
          rec.plan_ms += ms_since(t0);
          action = step.action;
          action_plan = std::move(step.next_plan);
          if (cfg.planner_trace) plan::write_trace_line(trace, t, step);
        }
        env->sample_step(state, action, next, noise_rng);
        if (!std::all_of(next.begin(), next.end(), [](double v) { return std::isfinite(v); })) {
          rec.truncated = true;
          break;
        }
        // The agent records the action it commanded; any injected noise is
        // part of the environment.
        const double r = env->reward(next, action);
        steps_csv << k << ',' << t;
        for (double v : state) steps_csv << ',' << fmt(v);
        for (double v : action) steps_csv << ',' << fmt(v);
        steps_csv << ',' << fmt(r) << '\n';
        trajectory.add({state, action, next});
        rec.reward += r;
        ++rec.steps;
        state = next;
      }

      if (model && cfg.diagnostics && !trajectory.empty()) {
        const dyn::AccuracyResult acc = dyn::diagnostics_accuracy(*model, trajectory);
        rec.model_mse = acc.mse;
        rec.model_nll = acc.nll;
      }
      data.append(trajectory);
      rec.dataset_size = data.size();
      write_trial_row(trials_csv, rec);
      steps_csv.flush();
      timing_csv << k << ',' << fmt(rec.train_ms) << ',' << fmt(rec.plan_ms) << '\n';
      timing_csv.flush();
      result.trials.push_back(rec);

      char buf[160];
      std::snprintf(buf, sizeof(buf), " trial %zu %s reward %.3f (train %.1fs, plan %.1fs)",
                    k, rec.random ? "random" : "mpc", rec.reward, rec.train_ms / 1e3,
                    rec.plan_ms / 1e3);
      log_line(tag(cfg, seed) + buf);
    }
    result.complete = true;
  } catch (const std::exception& e) {
    result.error = e.what();
    log_line(tag(cfg, seed) + " aborted: " + result.error);
  }

  data.write_csv(seed_dir / "dataset.csv");
  if (cfg.save_checkpoints && model) dyn::save_model(*model, seed_dir / "model");
  return result;
}

RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& run_dir) {
  cfg.validate();
  fs::create_directories(run_dir);
  RunResult result;
  result.dir = run_dir;
  result.seeds.resize(cfg.seeds.size());

  // Workers pull seeds in order; each seed is independent of scheduling.
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      const std::uint64_t seed = cfg.seeds[i];
      try {
        result.seeds[i] = run_seed(cfg, seed, run_dir / ("seed_" + std::to_string(seed)));
      } catch (const std::exception& e) {
        result.seeds[i].seed = seed;
        result.seeds[i].error = e.what();
        log_line(tag(cfg, seed) + " failed: " + e.what());
      }
    }
  };
  const std::size_t workers = std::min(resolve_threads(cfg.threads), cfg.seeds.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  json seeds = json::array();
  for (const auto& s : result.seeds) seeds.push_back(seed_status(s));
  write_manifest(run_dir, "run", cfg, {{"seeds", seeds}});
  return result;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, resolve_run_dir(cfg));
}

// --- Ablation ---------------------------------------------------------------

std::vector<std::string> default_grid() {
  return {"D-E",   "P-E",    "P-DS",   "P-MM",  "P-TS1",  "P-TSinf", "DE-E",
          "DE-TS1", "DE-TSinf", "PE-E", "PE-DS", "PE-MM", "PE-TS1", "PE-TSinf"};
}

std::string collapsed_label(std::string_view label) {
  const auto dash = label.find('-');
  if (dash == std::string_view::npos) {
    throw std::invalid_argument("grid label '" + std::string(label) + "' is not <class>-<propagation>");
  }
  const dyn::ModelClass c = dyn::model_class_from_string(label.substr(0, dash));
  const prop::Propagation p = prop::propagation_from_string(label.substr(dash + 1));
  const std::string cls(dyn::to_string(c));
  if (dyn::is_ensemble(c)) return cls + "-" + std::string(prop::to_string(p));
  if (c == dyn::ModelClass::kD) return cls + "-E";
  // One probabilistic member: fixed and resampled bootstraps coincide, and
  // distribution sampling over one candidate is plain sampling.
  if (p == prop::Propagation::kTSInf || p == prop::Propagation::kDS) return cls + "-TS1";
  return cls + "-" + std::string(prop::to_string(p));
}

bool AblationResult::all_complete() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellSummary& c) { return c.complete; });
}

AblationResult run_ablation(const ExperimentConfig& cfg, const fs::path& run_dir) {
  cfg.validate();
  const std::vector<std::string> grid = cfg.sweep.grid.empty() ? default_grid() : cfg.sweep.grid;
  std::vector<std::optional<double>> noises;
  if (cfg.sweep.noise_fractions.empty()) {
    noises.push_back(std::nullopt);
  } else {
    for (double f : cfg.sweep.noise_fractions) noises.push_back(f);
  }
  const std::string base_env = cfg.environment.substr(0, cfg.environment.find("-noise:"));

  AblationResult result;
  result.dir = run_dir;
  fs::create_directories(run_dir);
  for (const auto& noise : noises) {
    for (const auto& label : grid) {
      const auto dash = label.find('-');
      ExperimentConfig cell = cfg;
      const dyn::ModelClass c = dyn::model_class_from_string(label.substr(0, dash));
      const dyn::ModelSpec d = dyn::ModelSpec::defaults(c);
      cell.model.model_class = c;
      cell.model.ensemble_size = dyn::is_ensemble(c) ? cfg.model.ensemble_size : 1;
      cell.model.resample = d.resample;
      cell.planner.propagation = prop::propagation_from_string(label.substr(dash + 1));
      cell.dynamics = DynamicsSource::kLearned;
      CellSummary summary;
      summary.label = label;
      summary.collapses_to = collapsed_label(label);
      std::string dir_name = "cell_" + label;
      if (noise) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", *noise);
        cell.environment = base_env + "-noise:" + buf;
        summary.label += std::string("@noise:") + buf;
        summary.collapses_to += std::string("@noise:") + buf;
        dir_name += std::string("_noise") + buf;
      }
      cell.name = cfg.name + "/" + summary.label;
      summary.environment = cell.environment;
      const RunResult run = run_experiment(cell, run_dir / dir_name);
      summary.final_rewards = run.final_rewards();
      summary.complete = run.all_complete();
      if (!summary.final_rewards.empty()) {
        summary.mean_final = mean(summary.final_rewards);
        summary.median_final = median(summary.final_rewards);
        summary.iqr_final = interquartile_range(summary.final_rewards);
      }
      result.cells.push_back(std::move(summary));
    }
  }
  std::stable_sort(result.cells.begin(), result.cells.end(),
                   [](const CellSummary& a, const CellSummary& b) {
                     if (a.mean_final != b.mean_final) return a.mean_final > b.mean_final;
                     return a.median_final > b.median_final;
                   });

  std::ofstream out = open_out(run_dir / "summary.csv");
  out << "label,collapses_to,environment,seeds,complete,mean_final,median_final,iqr_final\n";
  json cells = json::array();
  for (const auto& c : result.cells) {
    out << c.label << ',' << c.collapses_to << ',' << c.environment << ','
        << c.final_rewards.size() << ',' << (c.complete ? 1 : 0) << ',' << fmt(c.mean_final)
        << ',' << fmt(c.median_final) << ',' << fmt(c.iqr_final) << '\n';
    cells.push_back({{"label", c.label}, {"complete", c.complete}});
  }
  write_manifest(run_dir, "ablation", cfg, {{"cells", cells}});
  return result;
}

// --- Horizon sweep ----------------------------------------------------------

bool SweepResult::all_complete() const {
  return std::all_of(horizons.begin(), horizons.end(),
                     [](const HorizonSummary& h) { return h.complete; });
}

SweepResult run_horizon_sweep(const ExperimentConfig& cfg, std::span<const std::size_t> horizons,
                              const fs::path& run_dir) {
  cfg.validate();
  if (horizons.empty()) throw std::invalid_argument("run_horizon_sweep: no horizons");
  SweepResult result;
  result.dir = run_dir;
  fs::create_directories(run_dir);
  for (std::size_t h : horizons) {
    ExperimentConfig cell = cfg;
    cell.planner.horizon = h;
    cell.name = cfg.name + "/H" + std::to_string(h);
    const RunResult run = run_experiment(cell, run_dir / ("horizon_" + std::to_string(h)));
    HorizonSummary s;
    s.horizon = h;
    s.final_rewards = run.final_rewards();
    s.complete = run.all_complete();
    if (!s.final_rewards.empty()) {
      s.median_final = median(s.final_rewards);
      s.p5 = percentile(s.final_rewards, 5.0);
      s.p95 = percentile(s.final_rewards, 95.0);
    }
    result.horizons.push_back(std::move(s));
  }
  std::ofstream out = open_out(run_dir / "summary.csv");
  out << "horizon,seeds,complete,median_final,p5_final,p95_final\n";
  json entries = json::array();
  for (const auto& s : result.horizons) {
    out << s.horizon << ',' << s.final_rewards.size() << ',' << (s.complete ? 1 : 0) << ','
        << fmt(s.median_final) << ',' << fmt(s.p5) << ',' << fmt(s.p95) << '\n';
    entries.push_back({{"horizon", s.horizon}, {"complete", s.complete}});
  }
  json h_list = json::array();
  for (std::size_t h : horizons) h_list.push_back(h);
  write_manifest(run_dir, "horizon_sweep", cfg, {{"horizons", h_list}, {"cells", entries}});
  return result;
}

// --- Statistics -------------------------------------------------------------

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean: empty input");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double median(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("median: empty input");
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percentile(std::span<const double> x, double p) {
  if (x.empty()) throw std::invalid_argument("percentile: empty input");
  if (!(p >= 0.0 && p <= 100.0)) throw std::invalid_argument("percentile: p outside [0, 100]");
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

double interquartile_range(std::span<const double> x) {
  return percentile(x, 75.0) - percentile(x, 25.0);
}

}  // namespace pets::harness
