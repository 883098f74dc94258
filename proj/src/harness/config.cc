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

#include "pets/harness/config.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

#include "pets/envs/environment.h"
#include "pets/propagate/rollout.h"

namespace pets::harness {
namespace {

using nlohmann::json;

#ifndef PETS_VERSION
#define PETS_VERSION "0.0.0"
#endif

void reject_unknown(const json& obj, std::string_view where,
                    std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) {
    throw std::invalid_argument(std::string(where) + ": expected a JSON object");
  }
  const std::set<std::string_view> allowed(keys);
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) {
      throw std::invalid_argument(std::string(where) + ": unknown key '" + k + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

json model_json(const dyn::ModelSpec& m) {
  return {{"class", dyn::to_string(m.model_class)},
          {"ensemble_size", m.ensemble_size},
          {"hidden_widths", m.hidden_widths},
          {"epochs", m.epochs},
          {"batch_size", m.batch_size},
          {"lambda", m.lambda},
          {"learning_rate", m.learning_rate},
          {"resample", m.resample},
          {"threads", m.threads}};
}

dyn::ModelSpec model_from(const json& j, const dyn::ModelSpec& base) {
  reject_unknown(j, "model", {"class", "ensemble_size", "hidden_widths", "epochs",
                              "batch_size", "lambda", "learning_rate", "resample",
                              "threads"});
  dyn::ModelSpec m = base;
  if (j.contains("class")) {
    const auto c = dyn::model_class_from_string(j.at("class").get<std::string>());
    if (c != m.model_class) {
      const dyn::ModelSpec d = dyn::ModelSpec::defaults(c);
      m.model_class = c;
      m.ensemble_size = d.ensemble_size;
      m.resample = d.resample;
    }
  }
  read(j, "ensemble_size", m.ensemble_size);
  read(j, "hidden_widths", m.hidden_widths);
  read(j, "epochs", m.epochs);
  read(j, "batch_size", m.batch_size);
  read(j, "lambda", m.lambda);
  read(j, "learning_rate", m.learning_rate);
  read(j, "resample", m.resample);
  read(j, "threads", m.threads);
  return m;
}

json planner_json(const plan::PlannerConfig& p) {
  return {{"optimizer", plan::to_string(p.optimizer)},
          {"horizon", p.horizon},
          {"population", p.population},
          {"iterations", p.iterations},
          {"elites", p.elites},
          {"rs_samples", p.rs_samples},
          {"particles", p.particles},
          {"propagation", prop::to_string(p.propagation)},
          {"warm_start", p.warm_start},
          {"min_variance", p.min_variance},
          {"threads", p.threads}};
}

plan::PlannerConfig planner_from(const json& j, const plan::PlannerConfig& base) {
  reject_unknown(j, "planner", {"optimizer", "horizon", "population", "iterations",
                                "elites", "rs_samples", "particles", "propagation",
                                "warm_start", "min_variance", "threads"});
  plan::PlannerConfig p = base;
  if (j.contains("optimizer")) {
    p.optimizer = plan::optimizer_from_string(j.at("optimizer").get<std::string>());
  }
  if (j.contains("propagation")) {
    p.propagation = prop::propagation_from_string(j.at("propagation").get<std::string>());
  }
  read(j, "horizon", p.horizon);
  read(j, "population", p.population);
  read(j, "iterations", p.iterations);
  read(j, "elites", p.elites);
  read(j, "rs_samples", p.rs_samples);
  read(j, "particles", p.particles);
  read(j, "warm_start", p.warm_start);
  read(j, "min_variance", p.min_variance);
  read(j, "threads", p.threads);
  return p;
}

}  // namespace

dyn::ModelSpec ExperimentConfig::default_model() {
  dyn::ModelSpec m = dyn::ModelSpec::defaults(dyn::ModelClass::kPE);
  m.hidden_widths = {32, 32, 32};
  m.epochs = 100;
  m.batch_size = 32;
  return m;
}

plan::PlannerConfig ExperimentConfig::default_planner() {
  plan::PlannerConfig p;
  p.horizon = 40;
  return p;
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
  if (task_horizon < 1) throw std::invalid_argument("config: task_horizon must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("config: at least one seed required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw std::invalid_argument("config: duplicate seeds");
  }
  if (name.empty()) throw std::invalid_argument("config: empty name");
  envs::make_environment(environment);  // throws on unknown ids
  model.validate();
  planner.validate();
  for (std::size_t h : sweep.horizons) {
    if (h == 0) throw std::invalid_argument("config: sweep horizon must be >= 1");
  }
  for (double f : sweep.noise_fractions) {
    if (!(f >= 0.0 && f <= 0.2)) {
      throw std::invalid_argument("config: noise fractions must lie in [0, 0.2]");
    }
  }
  for (const auto& label : sweep.grid) {
    const auto dash = label.find('-');
    if (dash == std::string::npos) {
      throw std::invalid_argument("config: grid label '" + label + "' is not <class>-<propagation>");
    }
    dyn::model_class_from_string(label.substr(0, dash));
    prop::propagation_from_string(label.substr(dash + 1));
  }
}

ExperimentConfig config_from_json(const json& doc) {
  reject_unknown(doc, "config",
                 {"name", "environment", "dynamics", "model", "planner", "trials",
                  "task_horizon", "seeds", "output_dir", "threads", "sweep",
                  "save_checkpoints", "diagnostics", "planner_trace"});
  ExperimentConfig cfg;
  read(doc, "name", cfg.name);
  read(doc, "environment", cfg.environment);
  if (doc.contains("dynamics")) {
    const auto d = doc.at("dynamics").get<std::string>();
    if (d == "learned") {
      cfg.dynamics = DynamicsSource::kLearned;
    } else if (d == "ground_truth") {
      cfg.dynamics = DynamicsSource::kGroundTruth;
    } else {
      throw std::invalid_argument("config: dynamics must be 'learned' or 'ground_truth'");
    }
  }
  if (doc.contains("model")) cfg.model = model_from(doc.at("model"), cfg.model);
  if (doc.contains("planner")) cfg.planner = planner_from(doc.at("planner"), cfg.planner);
  read(doc, "trials", cfg.trials);
  read(doc, "task_horizon", cfg.task_horizon);
  read(doc, "seeds", cfg.seeds);
  read(doc, "output_dir", cfg.output_dir);
  read(doc, "threads", cfg.threads);
  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    reject_unknown(s, "sweep", {"horizons", "noise_fractions", "grid"});
    read(s, "horizons", cfg.sweep.horizons);
    read(s, "noise_fractions", cfg.sweep.noise_fractions);
    read(s, "grid", cfg.sweep.grid);
  }
  read(doc, "save_checkpoints", cfg.save_checkpoints);
  read(doc, "diagnostics", cfg.diagnostics);
  read(doc, "planner_trace", cfg.planner_trace);
  cfg.validate();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  return {{"name", cfg.name},
          {"environment", cfg.environment},
          {"dynamics", cfg.dynamics == DynamicsSource::kLearned ? "learned" : "ground_truth"},
          {"model", model_json(cfg.model)},
          {"planner", planner_json(cfg.planner)},
          {"trials", cfg.trials},
          {"task_horizon", cfg.task_horizon},
          {"seeds", cfg.seeds},
          {"output_dir", cfg.output_dir},
          {"threads", cfg.threads},
          {"sweep",
           {{"horizons", cfg.sweep.horizons},
            {"noise_fractions", cfg.sweep.noise_fractions},
            {"grid", cfg.sweep.grid}}},
          {"save_checkpoints", cfg.save_checkpoints},
          {"diagnostics", cfg.diagnostics},
          {"planner_trace", cfg.planner_trace}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

std::string canonical_json(const ExperimentConfig& cfg) {
  // nlohmann::json objects are key-sorted std::maps.
  return to_json(cfg).dump();
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_json(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path output_root() {
  const char* env = std::getenv("PETS_OUTPUT_ROOT");
  return (env && *env) ? std::filesystem::path(env) : std::filesystem::path("runs");
}

std::filesystem::path resolve_run_dir(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir.empty() ? cfg.name : cfg.output_dir);
  return dir.is_absolute() ? dir : output_root() / dir;
}

std::string_view code_version() { return PETS_VERSION; }

}  // namespace pets::harness
