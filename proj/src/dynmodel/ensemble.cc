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

#include "pets/dynmodel/ensemble.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pets/common/errors.h"
#include "pets/common/parallel.h"
#include "pets/diffnet/checkpoint.h"
#include "pets/simd/kernels.h"

namespace pets::dyn {
namespace {

using nlohmann::json;

struct PredictScratch {
  std::vector<double> features;
  std::vector<double> angles;
  std::vector<double> sin_buf;
  std::vector<double> cos_buf;
  std::vector<double> logvar;
  nn::InferenceWorkspace net;
};

PredictScratch& scratch() {
  thread_local PredictScratch s;
  return s;
}

void fisher_yates(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

}  // namespace

std::string_view to_string(ModelClass c) {
  switch (c) {
    case ModelClass::kD:
      return "D";
    case ModelClass::kP:
      return "P";
    case ModelClass::kDE:
      return "DE";
    case ModelClass::kPE:
      return "PE";
  }
  return "?";
}

ModelClass model_class_from_string(std::string_view name) {
  if (name == "D") return ModelClass::kD;
  if (name == "P") return ModelClass::kP;
  if (name == "DE") return ModelClass::kDE;
  if (name == "PE") return ModelClass::kPE;
  throw std::invalid_argument("unknown model class '" + std::string(name) + "'");
}

ModelSpec ModelSpec::defaults(ModelClass c) {
  ModelSpec s;
  s.model_class = c;
  s.ensemble_size = is_ensemble(c) ? 5 : 1;
  s.resample = is_ensemble(c);
  return s;
}

void ModelSpec::validate() const {
  if (ensemble_size < 1) throw std::invalid_argument("ModelSpec: ensemble_size < 1");
  if (!is_ensemble(model_class) && ensemble_size != 1) {
    throw std::invalid_argument("ModelSpec: D and P models have exactly one member");
  }
  if (batch_size < 1) throw std::invalid_argument("ModelSpec: batch_size < 1");
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw std::invalid_argument("ModelSpec: zero hidden width");
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("ModelSpec: negative lambda");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("ModelSpec: learning_rate <= 0");
}

Normalizer Normalizer::fit(const nn::Matrix& features) {
  const std::size_t n = features.rows();
  const std::size_t f = features.cols();
  if (n == 0) throw std::invalid_argument("Normalizer: no rows");
  Normalizer out;
  out.mean.assign(f, 0.0);
  out.stddev.assign(f, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < f; ++j) out.mean[j] += features(r, j);
  }
  for (double& m : out.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < f; ++j) {
      const double d = features(r, j) - out.mean[j];
      out.stddev[j] += d * d;
    }
  }
  for (double& s : out.stddev) {
    s = std::max(std::sqrt(s / static_cast<double>(n)), kStdFloor);
  }
  return out;
}

void Normalizer::normalize(std::span<double> row) const {
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / stddev[j];
}

void Normalizer::denormalize(std::span<double> row) const {
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = row[j] * stddev[j] + mean[j];
}

EnsembleModel::EnsembleModel(std::vector<nn::NetworkParams> members,
                             Normalizer normalizer, Descriptor descriptor,
                             ModelSpec spec)
    : members_(std::move(members)),
      normalizer_(std::move(normalizer)),
      descriptor_(std::move(descriptor)),
      spec_(std::move(spec)) {
  descriptor_.validate();
  if (members_.empty()) throw std::invalid_argument("EnsembleModel: no members");
  const std::size_t f = descriptor_.feature_dim();
  if (normalizer_.mean.size() != f || normalizer_.stddev.size() != f) {
    throw std::invalid_argument("EnsembleModel: normalizer width mismatch");
  }
  const nn::Head head =
      is_probabilistic(spec_.model_class) ? nn::Head::kProbabilistic : nn::Head::kDeterministic;
  for (const auto& m : members_) {
    m.validate();
    if (m.widths != members_.front().widths || m.head != head) {
      throw std::invalid_argument("EnsembleModel: members disagree on topology or head");
    }
    if (m.input_dim() != f || m.output_dim() != descriptor_.state_dim) {
      throw std::invalid_argument("EnsembleModel: member shape does not match descriptor");
    }
  }
  inv_std_.resize(f);
  for (std::size_t j = 0; j < f; ++j) {
    if (!(normalizer_.stddev[j] > 0.0)) {
      throw std::invalid_argument("EnsembleModel: non-positive normalizer std");
    }
    inv_std_[j] = 1.0 / normalizer_.stddev[j];
  }
}

void EnsembleModel::normalized_features(const double* states, const double* actions,
                                        std::size_t rows, double* out) const {
  const std::size_t ds = descriptor_.state_dim;
  const std::size_t da = descriptor_.action_dim;
  const std::size_t f = descriptor_.feature_dim();
  PredictScratch& s = scratch();
  const std::size_t na = descriptor_.angle_dims.size();
  if (na > 0) {
    s.angles.resize(rows * na);
    s.sin_buf.resize(rows * na);
    s.cos_buf.resize(rows * na);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < na; ++k) {
        s.angles[k * rows + r] = states[r * ds + descriptor_.angle_dims[k]];
      }
    }
    simd::sincos(s.angles, s.sin_buf, s.cos_buf);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double* st = states + r * ds;
    double* o = out + r * f;
    std::size_t c = 0;
    for (std::size_t i = 0; i < ds; ++i) {
      std::size_t k = na;
      for (std::size_t q = 0; q < na; ++q) {
        if (descriptor_.angle_dims[q] == i) k = q;
      }
      if (k < na) {
        o[c++] = s.sin_buf[k * rows + r];
        o[c++] = s.cos_buf[k * rows + r];
      } else {
        o[c++] = st[i];
      }
    }
    for (std::size_t i = 0; i < da; ++i) o[c++] = actions[r * da + i];
    for (std::size_t j = 0; j < f; ++j) o[j] = (o[j] - normalizer_.mean[j]) * inv_std_[j];
  }
}

void EnsembleModel::predict_batch(std::size_t member, const double* states,
                                  const double* actions, std::size_t rows,
                                  double* mean_delta, double* variance) const {
  if (member >= members_.size()) {
    throw std::invalid_argument("predict_batch: member index out of range");
  }
  const std::size_t f = descriptor_.feature_dim();
  const std::size_t ds = descriptor_.state_dim;
  PredictScratch& s = scratch();
  s.features.resize(rows * f);
  normalized_features(states, actions, rows, s.features.data());
  const nn::NetworkParams& net = members_[member];
  if (net.head == nn::Head::kDeterministic) {
    s.net.run(net, s.features.data(), rows, mean_delta, nullptr);
    std::fill(variance, variance + rows * ds, 0.0);
    return;
  }
  s.logvar.resize(rows * ds);
  s.net.run(net, s.features.data(), rows, mean_delta, s.logvar.data());
  simd::exp(std::span<const double>(s.logvar.data(), rows * ds),
            std::span<double>(variance, rows * ds));
}

GaussianPrediction EnsembleModel::predict_member(std::size_t member,
                                                 std::span<const double> state,
                                                 std::span<const double> action) const {
  if (state.size() != descriptor_.state_dim || action.size() != descriptor_.action_dim) {
    throw std::invalid_argument("predict_member: dimension mismatch");
  }
  GaussianPrediction p;
  p.mean.resize(descriptor_.state_dim);
  p.variance.resize(descriptor_.state_dim);
  predict_batch(member, state.data(), action.data(), 1, p.mean.data(), p.variance.data());
  return p;
}

EnsembleModel train(const TransitionDataset& dataset, const ModelSpec& spec, Rng& rng,
                    TrainingReport* report) {
  spec.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  const Descriptor& desc = dataset.descriptor();
  const std::size_t n = dataset.size();
  const std::size_t f = desc.feature_dim();
  const std::size_t ds = desc.state_dim;

  nn::Matrix features(n, f);
  nn::Matrix targets(n, ds);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = dataset[i];
    const auto x = featurize(rec.state, rec.action, desc);
    std::copy(x.begin(), x.end(), features.row(i).begin());
    const auto y = target_of(rec);
    std::copy(y.begin(), y.end(), targets.row(i).begin());
  }
  Normalizer normalizer = Normalizer::fit(features);
  for (std::size_t i = 0; i < n; ++i) normalizer.normalize(features.row(i));

  const std::size_t members = spec.ensemble_size;
  const bool resample = is_ensemble(spec.model_class) && spec.resample;
  std::vector<std::vector<std::size_t>> indices;
  if (resample) {
    indices = bootstrap_indices(n, members, rng);
  } else {
    indices.assign(members, std::vector<std::size_t>(n));
    for (auto& idx : indices) {
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    }
  }
  const std::uint64_t base_seed = rng();

  const nn::Head head = is_probabilistic(spec.model_class) ? nn::Head::kProbabilistic
                                                           : nn::Head::kDeterministic;
  std::vector<std::size_t> widths;
  widths.push_back(f);
  widths.insert(widths.end(), spec.hidden_widths.begin(), spec.hidden_widths.end());
  widths.push_back(head == nn::Head::kProbabilistic ? 2 * ds : ds);

  const nn::LossOptions loss{
      .kind = head == nn::Head::kProbabilistic ? nn::LossKind::kGaussianNll
                                               : nn::LossKind::kMse,
      .lambda = spec.lambda,
      .mean_over_rows = true,
  };
  const nn::AdamConfig adam{.learning_rate = spec.learning_rate};
  const std::size_t batch = std::min(spec.batch_size, n);

  std::vector<nn::NetworkParams> nets(members);
  std::vector<double> final_loss(members, 0.0);
  parallel_chunks(members, spec.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      nn::NetworkParams params =
          nn::init_params(widths, head, derive_seed(base_seed, {b, 0}));
      nn::AdamState state = nn::AdamState::zeros_like(params);
      Rng shuffle_rng(derive_seed(base_seed, {b, 1}));
      std::vector<std::size_t> order = indices[b];
      nn::Batch mb;
      for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        fisher_yates(order, shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch) {
          const std::size_t rows = std::min(batch, n - start);
          mb.inputs.resize(rows, f);
          mb.targets.resize(rows, ds);
          for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t src = order[start + r];
            std::copy_n(features.row(src).begin(), f, mb.inputs.row(r).begin());
            std::copy_n(targets.row(src).begin(), ds, mb.targets.row(r).begin());
          }
          nn::LossAndGradient lg;
          try {
            lg = nn::gradient(params, mb, loss);
          } catch (const NumericalError& e) {
            throw NumericalError("train: member " + std::to_string(b) + ", epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batches) + ": " + e.what());
          }
          nn::adam_step(params, lg.gradient, state, adam);
          epoch_loss += lg.loss;
          ++batches;
        }
        final_loss[b] = epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1));
      }
      nets[b] = std::move(params);
    }
  });
  if (report != nullptr) report->final_loss = final_loss;
  return EnsembleModel(std::move(nets), std::move(normalizer), desc, spec);
}

std::vector<double> sample_next(const EnsembleModel& model, std::size_t member,
                                std::span<const double> state,
                                std::span<const double> action, Rng& rng) {
  const GaussianPrediction p = model.predict_member(member, state, action);
  std::vector<double> next(state.begin(), state.end());
  const bool stochastic = model.probabilistic();
  for (std::size_t i = 0; i < next.size(); ++i) {
    double delta = p.mean[i];
    if (stochastic) delta += std::sqrt(p.variance[i]) * standard_normal(rng);
    next[i] += delta;
  }
  return next;
}

namespace {

json spec_to_json(const ModelSpec& s) {
  return {{"class", std::string(to_string(s.model_class))},
          {"ensemble_size", s.ensemble_size},
          {"hidden_widths", s.hidden_widths},
          {"epochs", s.epochs},
          {"batch_size", s.batch_size},
          {"lambda", s.lambda},
          {"learning_rate", s.learning_rate},
          {"resample", s.resample},
          {"threads", s.threads}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s = ModelSpec::defaults(model_class_from_string(j.at("class").get<std::string>()));
  s.ensemble_size = j.value("ensemble_size", s.ensemble_size);
  s.hidden_widths = j.value("hidden_widths", s.hidden_widths);
  s.epochs = j.value("epochs", s.epochs);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.lambda = j.value("lambda", s.lambda);
  s.learning_rate = j.value("learning_rate", s.learning_rate);
  s.resample = j.value("resample", s.resample);
  s.threads = j.value("threads", s.threads);
  return s;
}

}  // namespace

void save_model(const EnsembleModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& d = model.descriptor();
  json manifest = {
      {"format", "pets-ensemble"},
      {"version", 1},
      {"spec", spec_to_json(model.spec())},
      {"normalizer",
       {{"mean", model.normalizer().mean}, {"stddev", model.normalizer().stddev}}},
      {"descriptor",
       {{"state_dim", d.state_dim},
        {"action_dim", d.action_dim},
        {"angle_dims", d.angle_dims},
        {"action_low", d.action_low},
        {"action_high", d.action_high}}},
      {"members", model.ensemble_size()},
  };
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  for (std::size_t b = 0; b < model.ensemble_size(); ++b) {
    nn::save_checkpoint(dir / ("member_" + std::to_string(b) + ".json"),
                        model.members()[b]);
  }
}

EnsembleModel load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot read " + (dir / "manifest.json").string());
  const json manifest = json::parse(in);
  if (manifest.value("format", "") != "pets-ensemble") {
    throw std::invalid_argument("load_model: not a pets-ensemble manifest");
  }
  Descriptor d;
  const json& jd = manifest.at("descriptor");
  d.state_dim = jd.at("state_dim").get<std::size_t>();
  d.action_dim = jd.at("action_dim").get<std::size_t>();
  d.angle_dims = jd.at("angle_dims").get<std::vector<std::size_t>>();
  d.action_low = jd.at("action_low").get<std::vector<double>>();
  d.action_high = jd.at("action_high").get<std::vector<double>>();
  Normalizer norm;
  norm.mean = manifest.at("normalizer").at("mean").get<std::vector<double>>();
  norm.stddev = manifest.at("normalizer").at("stddev").get<std::vector<double>>();
  const std::size_t count = manifest.at("members").get<std::size_t>();
  std::vector<nn::NetworkParams> members;
  for (std::size_t b = 0; b < count; ++b) {
    members.push_back(
        nn::load_checkpoint(dir / ("member_" + std::to_string(b) + ".json")).params);
  }
  return EnsembleModel(std::move(members), std::move(norm), std::move(d),
                       spec_from_json(manifest.at("spec")));
}

}  // namespace pets::dyn
