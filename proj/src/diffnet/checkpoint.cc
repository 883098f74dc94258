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

#include "pets/diffnet/checkpoint.h"

#include <fstream>
#include <stdexcept>

namespace pets::nn {
namespace {

using nlohmann::json;

json tensors_to_json(const std::vector<Matrix>& weights,
                     const std::vector<std::vector<double>>& biases,
                     const std::vector<double>& max_logvar,
                     const std::vector<double>& min_logvar) {
  json doc;
  json w = json::array();
  for (const auto& m : weights) {
    w.push_back(std::vector<double>(m.values().begin(), m.values().end()));
  }
  doc["weights"] = std::move(w);
  doc["biases"] = biases;
  doc["max_logvar"] = max_logvar;
  doc["min_logvar"] = min_logvar;
  return doc;
}

template <typename Tensors>
void tensors_from_json(const json& doc, const std::vector<std::size_t>& widths,
                       Tensors& out) {
  const auto& w = doc.at("weights");
  if (w.size() + 1 != widths.size()) {
    throw std::invalid_argument("checkpoint: weight count does not match widths");
  }
  out.weights.clear();
  for (std::size_t k = 0; k < w.size(); ++k) {
    out.weights.push_back(
        Matrix::from_data(widths[k], widths[k + 1], w[k].get<std::vector<double>>()));
  }
  out.biases = doc.at("biases").get<std::vector<std::vector<double>>>();
  out.max_logvar = doc.at("max_logvar").get<std::vector<double>>();
  out.min_logvar = doc.at("min_logvar").get<std::vector<double>>();
}

Gradient gradient_like(const json& doc, const std::vector<std::size_t>& widths) {
  Gradient g;
  tensors_from_json(doc, widths, g);
  return g;
}

}  // namespace

json to_json(const NetworkParams& params, const AdamState* adam) {
  json doc = tensors_to_json(params.weights, params.biases, params.max_logvar,
                             params.min_logvar);
  doc["format"] = "pets-mlp";
  doc["version"] = 1;
  doc["widths"] = params.widths;
  doc["head"] = params.head == Head::kProbabilistic ? "probabilistic" : "deterministic";
  if (adam != nullptr) {
    const auto& m = adam->first_moment;
    const auto& v = adam->second_moment;
    doc["adam"] = {
        {"step", adam->step},
        {"first_moment", tensors_to_json(m.weights, m.biases, m.max_logvar, m.min_logvar)},
        {"second_moment", tensors_to_json(v.weights, v.biases, v.max_logvar, v.min_logvar)},
    };
  }
  return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
  if (doc.value("format", "") != "pets-mlp") {
    throw std::invalid_argument("checkpoint: not a pets-mlp document");
  }
  if (doc.value("version", 0) != 1) {
    throw std::invalid_argument("checkpoint: unsupported version");
  }
  Checkpoint cp;
  cp.params.widths = doc.at("widths").get<std::vector<std::size_t>>();
  const std::string head = doc.at("head").get<std::string>();
  if (head == "probabilistic") {
    cp.params.head = Head::kProbabilistic;
  } else if (head == "deterministic") {
    cp.params.head = Head::kDeterministic;
  } else {
    throw std::invalid_argument("checkpoint: unknown head '" + head + "'");
  }
  tensors_from_json(doc, cp.params.widths, cp.params);
  cp.params.validate();
  if (doc.contains("adam")) {
    const json& a = doc.at("adam");
    AdamState state;
    state.step = a.at("step").get<std::uint64_t>();
    state.first_moment = gradient_like(a.at("first_moment"), cp.params.widths);
    state.second_moment = gradient_like(a.at("second_moment"), cp.params.widths);
    cp.adam = std::move(state);
  }
  return cp;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                     const AdamState* adam) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << to_json(params, adam).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return checkpoint_from_json(json::parse(in));
}

}  // namespace pets::nn
