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

#include "pets/dynmodel/dataset.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pets::dyn {
namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void write_number(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

bool Descriptor::is_angle(std::size_t dim) const {
  return std::find(angle_dims.begin(), angle_dims.end(), dim) != angle_dims.end();
}

void Descriptor::validate() const {
  for (std::size_t a : angle_dims) {
    if (a >= state_dim) throw std::invalid_argument("Descriptor: angle index out of range");
  }
  if (action_low.size() != action_dim || action_high.size() != action_dim) {
    throw std::invalid_argument("Descriptor: action bound size mismatch");
  }
  for (std::size_t i = 0; i < action_dim; ++i) {
    if (!(action_low[i] <= action_high[i])) {
      throw std::invalid_argument("Descriptor: action_low > action_high");
    }
  }
}

TransitionDataset::TransitionDataset(Descriptor descriptor)
    : descriptor_(std::move(descriptor)) {
  descriptor_.validate();
}

void TransitionDataset::add(Transition record) {
  if (record.state.size() != descriptor_.state_dim ||
      record.next_state.size() != descriptor_.state_dim ||
      record.action.size() != descriptor_.action_dim) {
    throw std::invalid_argument("TransitionDataset: record dimensions do not match");
  }
  if (!all_finite(record.state) || !all_finite(record.action) ||
      !all_finite(record.next_state)) {
    throw std::invalid_argument("TransitionDataset: non-finite record");
  }
  records_.push_back(std::move(record));
}

void TransitionDataset::append(const TransitionDataset& other) {
  if (!(other.descriptor_ == descriptor_)) {
    throw std::invalid_argument("TransitionDataset: descriptor mismatch on append");
  }
  records_.insert(records_.end(), other.records_.begin(), other.records_.end());
}

TransitionDataset TransitionDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > records_.size()) {
    throw std::invalid_argument("TransitionDataset: slice out of range");
  }
  TransitionDataset out(descriptor_);
  out.records_.assign(records_.begin() + static_cast<std::ptrdiff_t>(begin),
                      records_.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

void TransitionDataset::write_csv(std::ostream& out) const {
  const auto& d = descriptor_;
  bool first = true;
  auto sep = [&] {
    if (!first) out << ',';
    first = false;
  };
  for (std::size_t i = 0; i < d.state_dim; ++i) sep(), out << "s_" << i;
  for (std::size_t i = 0; i < d.action_dim; ++i) sep(), out << "a_" << i;
  for (std::size_t i = 0; i < d.state_dim; ++i) sep(), out << "sn_" << i;
  out << '\n';
  for (const auto& r : records_) {
    first = true;
    for (double v : r.state) sep(), write_number(out, v);
    for (double v : r.action) sep(), write_number(out, v);
    for (double v : r.next_state) sep(), write_number(out, v);
    out << '\n';
  }
}

void TransitionDataset::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(out);
}

TransitionDataset TransitionDataset::read_csv(std::istream& in,
                                              const Descriptor& descriptor) {
  TransitionDataset ds(descriptor);
  const std::size_t ds_dim = descriptor.state_dim;
  const std::size_t da_dim = descriptor.action_dim;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("read_csv: missing header");
  std::size_t columns = 1 + static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (line.empty()) columns = 0;
  if (columns != 2 * ds_dim + da_dim) {
    throw std::invalid_argument("read_csv: header width does not match descriptor");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    if (values.size() != columns) throw std::invalid_argument("read_csv: ragged row");
    Transition t;
    t.state.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(ds_dim));
    t.action.assign(values.begin() + static_cast<std::ptrdiff_t>(ds_dim),
                    values.begin() + static_cast<std::ptrdiff_t>(ds_dim + da_dim));
    t.next_state.assign(values.begin() + static_cast<std::ptrdiff_t>(ds_dim + da_dim),
                        values.end());
    ds.add(std::move(t));
  }
  return ds;
}

TransitionDataset TransitionDataset::read_csv(const std::filesystem::path& path,
                                              const Descriptor& descriptor) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_csv(in, descriptor);
}

std::vector<double> featurize(std::span<const double> state,
                              std::span<const double> action,
                              const Descriptor& descriptor) {
  if (state.size() != descriptor.state_dim || action.size() != descriptor.action_dim) {
    throw std::invalid_argument("featurize: dimensions do not match descriptor");
  }
  for (std::size_t a : descriptor.angle_dims) {
    if (a >= descriptor.state_dim) {
      throw std::invalid_argument("featurize: angle index out of range");
    }
  }
  std::vector<double> out;
  out.reserve(descriptor.feature_dim());
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (descriptor.is_angle(i)) {
      out.push_back(std::sin(state[i]));
      out.push_back(std::cos(state[i]));
    } else {
      out.push_back(state[i]);
    }
  }
  out.insert(out.end(), action.begin(), action.end());
  return out;
}

std::vector<double> target_of(const Transition& record) {
  std::vector<double> delta(record.state.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = record.next_state[i] - record.state[i];
  }
  return delta;
}

std::vector<std::vector<std::size_t>> bootstrap_indices(std::size_t n, std::size_t count,
                                                        Rng& rng) {
  if (n == 0) throw std::invalid_argument("bootstrap: empty dataset");
  std::vector<std::vector<std::size_t>> out(count);
  for (auto& idx : out) {
    idx.resize(n);
    for (auto& i : idx) i = uniform_index(rng, n);
  }
  return out;
}

std::vector<TransitionDataset> bootstrap_resample(const TransitionDataset& dataset,
                                                  std::size_t count, Rng& rng) {
  const auto indices = bootstrap_indices(dataset.size(), count, rng);
  std::vector<TransitionDataset> out;
  out.reserve(count);
  for (const auto& idx : indices) {
    TransitionDataset ds(dataset.descriptor());
    for (std::size_t i : idx) ds.add(dataset[i]);
    out.push_back(std::move(ds));
  }
  return out;
}

}  // namespace pets::dyn
