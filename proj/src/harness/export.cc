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

#include "pets/harness/export.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pets::harness {
namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<double> read_rewards(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot read " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(csv.string() + ": empty file");
  const auto header = split(line);
  const auto col = [&](const char* name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw std::runtime_error(csv.string() + ": missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t trial_col = col("trial");
  const std::size_t reward_col = col("reward");
  std::vector<double> rewards;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() <= std::max(trial_col, reward_col)) {
      throw std::runtime_error(csv.string() + ": short row");
    }
    if (std::stoul(cells[trial_col]) != rewards.size()) {
      throw std::runtime_error(csv.string() + ": trials out of order");
    }
    rewards.push_back(std::stod(cells[reward_col]));
  }
  return rewards;
}

bool is_run_dir(const fs::path& dir) {
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0 &&
        fs::exists(e.path() / "trials.csv")) {
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<double> max_so_far(std::span<const double> rewards) {
  std::vector<double> out(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out[i] = i == 0 ? rewards[0] : std::max(out[i - 1], rewards[i]);
  }
  return out;
}

std::vector<SeedCurve> read_curves(const fs::path& run_dir) {
  std::vector<SeedCurve> curves;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    const std::string name = e.path().filename().string();
    if (!e.is_directory() || name.rfind("seed_", 0) != 0) continue;
    if (!fs::exists(e.path() / "trials.csv")) continue;
    SeedCurve c;
    c.seed = std::stoull(name.substr(5));
    c.reward = read_rewards(e.path() / "trials.csv");
    curves.push_back(std::move(c));
  }
  std::sort(curves.begin(), curves.end(),
            [](const SeedCurve& a, const SeedCurve& b) { return a.seed < b.seed; });
  return curves;
}

std::vector<CurveBand> curve_bands(const std::vector<SeedCurve>& curves) {
  std::size_t trials = 0;
  for (const auto& c : curves) trials = std::max(trials, c.reward.size());
  std::vector<std::vector<double>> best;
  for (const auto& c : curves) best.push_back(max_so_far(c.reward));
  std::vector<CurveBand> bands;
  for (std::size_t t = 0; t < trials; ++t) {
    CurveBand b;
    b.trial = t;
    b.low = std::numeric_limits<double>::infinity();
    b.high = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (const auto& m : best) {
      if (t >= m.size()) continue;
      ++b.seeds;
      sum += m[t];
      b.low = std::min(b.low, m[t]);
      b.high = std::max(b.high, m[t]);
    }
    b.mean = sum / static_cast<double>(b.seeds);
    bands.push_back(b);
  }
  return bands;
}

void write_curves_csv(const std::vector<SeedCurve>& curves, std::ostream& out) {
  out << "trial,seed,reward,reward_maxsofar\n";
  for (const auto& c : curves) {
    const auto best = max_so_far(c.reward);
    for (std::size_t t = 0; t < c.reward.size(); ++t) {
      out << t << ',' << c.seed << ',' << fmt(c.reward[t]) << ',' << fmt(best[t]) << '\n';
    }
  }
}

void write_bands_csv(const std::vector<CurveBand>& bands, std::ostream& out) {
  out << "trial,seeds,mean_maxsofar,min_maxsofar,max_maxsofar\n";
  for (const auto& b : bands) {
    out << b.trial << ',' << b.seeds << ',' << fmt(b.mean) << ',' << fmt(b.low) << ','
        << fmt(b.high) << '\n';
  }
}

void write_curves_svg(const std::vector<SeedCurve>& curves,
                      const std::vector<CurveBand>& bands, std::ostream& out) {
  const double w = 640, h = 400, left = 60, right = 20, top = 20, bottom = 45;
  double lo = 0.0, hi = 1.0;
  if (!bands.empty()) {
    lo = bands.front().low;
    hi = bands.front().high;
    for (const auto& b : bands) {
      lo = std::min(lo, b.low);
      hi = std::max(hi, b.high);
    }
  }
  for (const auto& c : curves) {
    for (double r : c.reward) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  if (hi - lo < 1e-9) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double last = bands.size() > 1 ? static_cast<double>(bands.size() - 1) : 1.0;
  const auto px = [&](double t) { return left + (w - left - right) * t / last; };
  const auto py = [&](double v) { return top + (h - top - bottom) * (hi - v) / (hi - lo); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right
      << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << h - bottom << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"" << h - 8
      << "\" text-anchor=\"middle\" font-size=\"12\">trial</text>\n";
  out << "<text x=\"14\" y=\"" << h / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
      << "transform=\"rotate(-90 14 " << h / 2 << ")\">reward (max so far)</text>\n";
  out << "<text x=\"" << left - 4 << "\" y=\"" << py(hi) + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << fmt_short(hi) << "</text>\n";
  out << "<text x=\"" << left - 4 << "\" y=\"" << py(lo) + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << fmt_short(lo) << "</text>\n";
  out << "<text x=\"" << px(last) << "\" y=\"" << h - bottom + 14
      << "\" text-anchor=\"middle\" font-size=\"10\">" << bands.size() - (bands.empty() ? 0 : 1)
      << "</text>\n";

  if (!bands.empty()) {
    out << "<polygon fill=\"#4c72b0\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (const auto& b : bands) out << fmt_short(px(b.trial)) << ',' << fmt_short(py(b.high)) << ' ';
    for (auto it = bands.rbegin(); it != bands.rend(); ++it) {
      out << fmt_short(px(it->trial)) << ',' << fmt_short(py(it->low)) << ' ';
    }
    out << "\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"#4c72b0\" stroke-width=\"2\" points=\"";
    for (const auto& b : bands) out << fmt_short(px(b.trial)) << ',' << fmt_short(py(b.mean)) << ' ';
    out << "\"/>\n";
  }
  for (const auto& c : curves) {
    out << "<polyline fill=\"none\" stroke=\"#999999\" stroke-width=\"0.8\" points=\"";
    for (std::size_t t = 0; t < c.reward.size(); ++t) {
      out << fmt_short(px(static_cast<double>(t))) << ',' << fmt_short(py(c.reward[t])) << ' ';
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
}

std::size_t export_curves(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) {
    throw std::invalid_argument("export: not a directory: " + run_dir.string());
  }
  std::size_t exported = 0;
  if (is_run_dir(run_dir)) {
    const auto curves = read_curves(run_dir);
    const auto bands = curve_bands(curves);
    std::ofstream csv(run_dir / "curves.csv", std::ios::binary | std::ios::trunc);
    write_curves_csv(curves, csv);
    std::ofstream summary(run_dir / "curves_summary.csv", std::ios::binary | std::ios::trunc);
    write_bands_csv(bands, summary);
    std::ofstream svg(run_dir / "curves.svg", std::ios::binary | std::ios::trunc);
    write_curves_svg(curves, bands, svg);
    if (!csv || !summary || !svg) throw std::runtime_error("export: write failed in " + run_dir.string());
    ++exported;
  }
  std::vector<fs::path> children;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_directory() && (name.rfind("cell_", 0) == 0 || name.rfind("horizon_", 0) == 0)) {
      children.push_back(e.path());
    }
  }
  std::sort(children.begin(), children.end());
  for (const auto& c : children) exported += export_curves(c);
  return exported;
}

}  // namespace pets::harness
