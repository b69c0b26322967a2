// Copyright 2026 The fapcd Authors.
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

#pragma once

// Nested-loop reference implementations of the layout metrics. They read the
// raw graph and category table only and share no code with fapcd::metrics.

#include <cmath>
#include <utility>
#include <vector>

#include "fapcd/citygrid.hpp"

namespace oracle {

struct PublishedRow {
  const char* method;
  double life, elderly, diversity, access, gini, average;
};

inline const std::vector<PublishedRow>& published_scores() {
  static const std::vector<PublishedRow> rows = {
      {"Walking-based", 0.419, 0.223, 0.600, 0.167, 0.710, 0.140},
      {"ACA", 0.484, 0.501, 0.749, 0.111, 0.869, 0.195},
      {"GA", 0.445, 0.393, 0.645, 0.102, 0.479, 0.221},
      {"DRF", 0.449, 0.604, 0.728, 0.123, 0.376, 0.306},
      {"VGAE", 0.180, 0.263, 0.218, 0.356, 0.701, 0.063},
      {"GraphRNN", 0.442, 0.546, 0.503, 0.361, 0.387, 0.293},
      {"CondGEN", 0.643, 0.667, 0.563, 0.345, 0.323, 0.379},
      {"DDPM", 0.564, 0.689, 0.820, 0.402, 0.394, 0.416},
      {"EDGE", 0.431, 0.590, 0.667, 0.234, 0.327, 0.341},
      {"FAP-CD", 0.888, 0.923, 0.843, 0.520, 0.232, 0.588},
  };
  return rows;
}

struct RegionScores {
  bool has_residence = false;
  double life = 0, elderly = 0, life_literal = 0, elderly_literal = 0;
  double diversity = 0, access_raw = 0;
};

// max over facilities n of category k of A[n][h]
inline int reached(const fapcd::citygrid::WalkingGraph& g, int k, int h) {
  int best = 0;
  for (int n = 0; n < g.node_count(); ++n)
    if (g.categories[n] == k) best = std::max(best, static_cast<int>(g.adjacency(n, h)));
  return best;
}

inline RegionScores score_region(const fapcd::citygrid::WalkingGraph& g,
                                 const std::vector<fapcd::citygrid::FacilityCategory>& cats,
                                 double population) {
  RegionScores s;
  int res_cat = -1;
  for (const auto& c : cats)
    if (c.is_residence) res_cat = c.id;
  std::vector<int> homes;
  for (int i = 0; i < g.node_count(); ++i)
    if (g.categories[i] == res_cat) homes.push_back(i);
  s.has_residence = !homes.empty();

  auto eff = [&](bool elderly, bool literal) {
    double sum = 0.0;
    int k_count = 0;
    for (const auto& c : cats) {
      if (c.is_residence || (elderly ? !c.is_elderly : !c.is_life_service)) continue;
      ++k_count;
      int facilities = 0;
      for (int n = 0; n < g.node_count(); ++n) facilities += g.categories[n] == c.id;
      if (facilities == 0) continue;
      double hits = 0.0;
      for (int h : homes) hits += reached(g, c.id, h);
      sum += hits / (literal ? facilities : static_cast<double>(homes.size()));
    }
    return sum / k_count;
  };
  if (s.has_residence) {
    s.life = eff(false, false);
    s.elderly = eff(true, false);
    s.life_literal = eff(false, true);
    s.elderly_literal = eff(true, true);
  }

  std::vector<bool> seen(cats.size(), false);
  for (int c : g.categories)
    if (c != res_cat) seen[c] = true;
  int distinct = 0;
  for (bool b : seen) distinct += b;
  s.diversity = distinct / static_cast<double>(cats.size() - 1);

  if (s.has_residence) {
    double sum = 0.0;
    int k_count = 0;
    for (const auto& c : cats) {
      if (c.is_residence) continue;
      ++k_count;
      double hits = 0.0;
      for (int h : homes) hits += reached(g, c.id, h);
      sum += hits;
    }
    s.access_raw = sum / k_count / (population / 1000.0);
  }
  return s;
}

// 1 - 2 sum_i sum_{j<=i} X_(j) / (N sum X), summed literally.
inline double gini(std::vector<double> x) {
  for (std::size_t i = 1; i < x.size(); ++i)
    for (std::size_t j = i; j > 0 && x[j - 1] > x[j]; --j) std::swap(x[j - 1], x[j]);
  double total = 0.0;
  for (double v : x) total += v;
  double nested = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j <= i; ++j) inner += x[j];
    nested += inner;
  }
  return 1.0 - 2.0 * nested / (static_cast<double>(x.size()) * total);
}

inline std::vector<double> morans_i(const std::vector<double>& x,
                                    const std::vector<std::pair<int, int>>& cells) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0;
  for (double v : x) m2 += (v - mean) * (v - mean);
  m2 /= static_cast<double>(n);
  auto rook = [&](std::size_t i, std::size_t j) {
    return std::abs(cells[i].first - cells[j].first) + std::abs(cells[i].second - cells[j].second) == 1;
  };
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    int neighbours = 0;
    for (std::size_t j = 0; j < n; ++j) neighbours += rook(i, j);
    // Row-standardized weight 1 / |N(i)| on each rook neighbour.
    double lag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = rook(i, j) ? 1.0 / neighbours : 0.0;
      lag += w * (x[j] - mean);
    }
    out[i] = (x[i] - mean) / m2 * lag;
  }
  return out;
}

}  // namespace oracle
