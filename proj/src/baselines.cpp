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

#include "fapcd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "fapcd/error.hpp"

namespace fapcd::baselines {

using nlohmann::json;

void AllocationBudget::validate(const citygrid::Dataset& dataset) const {
  if (static_cast<int>(total_units.size()) != dataset.k_cat())
    throw ConfigError("budget lists " + std::to_string(total_units.size()) +
                      " categories, dataset has " + std::to_string(dataset.k_cat()));
  for (int u : total_units)
    if (u < 0) throw ConfigError("budget counts must be non-negative");
  if (total_units[dataset.residence()] != 0)
    throw ConfigError("residences cannot be allocated");
  if (per_region_cap < 0) throw ConfigError("per_region_cap must be non-negative");
  for (const auto& r : dataset.regions) {
    const int facilities = r.graph.node_count() - r.graph.count_category(dataset.residence());
    if (facilities > per_region_cap)
      throw ConfigError("region " + std::to_string(r.record.region_id) + " already holds " +
                        std::to_string(facilities) + " facilities, above per_region_cap " +
                        std::to_string(per_region_cap));
  }
}

AllocationBudget budget_from_json(const json& j, const citygrid::Dataset& dataset) {
  AllocationBudget b;
  try {
    b.per_region_cap = j.at("per_region_cap").get<int>();
    const auto& units = j.at("total_units");
    b.total_units.assign(dataset.k_cat(), 0);
    if (units.is_array()) {
      b.total_units = units.get<std::vector<int>>();
    } else {
      for (auto it = units.begin(); it != units.end(); ++it) {
        auto cat = std::find_if(dataset.categories.begin(), dataset.categories.end(),
                                [&](const auto& c) { return c.name == it.key(); });
        if (cat == dataset.categories.end())
          throw ConfigError("budget names unknown category '" + it.key() + "'");
        b.total_units[cat->id] = it.value().get<int>();
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed budget: ") + e.what());
  }
  b.validate(dataset);
  return b;
}

json budget_to_json(const AllocationBudget& budget,
                    const std::vector<citygrid::FacilityCategory>& categories) {
  json units = json::object();
  for (const auto& c : categories)
    if (!c.is_residence) units[c.name] = budget.total_units.at(c.id);
  return {{"per_region_cap", budget.per_region_cap}, {"total_units", units}};
}

WalkingResult walking_based(const citygrid::Dataset& dataset, metrics::EfficiencyMode mode) {
  return {dataset, metrics::evaluate(dataset, dataset, mode, "Walking-based")};
}

std::vector<int> requirements(const citygrid::Region& region, const citygrid::Dataset& dataset) {
  std::vector<int> req(dataset.k_cat(), 0);
  for (const auto& c : dataset.categories) {
    if (c.is_residence) continue;
    const int cls = region.record.demand.at(c.id);
    if (cls > 1) continue;
    const auto& band = dataset.demand_bands.at(c.id);
    const double mid = 0.5 * (band.lo + band.hi);
    req[c.id] = static_cast<int>(std::ceil(mid * region.record.population / 1000.0 - 1e-9));
  }
  return req;
}

double dominant_share(const std::vector<int>& have, const std::vector<int>& req) {
  double share = 0.0;
  for (std::size_t k = 0; k < req.size(); ++k)
    if (req[k] > 0) share = std::max(share, static_cast<double>(have[k]) / req[k]);
  return share;
}

namespace {

struct RegionState {
  std::vector<int> have;
  std::vector<int> req;
  int facilities = 0;
};

// Category with the lowest have/req that still has budget; -1 if none.
int most_deficient(const RegionState& s, const std::vector<int>& units) {
  int best = -1;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < s.req.size(); ++k) {
    if (s.req[k] <= 0 || s.have[k] >= s.req[k] || units[k] <= 0) continue;
    const double ratio = static_cast<double>(s.have[k]) / s.req[k];
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best = static_cast<int>(k);
    }
  }
  return best;
}

int least_covered_residence(const citygrid::WalkingGraph& g, int res) {
  int best = -1;
  int best_cover = std::numeric_limits<int>::max();
  for (int h = 0; h < g.node_count(); ++h) {
    if (g.categories[h] != res) continue;
    std::vector<int> seen;
    for (int f = 0; f < g.node_count(); ++f)
      if (g.adjacency(h, f) && g.categories[f] != res &&
          std::find(seen.begin(), seen.end(), g.categories[f]) == seen.end())
        seen.push_back(g.categories[f]);
    if (static_cast<int>(seen.size()) < best_cover) {
      best_cover = static_cast<int>(seen.size());
      best = h;
    }
  }
  return best;
}

Matrix feature_row_for(const citygrid::Dataset& dataset, int category) {
  for (const auto& r : dataset.regions)
    for (int i = 0; i < r.graph.node_count(); ++i)
      if (r.graph.categories[i] == category) return r.record.grid_features.row(i);
  return Matrix::Zero(1, dataset.feature_dim);
}

void add_node(citygrid::Region& region, const citygrid::Dataset& dataset, int category,
              citygrid::Point p) {
  auto& g = region.graph;
  const int n = g.node_count();
  g.categories.push_back(category);
  g.positions.push_back(p);
  BinaryMatrix adj = BinaryMatrix::Zero(n + 1, n + 1);
  adj.topLeftCorner(n, n) = g.adjacency;
  for (int j = 0; j < n; ++j) {
    const double d = std::hypot(g.positions[j].x_m - p.x_m, g.positions[j].y_m - p.y_m);
    if (d <= dataset.walk_threshold_m) adj(n, j) = adj(j, n) = 1;
  }
  g.adjacency = std::move(adj);
  Matrix feats(n + 1, dataset.feature_dim);
  feats.topRows(n) = region.record.grid_features;
  feats.row(n) = feature_row_for(dataset, category);
  region.record.grid_features = std::move(feats);
}

}  // namespace

AllocationResult drf_allocate(const citygrid::Dataset& dataset, const AllocationBudget& budget) {
  budget.validate(dataset);
  int total = 0;
  for (int u : budget.total_units) total += u;
  if (total == 0) throw InputError("allocation budget is empty");
  const int res = dataset.residence();
  AllocationResult out;
  out.layouts = dataset;
  out.units_left = budget.total_units;

  std::vector<RegionState> state(dataset.regions.size());
  bool any_requirement = false;
  for (std::size_t r = 0; r < dataset.regions.size(); ++r) {
    const auto& region = dataset.regions[r];
    state[r].req = requirements(region, dataset);
    state[r].have.assign(dataset.k_cat(), 0);
    for (int c : region.graph.categories) state[r].have[c] += 1;
    state[r].facilities = region.graph.node_count() - state[r].have[res];
    for (int q : state[r].req) any_requirement = any_requirement || q > 0;
  }
  if (!any_requirement) {
    out.notice = "nothing to allocate: no region has an unmet requirement";
    return out;
  }

  // Regions in region_id order so that ties resolve to the lowest id.
  std::vector<std::size_t> order(dataset.regions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dataset.regions[a].record.region_id < dataset.regions[b].record.region_id;
  });

  for (int step = 0;; ++step) {
    std::vector<std::pair<double, std::size_t>> eligible;
    for (std::size_t r : order) {
      const auto& s = state[r];
      if (s.facilities >= budget.per_region_cap) continue;
      if (out.layouts.regions[r].graph.node_count() >= dataset.n_max) continue;
      if (out.layouts.regions[r].graph.count_category(res) == 0) continue;
      if (most_deficient(s, out.units_left) < 0) continue;
      eligible.emplace_back(dominant_share(s.have, s.req), r);
    }
    if (eligible.empty()) break;
    std::size_t pick = 0;
    for (std::size_t i = 1; i < eligible.size(); ++i)
      if (eligible[i].first < eligible[pick].first) pick = i;
    const std::size_t r = eligible[pick].second;
    auto& s = state[r];
    const int k = most_deficient(s, out.units_left);
    auto& region = out.layouts.regions[r];
    const int h = least_covered_residence(region.graph, res);
    const citygrid::Point home = region.graph.positions[h];
    const double centre = 0.5 * dataset.grid_size_m;
    const double dx = centre - home.x_m;
    const double dy = centre - home.y_m;
    const double len = std::hypot(dx, dy);
    // A short step toward the cell centre keeps the node inside the cell.
    const double stepm = std::min(50.0, len);
    const citygrid::Point p = len > 0 ? citygrid::Point{home.x_m + stepm * dx / len,
                                                        home.y_m + stepm * dy / len}
                                      : home;
    Grant g;
    g.step = step;
    g.region_id = region.record.region_id;
    g.category = k;
    g.share_before = eligible[pick].first;
    g.min_other_share = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < eligible.size(); ++i)
      if (i != pick) g.min_other_share = std::min(g.min_other_share, eligible[i].first);
    if (eligible.size() == 1) g.min_other_share = g.share_before;
    g.node_index = region.graph.node_count();
    g.position = p;
    add_node(region, dataset, k, p);
    s.have[k] += 1;
    s.facilities += 1;
    out.units_left[k] -= 1;
    out.grants.push_back(g);
  }
  return out;
}

void write_decision_log(std::ostream& out, const std::vector<Grant>& grants) {
  for (const auto& g : grants) {
    const json line = {{"step", g.step},
                       {"region_id", g.region_id},
                       {"category", g.category},
                       {"dominant_share", g.share_before},
                       {"min_other_share", g.min_other_share},
                       {"node_index", g.node_index},
                       {"x_m", g.position.x_m},
                       {"y_m", g.position.y_m}};
    out << line.dump() << '\n';
  }
}

}  // namespace fapcd::baselines
