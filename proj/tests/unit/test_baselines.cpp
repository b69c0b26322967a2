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

#include <cmath>
#include <functional>
#include <sstream>

#include "doctest.h"

#include "fapcd/baselines.hpp"
#include "fapcd/error.hpp"
#include "fixtures.hpp"
#include "json.hpp"

using namespace fapcd;
using namespace fapcd::baselines;
using citygrid::Dataset;
using citygrid::Region;

namespace {

// Two-category world: residences and one elderly facility type.
Dataset senior_world() {
  Dataset ds;
  ds.categories = {{0, "residence", true, false, false}, {1, "senior_care", false, true, false}};
  ds.demand_bands = citygrid::default_demand_bands(ds.categories);
  ds.feature_dim = 1;
  return ds;
}

void add_region(Dataset& ds, int id, double population, int residences, int seniors) {
  Region r;
  std::vector<citygrid::Point> pos;
  std::vector<int> cats;
  for (int i = 0; i < residences; ++i) {
    pos.push_back({400.0 + 200.0 * i, 400.0});
    cats.push_back(0);
  }
  for (int i = 0; i < seniors; ++i) {
    pos.push_back({400.0 + 100.0 * i, 700.0});
    cats.push_back(1);
  }
  r.graph = citygrid::build_walking_graph(pos, cats, ds.walk_threshold_m, ds.n_max, ds.k_cat());
  r.record.region_id = id;
  r.record.grid_row = 0;
  r.record.grid_col = id;
  r.record.urban_attributes.assign(citygrid::kAttributeDim, 0.0);
  r.record.population = population;
  r.record.elderly_population = 0.2 * population;
  r.record.grid_features = Matrix::Zero(static_cast<Eigen::Index>(cats.size()), 1);
  r.record.demand = citygrid::classify_demand(r.graph, r.record, ds.demand_bands);
  ds.regions.push_back(std::move(r));
}

AllocationBudget units(const Dataset& ds, std::vector<int> u, int cap = 60) {
  AllocationBudget b;
  b.total_units = std::move(u);
  b.per_region_cap = cap;
  b.validate(ds);
  return b;
}

// Best achievable minimum share over every sequence of single-unit grants
// that only serves unmet requirements and spends while it can.
double best_min_share(std::vector<int> have, const std::vector<int>& req, int budget) {
  bool moved = false;
  double best = -1.0;
  for (std::size_t i = 0; i < have.size(); ++i) {
    if (req[i] == 0 || have[i] >= req[i] || budget == 0) continue;
    moved = true;
    have[i] += 1;
    best = std::max(best, best_min_share(have, req, budget - 1));
    have[i] -= 1;
  }
  if (moved) return best;
  double mn = 1e300;
  for (std::size_t i = 0; i < have.size(); ++i)
    if (req[i] > 0) mn = std::min(mn, static_cast<double>(have[i]) / req[i]);
  return mn;
}

}  // namespace

TEST_CASE("walking baseline returns the input unchanged") {
  Rng rng(1);
  const auto ds = fixtures::random_layouts(rng, 5, 8);
  const auto a = walking_based(ds);
  const auto b = walking_based(ds);
  CHECK(a.layouts == ds);
  CHECK(a.report.label == "Walking-based");
  CHECK(metrics::report_to_json(a.report) == metrics::report_to_json(b.report));
  citygrid::GeneratorConfig g;
  g.regions = 8;
  g.balance = 1.0;
  CHECK(walking_based(citygrid::generate_synthetic_city(g, 3)).report.life_service == 1.0);
}

TEST_CASE("requirements reach the band midpoint for under-served categories") {
  auto ds = senior_world();
  add_region(ds, 0, 6000.0, 3, 1);  // 1/6 per thousand < 0.25
  add_region(ds, 1, 2000.0, 2, 1);  // 0.5 per thousand, in band
  CHECK(requirements(ds.regions[0], ds) == std::vector<int>{0, 3});
  CHECK(requirements(ds.regions[1], ds) == std::vector<int>{0, 0});
  CHECK(dominant_share({3, 1}, {0, 3}) == doctest::Approx(1.0 / 3.0));
  CHECK(dominant_share({3, 1}, {0, 0}) == 0.0);
}

TEST_CASE("the unit goes to the unserved region") {
  auto ds = senior_world();
  add_region(ds, 0, 2000.0, 2, 1);
  add_region(ds, 1, 6000.0, 3, 0);
  const auto res = drf_allocate(ds, units(ds, {0, 1}));
  REQUIRE(res.grants.size() == 1);
  CHECK(res.grants[0].region_id == 1);
  CHECK(res.grants[0].category == 1);
  CHECK(res.layouts.regions[1].graph.count_category(1) == 1);
  CHECK(res.units_left == std::vector<int>{0, 0});
}

TEST_CASE("equal shares go to the lowest region id") {
  auto ds = senior_world();
  add_region(ds, 7, 6000.0, 2, 0);
  add_region(ds, 3, 6000.0, 2, 0);
  const auto res = drf_allocate(ds, units(ds, {0, 1}));
  REQUIRE(res.grants.size() == 1);
  CHECK(res.grants[0].region_id == 3);
}

TEST_CASE("greedy grants reach the exhaustive max-min share on single-resource instances") {
  Rng rng(2);
  std::uniform_real_distribution<double> pop(1000.0, 12000.0);
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto ds = senior_world();
    std::vector<int> have, req;
    for (int r = 0; r < 3; ++r) {
      const double p = pop(rng);
      const int limit = static_cast<int>(std::ceil(0.25 * p / 1000.0)) - 1;
      std::uniform_int_distribution<int> count(0, std::max(0, limit));
      const int c = count(rng);
      add_region(ds, r, p, 2, c);
      have.push_back(c);
      req.push_back(static_cast<int>(std::ceil(0.5 * p / 1000.0 - 1e-9)));
    }
    const auto got = drf_allocate(ds, units(ds, {0, 5}));
    std::vector<int> after = have;
    for (const auto& g : got.grants) after[g.region_id] += 1;
    double mn = 1e300;
    for (int r = 0; r < 3; ++r) mn = std::min(mn, static_cast<double>(after[r]) / req[r]);
    CHECK(mn == doctest::Approx(best_min_share(have, req, 5)).epsilon(1e-12));
    ++compared;
  }
  CHECK(compared == 200);
}

TEST_CASE("allocation respects budget, caps, and the decision-log ordering") {
  Rng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    citygrid::GeneratorConfig gc;
    gc.regions = 6;
    gc.balance = 0.2;
    const auto ds = citygrid::generate_synthetic_city(gc, 100 + trial);
    int cap = 0;
    for (const auto& r : ds.regions) cap = std::max(cap, r.graph.node_count() - r.graph.count_category(0));
    cap += trial % 4;
    std::vector<int> u(ds.k_cat(), 0);
    std::uniform_int_distribution<int> draw(0, 3);
    for (int k = 1; k < ds.k_cat(); ++k) u[k] = draw(rng);
    u[13] += 1;
    const auto budget = units(ds, u, cap);
    const auto res = drf_allocate(ds, budget);
    for (int k = 0; k < ds.k_cat(); ++k) {
      CHECK(res.units_left[k] >= 0);
      int granted = 0;
      for (const auto& g : res.grants) granted += g.category == k;
      CHECK(granted == u[k] - res.units_left[k]);
    }
    for (std::size_t r = 0; r < ds.regions.size(); ++r) {
      const auto& g = res.layouts.regions[r].graph;
      CHECK(g.node_count() - g.count_category(0) <= cap);
      CHECK(g.node_count() <= ds.n_max);
      const int n0 = ds.regions[r].graph.node_count();
      CHECK(g.adjacency.topLeftCorner(n0, n0) == ds.regions[r].graph.adjacency);
      const auto rebuilt = citygrid::build_walking_graph(g.positions, g.categories,
                                                         ds.walk_threshold_m, ds.n_max, ds.k_cat());
      CHECK(rebuilt.adjacency == g.adjacency);
    }
    for (const auto& g : res.grants) CHECK(g.share_before <= g.min_other_share);
    citygrid::validate_dataset(res.layouts);
  }
}

TEST_CASE("decision log is one JSON object per grant") {
  auto ds = senior_world();
  add_region(ds, 0, 6000.0, 2, 0);
  add_region(ds, 1, 9000.0, 2, 1);
  const auto res = drf_allocate(ds, units(ds, {0, 4}));
  std::ostringstream out;
  write_decision_log(out, res.grants);
  std::istringstream in(out.str());
  std::string line;
  int count = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("step").get<int>() == count);
    CHECK(j.at("dominant_share").get<double>() <= j.at("min_other_share").get<double>());
    ++count;
  }
  CHECK(count == static_cast<int>(res.grants.size()));
  CHECK(count == 4);
}

TEST_CASE("nothing to allocate and bad budgets") {
  auto ds = senior_world();
  add_region(ds, 0, 2000.0, 2, 1);
  const auto res = drf_allocate(ds, units(ds, {0, 2}));
  CHECK(res.grants.empty());
  CHECK_FALSE(res.notice.empty());
  CHECK_THROWS_AS(drf_allocate(ds, units(ds, {0, 0})), InputError);
  CHECK_THROWS_AS(units(ds, {1, 1}), ConfigError);
  CHECK_THROWS_AS(units(ds, {0, -1}), ConfigError);
  CHECK_THROWS_AS(units(ds, {0, 1}, 0), ConfigError);
  const auto b = budget_from_json(nlohmann::json::parse(R"({"per_region_cap": 5, "total_units": {"senior_care": 3}})"), ds);
  CHECK(b.total_units == std::vector<int>{0, 3});
  CHECK(budget_from_json(budget_to_json(b, ds.categories), ds).total_units == b.total_units);
  CHECK_THROWS_AS(budget_from_json(nlohmann::json::parse(R"({"per_region_cap": 5, "total_units": {"spa": 3}})"), ds),
                  ConfigError);
}
