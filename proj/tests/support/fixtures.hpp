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

#include <random>

#include "fapcd/citygrid.hpp"

namespace fixtures {

// Small random layouts: up to max_nodes nodes, each node a residence with
// probability 0.35, random symmetric adjacency, regions on a square grid.
inline fapcd::citygrid::Dataset random_layouts(fapcd::Rng& rng, int regions, int max_nodes) {
  using namespace fapcd::citygrid;
  Dataset ds;
  ds.categories = default_categories();
  ds.demand_bands = default_demand_bands(ds.categories);
  ds.feature_dim = 2;
  const int k = ds.k_cat();
  std::uniform_int_distribution<int> size(1, max_nodes);
  std::uniform_int_distribution<int> facility(1, k - 1);
  std::bernoulli_distribution residence(0.35);
  std::uniform_real_distribution<double> density(0.1, 0.9);
  std::uniform_real_distribution<double> pop(300.0, 6000.0);
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(regions))));
  for (int r = 0; r < regions; ++r) {
    Region region;
    const int n = size(rng);
    auto& g = region.graph;
    g.n_max = ds.n_max;
    for (int i = 0; i < n; ++i) {
      g.categories.push_back(residence(rng) ? 0 : facility(rng));
      g.positions.push_back({100.0 * i, 50.0});
    }
    g.adjacency = fapcd::BinaryMatrix::Zero(n, n);
    std::bernoulli_distribution edge(density(rng));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (edge(rng)) g.adjacency(i, j) = g.adjacency(j, i) = 1;
    auto& rec = region.record;
    rec.region_id = r;
    rec.grid_row = r / side;
    rec.grid_col = r % side;
    rec.urban_attributes.assign(kAttributeDim, 0.0);
    rec.population = pop(rng);
    rec.elderly_population = 0.2 * rec.population;
    rec.grid_features = fapcd::Matrix::Zero(n, ds.feature_dim);
    rec.demand = classify_demand(g, rec, ds.demand_bands);
    ds.regions.push_back(std::move(region));
  }
  return ds;
}

}  // namespace fixtures
