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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fapcd/common.hpp"

namespace fapcd::citygrid {

struct FacilityCategory {
  int id = 0;
  std::string name;
  bool is_residence = false;
  bool is_elderly = false;
  bool is_life_service = false;

  bool operator==(const FacilityCategory&) const = default;
};

// Residence plus eleven daily-life POI classes plus senior care and senior
// meal programs: fourteen categories, residence at id 0.
std::vector<FacilityCategory> default_categories();

// Throws ValidationError unless ids are dense, unique and exactly one
// category is the residence.
void validate_categories(const std::vector<FacilityCategory>& categories);
int residence_id(const std::vector<FacilityCategory>& categories);

struct Point {
  double x_m = 0.0;
  double y_m = 0.0;
  bool operator==(const Point&) const = default;
};

// One region's facility graph. Storage covers the active nodes only; the
// padded N_max views are produced on demand and are zero past node_count().
struct WalkingGraph {
  int n_max = 64;
  std::vector<int> categories;
  std::vector<Point> positions;
  BinaryMatrix adjacency;

  int node_count() const { return static_cast<int>(categories.size()); }
  Matrix one_hot(int k_cat) const;
  Matrix padded_adjacency() const;
  std::vector<std::uint8_t> node_mask() const;
  int count_category(int category) const;

  bool operator==(const WalkingGraph& other) const;
};

// Symmetry, zero diagonal, category range and capacity. Throws
// ValidationError naming the first offending entry.
void validate_graph(const WalkingGraph& graph, int k_cat);

struct DemandBand {
  double lo = 0.0;  // facilities per thousand residents
  double hi = 0.0;
  bool operator==(const DemandBand&) const = default;
};

std::vector<DemandBand> default_demand_bands(const std::vector<FacilityCategory>& categories);

struct RegionRecord {
  int region_id = 0;
  int grid_row = 0;
  int grid_col = 0;
  // population, elderly population, mean housing price, property fee
  std::vector<double> urban_attributes;
  std::vector<int> demand;
  Matrix grid_features;  // node_count x feature_dim
  double population = 0.0;
  double elderly_population = 0.0;

  bool operator==(const RegionRecord& other) const;
};

struct Region {
  RegionRecord record;
  WalkingGraph graph;
  bool operator==(const Region& other) const = default;
};

inline constexpr int kAttributeDim = 4;

struct Dataset {
  std::vector<Region> regions;
  std::vector<FacilityCategory> categories;
  std::vector<DemandBand> demand_bands;
  double grid_size_m = 2000.0;
  double walk_threshold_m = 1250.0;
  int n_max = 64;
  int feature_dim = 0;

  int k_cat() const { return static_cast<int>(categories.size()); }
  int residence() const { return residence_id(categories); }
  const Region* find(int region_id) const;

  bool operator==(const Dataset& other) const = default;
};

// Full structural check used after loading and after generation.
void validate_dataset(const Dataset& dataset);

// A_ij = 1 iff i != j and |p_i - p_j| <= walk_threshold_m.
WalkingGraph build_walking_graph(std::span<const Point> positions, std::span<const int> categories,
                                 double walk_threshold_m, int n_max, int k_cat);

// 0 when no facility exists, otherwise 1/2/3 for below/inside/above the band.
int classify_count(int count, double population, const DemandBand& band);
std::vector<int> classify_demand(const WalkingGraph& graph, const RegionRecord& record,
                                 std::span<const DemandBand> bands);

struct GeneratorConfig {
  int regions = 64;
  int grid_cols = 0;  // 0 = ceil(sqrt(regions))
  int node_min = 18;
  int node_max = 32;
  int residence_min = 2;
  int residence_max = 5;
  int n_max = 64;
  double balance = 1.0;
  double grid_size_m = 2000.0;
  double walk_threshold_m = 1250.0;
  double residence_radius_m = 300.0;
  int category_embedding_dim = 8;
  double person_per_residence_min = 500.0;
  double person_per_residence_max = 1500.0;
  std::vector<FacilityCategory> categories = default_categories();
  std::vector<DemandBand> demand_bands;  // empty = defaults

  void validate() const;
};

// Deterministic in (config, seed). Every non-residence category receives an
// anchor facility; with probability `balance` the anchor lands within walking
// distance of every residence, otherwise in a cluster out of reach of all of
// them. Extra facilities are uniform in the cell (probability `balance`) or
// join the far cluster.
Dataset generate_synthetic_city(const GeneratorConfig& config, std::uint64_t seed);

// The part of a region that planning keeps fixed: residence slots, their
// positions and the walkability among them. Facility slots stay free.
struct ResidenceTemplate {
  int n_max = 64;
  int node_count = 0;
  int residence_category = 0;
  std::vector<std::uint8_t> is_residence;
  std::vector<Point> positions;
  BinaryMatrix adjacency;  // residence-residence entries only

  int residence_count() const;
};

ResidenceTemplate residence_template(const WalkingGraph& graph, int residence_category);
// The template seen as a graph: residences keep their category, facility
// slots get `placeholder` and no edges.
WalkingGraph template_graph(const ResidenceTemplate& tmpl, int placeholder);

struct GraphBatch {
  int n_max = 0;
  int k_cat = 0;
  std::vector<Matrix> node_features;  // n_max x k_cat one-hot
  std::vector<Matrix> adjacency;      // n_max x n_max
  std::vector<Matrix> positions;      // n_max x 2
  std::vector<std::vector<std::uint8_t>> masks;

  std::size_t size() const { return masks.size(); }
};

GraphBatch pad_batch(std::span<const WalkingGraph> graphs, int n_max, int k_cat);
std::vector<WalkingGraph> unbatch(const GraphBatch& batch);

}  // namespace fapcd::citygrid
