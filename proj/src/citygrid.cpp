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

#include "fapcd/citygrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "fapcd/error.hpp"
#include "fapcd/kernels.hpp"

namespace fapcd::citygrid {

std::vector<FacilityCategory> default_categories() {
  const char* life[] = {"catering",  "medical", "shopping", "education",      "park",          "sports",
                        "culture",   "finance", "transport", "public_service", "daily_service"};
  std::vector<FacilityCategory> out;
  out.push_back({0, "residence", true, false, false});
  int id = 1;
  for (const char* name : life) out.push_back({id++, name, false, false, true});
  out.push_back({id++, "senior_care", false, true, false});
  out.push_back({id++, "senior_meal", false, true, false});
  return out;
}

void validate_categories(const std::vector<FacilityCategory>& categories) {
  if (categories.size() < 2) throw ValidationError("category table needs at least two entries");
  int residences = 0;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i].id != static_cast<int>(i))
      throw ValidationError("category ids must be dense: entry " + std::to_string(i) + " has id " +
                            std::to_string(categories[i].id));
    residences += categories[i].is_residence ? 1 : 0;
  }
  if (residences != 1)
    throw ValidationError("exactly one residence category required, found " +
                          std::to_string(residences));
}

int residence_id(const std::vector<FacilityCategory>& categories) {
  for (const auto& c : categories)
    if (c.is_residence) return c.id;
  throw ValidationError("category table has no residence category");
}

Matrix WalkingGraph::one_hot(int k_cat) const {
  Matrix x = Matrix::Zero(n_max, k_cat);
  for (int i = 0; i < node_count(); ++i) x(i, categories[i]) = 1.0;
  return x;
}

Matrix WalkingGraph::padded_adjacency() const {
  Matrix a = Matrix::Zero(n_max, n_max);
  const int n = node_count();
  a.topLeftCorner(n, n) = adjacency.cast<double>();
  return a;
}

std::vector<std::uint8_t> WalkingGraph::node_mask() const {
  std::vector<std::uint8_t> mask(n_max, 0);
  std::fill(mask.begin(), mask.begin() + node_count(), 1);
  return mask;
}

int WalkingGraph::count_category(int category) const {
  return static_cast<int>(std::count(categories.begin(), categories.end(), category));
}

bool WalkingGraph::operator==(const WalkingGraph& other) const {
  return n_max == other.n_max && categories == other.categories && positions == other.positions &&
         adjacency.rows() == other.adjacency.rows() && adjacency.cols() == other.adjacency.cols() &&
         (adjacency.size() == 0 || adjacency == other.adjacency);
}

bool RegionRecord::operator==(const RegionRecord& other) const {
  return region_id == other.region_id && grid_row == other.grid_row &&
         grid_col == other.grid_col && urban_attributes == other.urban_attributes &&
         demand == other.demand && grid_features.rows() == other.grid_features.rows() &&
         grid_features.cols() == other.grid_features.cols() &&
         (grid_features.size() == 0 || grid_features == other.grid_features) &&
         population == other.population && elderly_population == other.elderly_population;
}

void validate_graph(const WalkingGraph& graph, int k_cat) {
  const int n = graph.node_count();
  if (n > graph.n_max)
    throw CapacityError("graph has " + std::to_string(n) + " nodes, capacity " +
                        std::to_string(graph.n_max));
  if (graph.adjacency.rows() != n || graph.adjacency.cols() != n)
    throw ValidationError("adjacency is not node_count x node_count");
  if (!graph.positions.empty() && static_cast<int>(graph.positions.size()) != n)
    throw ValidationError("positions do not match node count");
  for (int i = 0; i < n; ++i) {
    if (graph.categories[i] < 0 || graph.categories[i] >= k_cat)
      throw ValidationError("node " + std::to_string(i) + " has category " +
                            std::to_string(graph.categories[i]) + " outside [0, " +
                            std::to_string(k_cat) + ")");
    if (graph.adjacency(i, i) != 0)
      throw ValidationError("self-loop at node " + std::to_string(i));
    for (int j = i + 1; j < n; ++j) {
      if (graph.adjacency(i, j) > 1 || graph.adjacency(j, i) > 1)
        throw ValidationError("non-binary adjacency at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
      if (graph.adjacency(i, j) != graph.adjacency(j, i))
        throw ValidationError("asymmetric adjacency at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
    }
  }
}

std::vector<DemandBand> default_demand_bands(const std::vector<FacilityCategory>& categories) {
  std::vector<DemandBand> bands;
  for (const auto& c : categories) {
    if (c.is_residence)
      bands.push_back({0.5, 1.5});
    else if (c.is_elderly)
      bands.push_back({0.25, 0.75});
    else
      bands.push_back({0.3, 0.9});
  }
  return bands;
}

const Region* Dataset::find(int region_id) const {
  for (const auto& r : regions)
    if (r.record.region_id == region_id) return &r;
  return nullptr;
}

void validate_dataset(const Dataset& dataset) {
  validate_categories(dataset.categories);
  if (!(dataset.walk_threshold_m > 0.0) || !(dataset.walk_threshold_m < dataset.grid_size_m))
    throw ValidationError("walk threshold must lie in (0, grid_size_m)");
  if (dataset.demand_bands.size() != dataset.categories.size())
    throw ValidationError("demand band table does not match category table");
  std::set<int> ids;
  for (const auto& region : dataset.regions) {
    const auto& rec = region.record;
    const std::string where = "region " + std::to_string(rec.region_id) + ": ";
    if (!ids.insert(rec.region_id).second) throw ValidationError(where + "duplicate region id");
    if (region.graph.n_max != dataset.n_max) throw ValidationError(where + "N_max mismatch");
    try {
      validate_graph(region.graph, dataset.k_cat());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    if (static_cast<int>(rec.demand.size()) != dataset.k_cat())
      throw ValidationError(where + "demand length differs from K_cat");
    for (int v : rec.demand)
      if (v < 0 || v > 3) throw ValidationError(where + "demand class outside {0,1,2,3}");
    if (static_cast<int>(rec.urban_attributes.size()) != kAttributeDim)
      throw ValidationError(where + "attribute vector length differs");
    if (!(rec.population >= rec.elderly_population) || !(rec.elderly_population >= 0.0))
      throw ValidationError(where + "population must satisfy P >= elderly >= 0");
    if (rec.grid_features.rows() != region.graph.node_count() ||
        rec.grid_features.cols() != dataset.feature_dim)
      throw ValidationError(where + "grid feature shape differs from node_count x feature_dim");
  }
}

WalkingGraph build_walking_graph(std::span<const Point> positions, std::span<const int> categories,
                                 double walk_threshold_m, int n_max, int k_cat) {
  const int n = static_cast<int>(positions.size());
  if (n < 1) throw InputError("walking graph needs at least one node");
  if (static_cast<int>(categories.size()) != n)
    throw InputError("positions and categories differ in length");
  if (!(walk_threshold_m > 0.0)) throw InputError("walk threshold must be positive");
  if (n > n_max)
    throw CapacityError(std::to_string(n) + " nodes exceed N_max = " + std::to_string(n_max));
  std::vector<double> xs(n), ys(n);
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(positions[i].x_m) || !std::isfinite(positions[i].y_m))
      throw InputError("non-finite coordinate at node " + std::to_string(i));
    if (categories[i] < 0 || categories[i] >= k_cat)
      throw InputError("category out of range at node " + std::to_string(i));
    xs[i] = positions[i].x_m;
    ys[i] = positions[i].y_m;
  }
  WalkingGraph g;
  g.n_max = n_max;
  g.categories.assign(categories.begin(), categories.end());
  g.positions.assign(positions.begin(), positions.end());
  g.adjacency = kernels::walk_adjacency(xs, ys, walk_threshold_m);
  return g;
}

int classify_count(int count, double population, const DemandBand& band) {
  if (!(population > 0.0)) throw DegenerateError("population must be positive to classify demand");
  if (count == 0) return 0;
  const double per_thousand = count / (population / 1000.0);
  if (per_thousand < band.lo) return 1;
  if (per_thousand <= band.hi) return 2;
  return 3;
}

std::vector<int> classify_demand(const WalkingGraph& graph, const RegionRecord& record,
                                 std::span<const DemandBand> bands) {
  if (!(record.population > 0.0))
    throw DegenerateError("region " + std::to_string(record.region_id) + " has zero population");
  std::vector<int> demand(bands.size());
  for (std::size_t k = 0; k < bands.size(); ++k)
    demand[k] = classify_count(graph.count_category(static_cast<int>(k)), record.population, bands[k]);
  return demand;
}

void GeneratorConfig::validate() const {
  if (regions < 1) throw ConfigError("regions must be positive");
  if (node_min < 10 || node_max > 399 || node_min > node_max)
    throw ConfigError("node-count range must lie within [10, 399]");
  if (node_max > n_max) throw ConfigError("node_max exceeds N_max");
  if (!(balance >= 0.0 && balance <= 1.0)) throw ConfigError("balance must lie in [0, 1]");
  if (!(walk_threshold_m > 0.0 && walk_threshold_m < grid_size_m))
    throw ConfigError("walk threshold must lie in (0, grid_size_m)");
  if (residence_min < 1 || residence_min > residence_max)
    throw ConfigError("residence range must be non-empty and positive");
  validate_categories(categories);
  const int facility_kinds = static_cast<int>(categories.size()) - 1;
  if (node_min < residence_max + facility_kinds)
    throw ConfigError("node_min must leave room for one facility of every category (" +
                      std::to_string(residence_max + facility_kinds) + " nodes)");
  if (!(residence_radius_m > 0.0) || residence_radius_m * 2.0 >= walk_threshold_m)
    throw ConfigError("residence radius must be below half the walk threshold");
  if (!demand_bands.empty() && demand_bands.size() != categories.size())
    throw ConfigError("demand band table does not match category table");
  if (category_embedding_dim < 1) throw ConfigError("category embedding dim must be positive");
  if (!(person_per_residence_min > 0.0) || person_per_residence_min > person_per_residence_max)
    throw ConfigError("invalid residence population range");
}

namespace {

constexpr double kMargin = 25.0;

Point uniform_in_disc(Rng& rng, Point center, double radius, double cell) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    const double r = radius * std::sqrt(u(rng));
    const double a = 2.0 * std::numbers::pi * u(rng);
    Point p{center.x_m + r * std::cos(a), center.y_m + r * std::sin(a)};
    if (p.x_m >= 0.0 && p.x_m <= cell && p.y_m >= 0.0 && p.y_m <= cell) return p;
  }
}

double min_distance(const Point& p, const std::vector<Point>& others) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : others) best = std::min(best, std::hypot(p.x_m - o.x_m, p.y_m - o.y_m));
  return best;
}

// A point out of walking reach of every residence. Rejection-samples around
// the far cluster, then anywhere in the cell, then falls back to the corner
// farthest from the residences.
Point far_point(Rng& rng, Point far_center, const std::vector<Point>& residences, double cell,
                double threshold) {
  const double need = threshold + kMargin;
  for (int attempt = 0; attempt < 200; ++attempt) {
    Point p = uniform_in_disc(rng, far_center, 250.0, cell);
    if (min_distance(p, residences) > need) return p;
  }
  std::uniform_real_distribution<double> u(0.0, cell);
  for (int attempt = 0; attempt < 2000; ++attempt) {
    Point p{u(rng), u(rng)};
    if (min_distance(p, residences) > need) return p;
  }
  Point best{0.0, 0.0};
  double best_d = -1.0;
  for (Point corner : {Point{0, 0}, Point{cell, 0}, Point{0, cell}, Point{cell, cell}}) {
    const double d = min_distance(corner, residences);
    if (d > best_d) best = corner, best_d = d;
  }
  return best;
}

}  // namespace

Dataset generate_synthetic_city(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  const int k_cat = static_cast<int>(config.categories.size());
  const int res_cat = residence_id(config.categories);
  const double cell = config.grid_size_m;
  const double r_res = config.residence_radius_m;
  const double r_fac = config.walk_threshold_m - r_res - 2.0 * kMargin;

  Dataset ds;
  ds.categories = config.categories;
  ds.demand_bands =
      config.demand_bands.empty() ? default_demand_bands(config.categories) : config.demand_bands;
  ds.grid_size_m = config.grid_size_m;
  ds.walk_threshold_m = config.walk_threshold_m;
  ds.n_max = config.n_max;
  ds.feature_dim = config.category_embedding_dim + 3;

  Rng table_rng = make_rng(seed, 0xC47);
  const Matrix embedding = standard_normal(table_rng, k_cat, config.category_embedding_dim);
  const int cols = config.grid_cols > 0
                       ? config.grid_cols
                       : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(config.regions))));

  std::vector<int> facility_cats;
  for (int k = 0; k < k_cat; ++k)
    if (k != res_cat) facility_cats.push_back(k);

  for (int r = 0; r < config.regions; ++r) {
    Rng rng = make_rng(seed, 1, static_cast<std::uint64_t>(r));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> node_count(config.node_min, config.node_max);
    std::uniform_int_distribution<int> res_count(config.residence_min, config.residence_max);
    const int n = node_count(rng);
    const int h = res_count(rng);

    // Residences cluster in a random corner quadrant; the far cluster sits in
    // the diagonally opposite one.
    const bool flip_x = unit(rng) < 0.5;
    const bool flip_y = unit(rng) < 0.5;
    auto orient = [&](double x, double y) {
      return Point{flip_x ? cell - x : x, flip_y ? cell - y : y};
    };
    const double lo = r_res + kMargin;
    const double hi = std::max(lo, 0.25 * cell);
    std::uniform_real_distribution<double> centre(lo, hi);
    const Point res_center = orient(centre(rng), centre(rng));
    const Point far_center = orient(0.9 * cell, 0.9 * cell);

    std::vector<Point> positions;
    std::vector<int> cats;
    std::vector<Point> residences;
    for (int i = 0; i < h; ++i) {
      Point p = uniform_in_disc(rng, res_center, r_res, cell);
      positions.push_back(p);
      residences.push_back(p);
      cats.push_back(res_cat);
    }
    for (int k : facility_cats) {
      const bool near = unit(rng) < config.balance;
      positions.push_back(near ? uniform_in_disc(rng, res_center, r_fac, cell)
                               : far_point(rng, far_center, residences, cell,
                                           config.walk_threshold_m));
      cats.push_back(k);
    }
    std::uniform_int_distribution<std::size_t> pick(0, facility_cats.size() - 1);
    while (static_cast<int>(positions.size()) < n) {
      const bool spread = unit(rng) < config.balance;
      positions.push_back(spread ? Point{unit(rng) * cell, unit(rng) * cell}
                                 : far_point(rng, far_center, residences, cell,
                                             config.walk_threshold_m));
      cats.push_back(facility_cats[pick(rng)]);
    }

    Region region;
    region.graph = build_walking_graph(positions, cats, config.walk_threshold_m, config.n_max, k_cat);
    auto& rec = region.record;
    rec.region_id = r;
    rec.grid_row = r / cols;
    rec.grid_col = r % cols;
    std::uniform_real_distribution<double> persons(config.person_per_residence_min,
                                                   config.person_per_residence_max);
    double population = 0.0;
    for (int i = 0; i < h; ++i) population += std::round(persons(rng));
    rec.population = population;
    rec.elderly_population = std::round(population * (0.12 + 0.18 * unit(rng)));
    const double price = std::round(30000.0 + 90000.0 * unit(rng));
    const double fee = std::round((1.0 + 7.0 * unit(rng)) * 100.0) / 100.0;
    rec.urban_attributes = {rec.population, rec.elderly_population, price, fee};

    std::normal_distribution<double> jitter(0.0, 0.01);
    rec.grid_features.resize(n, ds.feature_dim);
    for (int i = 0; i < n; ++i) {
      rec.grid_features.row(i).head(config.category_embedding_dim) = embedding.row(cats[i]);
      rec.grid_features(i, config.category_embedding_dim) = positions[i].x_m / cell + jitter(rng);
      rec.grid_features(i, config.category_embedding_dim + 1) = positions[i].y_m / cell + jitter(rng);
      rec.grid_features(i, config.category_embedding_dim + 2) = 0.5 + unit(rng);
    }
    rec.demand = classify_demand(region.graph, rec, ds.demand_bands);
    ds.regions.push_back(std::move(region));
  }
  validate_dataset(ds);
  return ds;
}

int ResidenceTemplate::residence_count() const {
  return static_cast<int>(std::count(is_residence.begin(), is_residence.end(), 1));
}

ResidenceTemplate residence_template(const WalkingGraph& graph, int residence_category) {
  const int n = graph.node_count();
  ResidenceTemplate t;
  t.n_max = graph.n_max;
  t.node_count = n;
  t.residence_category = residence_category;
  t.is_residence.resize(n);
  t.positions = graph.positions;
  t.adjacency = BinaryMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) t.is_residence[i] = graph.categories[i] == residence_category ? 1 : 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (t.is_residence[i] && t.is_residence[j]) t.adjacency(i, j) = graph.adjacency(i, j);
  return t;
}

WalkingGraph template_graph(const ResidenceTemplate& tmpl, int placeholder) {
  WalkingGraph g;
  g.n_max = tmpl.n_max;
  g.categories.resize(tmpl.node_count);
  for (int i = 0; i < tmpl.node_count; ++i)
    g.categories[i] = tmpl.is_residence[i] ? tmpl.residence_category : placeholder;
  g.positions = tmpl.positions;
  g.adjacency = tmpl.adjacency;
  return g;
}

GraphBatch pad_batch(std::span<const WalkingGraph> graphs, int n_max, int k_cat) {
  GraphBatch batch;
  batch.n_max = n_max;
  batch.k_cat = k_cat;
  for (const auto& g : graphs) {
    if (g.node_count() > n_max)
      throw CapacityError("graph with " + std::to_string(g.node_count()) +
                          " nodes exceeds batch capacity " + std::to_string(n_max));
    WalkingGraph resized = g;
    resized.n_max = n_max;
    batch.node_features.push_back(resized.one_hot(k_cat));
    batch.adjacency.push_back(resized.padded_adjacency());
    Matrix pos = Matrix::Zero(n_max, 2);
    for (int i = 0; i < static_cast<int>(g.positions.size()); ++i) {
      pos(i, 0) = g.positions[i].x_m;
      pos(i, 1) = g.positions[i].y_m;
    }
    batch.positions.push_back(std::move(pos));
    batch.masks.push_back(resized.node_mask());
  }
  return batch;
}

std::vector<WalkingGraph> unbatch(const GraphBatch& batch) {
  std::vector<WalkingGraph> out;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& mask = batch.masks[b];
    const int n = static_cast<int>(std::count(mask.begin(), mask.end(), 1));
    WalkingGraph g;
    g.n_max = batch.n_max;
    g.categories.resize(n);
    g.positions.resize(n);
    for (int i = 0; i < n; ++i) {
      Eigen::Index arg = 0;
      batch.node_features[b].row(i).maxCoeff(&arg);
      g.categories[i] = static_cast<int>(arg);
      g.positions[i] = {batch.positions[b](i, 0), batch.positions[b](i, 1)};
    }
    g.adjacency = batch.adjacency[b].topLeftCorner(n, n).cast<std::uint8_t>();
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace fapcd::citygrid
