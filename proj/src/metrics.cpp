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

#include "fapcd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "fapcd/error.hpp"

namespace fapcd::metrics {

using nlohmann::json;

std::string to_string(EfficiencyMode mode) {
  return mode == EfficiencyMode::Coverage ? "coverage" : "literal";
}

EfficiencyMode efficiency_mode_from_string(const std::string& name) {
  if (name == "coverage") return EfficiencyMode::Coverage;
  if (name == "literal") return EfficiencyMode::Literal;
  throw ConfigError("unknown efficiency mode '" + name + "'");
}

std::vector<int> life_service_categories(const std::vector<citygrid::FacilityCategory>& cats) {
  std::vector<int> out;
  for (const auto& c : cats)
    if (c.is_life_service) out.push_back(c.id);
  return out;
}

std::vector<int> elderly_categories(const std::vector<citygrid::FacilityCategory>& cats) {
  std::vector<int> out;
  for (const auto& c : cats)
    if (c.is_elderly) out.push_back(c.id);
  return out;
}

std::vector<int> facility_categories(const std::vector<citygrid::FacilityCategory>& cats) {
  std::vector<int> out;
  for (const auto& c : cats)
    if (!c.is_residence) out.push_back(c.id);
  return out;
}

int covered_residences(const citygrid::WalkingGraph& graph, int residence_category, int category) {
  const int n = graph.node_count();
  int covered = 0;
  for (int h = 0; h < n; ++h) {
    if (graph.categories[h] != residence_category) continue;
    for (int f = 0; f < n; ++f)
      if (graph.categories[f] == category && graph.adjacency(f, h)) {
        ++covered;
        break;
      }
  }
  return covered;
}

std::optional<double> region_efficiency(const citygrid::WalkingGraph& graph,
                                        int residence_category, std::span<const int> categories,
                                        EfficiencyMode mode) {
  const int residences = graph.count_category(residence_category);
  if (residences == 0) return std::nullopt;
  if (categories.empty()) throw InputError("efficiency over an empty category set");
  double total = 0.0;
  for (int k : categories) {
    const int facilities = graph.count_category(k);
    if (facilities == 0) continue;
    const double covered = covered_residences(graph, residence_category, k);
    total += covered / (mode == EfficiencyMode::Coverage ? residences : facilities);
  }
  return total / static_cast<double>(categories.size());
}

double region_diversity(const citygrid::WalkingGraph& graph, int residence_category, int k_cat) {
  if (k_cat < 2) throw InputError("diversity needs at least two categories");
  std::set<int> present;
  for (int c : graph.categories)
    if (c != residence_category) present.insert(c);
  return static_cast<double>(present.size()) / (k_cat - 1);
}

std::optional<double> region_accessibility(const citygrid::WalkingGraph& graph,
                                           int residence_category,
                                           std::span<const int> categories, double population,
                                           double unit) {
  if (graph.count_category(residence_category) == 0) return std::nullopt;
  if (!(population > 0.0)) throw DegenerateError("accessibility needs a positive population");
  if (categories.empty()) throw InputError("accessibility over an empty category set");
  double total = 0.0;
  for (int k : categories) total += covered_residences(graph, residence_category, k);
  return total / static_cast<double>(categories.size()) / (population / unit);
}

double efficiency(const citygrid::Dataset& layouts, std::span<const int> categories,
                  EfficiencyMode mode, int* skipped) {
  double sum = 0.0;
  int used = 0;
  int skip = 0;
  for (const auto& r : layouts.regions) {
    const auto v = region_efficiency(r.graph, layouts.residence(), categories, mode);
    if (!v) {
      ++skip;
      continue;
    }
    sum += *v;
    ++used;
  }
  if (skipped) *skipped = skip;
  if (used == 0) throw DegenerateError("no region has a residence");
  return sum / used;
}

double diversity(const citygrid::Dataset& layouts) {
  if (layouts.regions.empty()) throw InputError("diversity of an empty dataset");
  double sum = 0.0;
  for (const auto& r : layouts.regions)
    sum += region_diversity(r.graph, layouts.residence(), layouts.k_cat());
  return sum / static_cast<double>(layouts.regions.size());
}

double accessibility(const citygrid::Dataset& layouts, double unit, int* skipped) {
  const auto cats = facility_categories(layouts.categories);
  double sum = 0.0;
  int used = 0;
  int skip = 0;
  for (const auto& r : layouts.regions) {
    const auto v =
        region_accessibility(r.graph, layouts.residence(), cats, r.record.population, unit);
    if (!v) {
      ++skip;
      continue;
    }
    sum += std::min(1.0, *v);
    ++used;
  }
  if (skipped) *skipped = skip;
  if (used == 0) throw DegenerateError("no region has a residence");
  return sum / used;
}

double gini(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw DegenerateError("Gini needs at least two values");
  std::vector<double> x(values.begin(), values.end());
  for (double v : x)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("Gini needs finite non-negative values");
  std::sort(x.begin(), x.end());
  double total = 0.0;
  for (double v : x) total += v;
  if (!(total > 0.0)) throw DegenerateError("Gini is undefined when every value is zero");
  double nested = 0.0;
  double prefix = 0.0;
  for (double v : x) {
    prefix += v;
    nested += prefix;
  }
  return 1.0 - 2.0 * nested / (static_cast<double>(n) * total);
}

double average(double life, double elderly, double diversity, double accessibility, double gini) {
  return (life + elderly + diversity + accessibility - gini) / 5.0;
}

Matrix rook_weights(std::span<const std::pair<int, int>> cells) {
  const auto n = static_cast<Eigen::Index>(cells.size());
  Matrix w = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const int dr = std::abs(cells[i].first - cells[j].first);
      const int dc = std::abs(cells[i].second - cells[j].second);
      if (dr + dc == 1) w(i, j) = 1.0;
    }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = w.row(i).sum();
    if (s > 0.0) w.row(i) /= s;
  }
  return w;
}

std::vector<double> local_morans_i(std::span<const double> values, const Matrix& weights) {
  const auto n = static_cast<Eigen::Index>(values.size());
  if (n < 3) throw DegenerateError("local Moran's I needs at least three regions");
  if (weights.rows() != n || weights.cols() != n) throw ShapeError("weight matrix size differs");
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = weights.row(i).sum();
    if (s != 0.0 && std::abs(s - 1.0) > 1e-9)
      throw InputError("weights must be row-standardized (row " + std::to_string(i) + ")");
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0;
  for (double v : values) m2 += (v - mean) * (v - mean);
  m2 /= static_cast<double>(n);
  if (!(m2 > 0.0)) throw DegenerateError("local Moran's I is undefined for constant values");
  std::vector<double> out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double lag = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) lag += weights(i, j) * (values[j] - mean);
    out[i] = (values[i] - mean) / m2 * lag;
  }
  return out;
}

MetricsReport evaluate(const citygrid::Dataset& generated, const citygrid::Dataset& dataset,
                       EfficiencyMode mode, const std::string& label) {
  if (generated.regions.size() != dataset.regions.size())
    throw AlignmentError("generated layouts cover " + std::to_string(generated.regions.size()) +
                         " regions, dataset has " + std::to_string(dataset.regions.size()));
  if (generated.k_cat() != dataset.k_cat())
    throw AlignmentError("generated layouts use a different category table");
  const int res = dataset.residence();
  const auto life = life_service_categories(dataset.categories);
  const auto elderly = elderly_categories(dataset.categories);
  const auto facilities = facility_categories(dataset.categories);
  MetricsReport rep;
  rep.label = label;
  rep.mode = mode;
  std::vector<double> composite;
  for (std::size_t r = 0; r < dataset.regions.size(); ++r) {
    const auto& g = generated.regions[r].graph;
    const auto& rec = dataset.regions[r].record;
    if (generated.regions[r].record.region_id != rec.region_id)
      throw AlignmentError("position " + std::to_string(r) + ": generated region " +
                           std::to_string(generated.regions[r].record.region_id) +
                           " against dataset region " + std::to_string(rec.region_id));
    const auto le = region_efficiency(g, res, life, mode);
    const auto ee = region_efficiency(g, res, elderly, mode);
    const auto acc = region_accessibility(g, res, facilities, rec.population);
    if (!le || !ee || !acc) {
      ++rep.skipped_regions;
      continue;
    }
    RegionMetrics m;
    m.region_id = rec.region_id;
    m.life_service = *le;
    m.elderly_care = *ee;
    m.diversity = region_diversity(g, res, dataset.k_cat());
    m.accessibility_raw = *acc;
    m.accessibility = std::min(1.0, *acc);
    m.composite = (m.life_service + m.elderly_care + m.accessibility) / 3.0;
    rep.per_region.push_back(m);
    composite.push_back(m.composite);
  }
  if (rep.per_region.empty()) throw DegenerateError("no region has a residence");
  const double count = static_cast<double>(rep.per_region.size());
  for (const auto& m : rep.per_region) {
    rep.life_service += m.life_service / count;
    rep.elderly_care += m.elderly_care / count;
    rep.diversity += m.diversity / count;
    rep.accessibility += m.accessibility / count;
  }
  rep.gini = gini(composite);
  rep.average = average(rep.life_service, rep.elderly_care, rep.diversity, rep.accessibility, rep.gini);
  return rep;
}

json report_to_json(const MetricsReport& r) {
  json regions = json::array();
  for (const auto& m : r.per_region)
    regions.push_back({{"region_id", m.region_id},
                       {"life_service", m.life_service},
                       {"elderly_care", m.elderly_care},
                       {"diversity", m.diversity},
                       {"accessibility_raw", m.accessibility_raw},
                       {"accessibility", m.accessibility},
                       {"composite", m.composite}});
  return {{"label", r.label},
          {"mode", to_string(r.mode)},
          {"life_service", r.life_service},
          {"elderly_care", r.elderly_care},
          {"diversity", r.diversity},
          {"accessibility", r.accessibility},
          {"gini", r.gini},
          {"average", r.average},
          {"skipped_regions", r.skipped_regions},
          {"per_region", regions}};
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  r.label = j.value("label", "");
  r.mode = efficiency_mode_from_string(j.value("mode", "coverage"));
  r.life_service = j.at("life_service").get<double>();
  r.elderly_care = j.at("elderly_care").get<double>();
  r.diversity = j.at("diversity").get<double>();
  r.accessibility = j.at("accessibility").get<double>();
  r.gini = j.at("gini").get<double>();
  r.average = j.at("average").get<double>();
  r.skipped_regions = j.value("skipped_regions", 0);
  for (const auto& m : j.value("per_region", json::array()))
    r.per_region.push_back({m.at("region_id").get<int>(), m.at("life_service").get<double>(),
                            m.at("elderly_care").get<double>(), m.at("diversity").get<double>(),
                            m.at("accessibility_raw").get<double>(),
                            m.at("accessibility").get<double>(), m.at("composite").get<double>()});
  return r;
}

std::string format_table(std::span<const MetricsReport> reports) {
  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.label.size());
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s  %9s  %8s  %8s  %8s\n", static_cast<int>(width),
                "Method", "Life", "Elderly", "Diversity", "Access", "Gini", "Average");
  out << buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-*s  %8.3f  %8.3f  %9.3f  %8.3f  %8.3f  %8.3f\n",
                  static_cast<int>(width), r.label.c_str(), r.life_service, r.elderly_care,
                  r.diversity, r.accessibility, r.gini, r.average);
    out << buf;
  }
  return out.str();
}

std::vector<double> region_values(const MetricsReport& report, const std::string& field) {
  static const char* known[] = {"life_service", "elderly_care", "diversity",
                                "accessibility", "accessibility_raw", "composite"};
  if (std::find(std::begin(known), std::end(known), field) == std::end(known))
    throw ConfigError("unknown region metric '" + field + "'");
  std::vector<double> out;
  for (const auto& m : report.per_region) {
    if (field == "life_service") out.push_back(m.life_service);
    else if (field == "elderly_care") out.push_back(m.elderly_care);
    else if (field == "diversity") out.push_back(m.diversity);
    else if (field == "accessibility") out.push_back(m.accessibility);
    else if (field == "accessibility_raw") out.push_back(m.accessibility_raw);
    else out.push_back(m.composite);
  }
  return out;
}

}  // namespace fapcd::metrics
