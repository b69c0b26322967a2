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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fapcd/citygrid.hpp"

namespace fapcd::metrics {

enum class EfficiencyMode { Coverage, Literal };

std::string to_string(EfficiencyMode mode);
EfficiencyMode efficiency_mode_from_string(const std::string& name);

inline constexpr double kPopulationUnit = 1000.0;

std::vector<int> life_service_categories(const std::vector<citygrid::FacilityCategory>& cats);
std::vector<int> elderly_categories(const std::vector<citygrid::FacilityCategory>& cats);
std::vector<int> facility_categories(const std::vector<citygrid::FacilityCategory>& cats);

// Number of residences h with some facility of category k adjacent to h.
int covered_residences(const citygrid::WalkingGraph& graph, int residence_category, int category);

// Per-region efficiency over the given categories; nullopt when the region
// has no residence.
std::optional<double> region_efficiency(const citygrid::WalkingGraph& graph,
                                        int residence_category, std::span<const int> categories,
                                        EfficiencyMode mode);
double region_diversity(const citygrid::WalkingGraph& graph, int residence_category, int k_cat);
// Uncapped; nullopt without residences. Throws DegenerateError for P = 0.
std::optional<double> region_accessibility(const citygrid::WalkingGraph& graph,
                                           int residence_category,
                                           std::span<const int> categories, double population,
                                           double unit = kPopulationUnit);

// Dataset-level means. Regions without residences are skipped and counted
// in *skipped when given.
double efficiency(const citygrid::Dataset& layouts, std::span<const int> categories,
                  EfficiencyMode mode, int* skipped = nullptr);
double diversity(const citygrid::Dataset& layouts);
// Mean of per-region values capped at 1.
double accessibility(const citygrid::Dataset& layouts, double unit = kPopulationUnit,
                     int* skipped = nullptr);

// 1 - 2 sum_i sum_{j<=i} X_(j) / (N sum X), X sorted ascending.
double gini(std::span<const double> values);
double average(double life, double elderly, double diversity, double accessibility, double gini);

// Rook contiguity on (row, col) cells, row-standardized; cells without
// neighbours get a zero row.
Matrix rook_weights(std::span<const std::pair<int, int>> cells);
// I_i = ((x_i - mean)/m2) sum_j w_ij (x_j - mean), m2 = mean squared deviation.
std::vector<double> local_morans_i(std::span<const double> values, const Matrix& weights);

struct RegionMetrics {
  int region_id = 0;
  double life_service = 0.0;
  double elderly_care = 0.0;
  double diversity = 0.0;
  double accessibility_raw = 0.0;
  double accessibility = 0.0;  // capped at 1
  double composite = 0.0;      // X_i fed to the Gini coefficient
};

struct MetricsReport {
  std::string label;
  EfficiencyMode mode = EfficiencyMode::Coverage;
  double life_service = 0.0;
  double elderly_care = 0.0;
  double diversity = 0.0;
  double accessibility = 0.0;
  double gini = 0.0;
  double average = 0.0;
  int skipped_regions = 0;
  std::vector<RegionMetrics> per_region;
};

// Scores generated layouts against the dataset they were generated for. The
// region ids must line up one to one; population comes from the dataset.
MetricsReport evaluate(const citygrid::Dataset& generated, const citygrid::Dataset& dataset,
                       EfficiencyMode mode = EfficiencyMode::Coverage,
                       const std::string& label = "");

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
// Aligned columns: Method, Life, Elderly, Diversity, Access, Gini, Average.
std::string format_table(std::span<const MetricsReport> reports);

// Per-region value named by `field` (life_service, elderly_care, diversity,
// accessibility, accessibility_raw, composite).
std::vector<double> region_values(const MetricsReport& report, const std::string& field);

}  // namespace fapcd::metrics
