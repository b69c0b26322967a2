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

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "fapcd/citygrid.hpp"
#include "fapcd/metrics.hpp"

namespace fapcd::baselines {

struct AllocationBudget {
  std::vector<int> total_units;  // per category
  int per_region_cap = 0;        // maximum facility count of a region

  void validate(const citygrid::Dataset& dataset) const;
};

AllocationBudget budget_from_json(const nlohmann::json& j, const citygrid::Dataset& dataset);
nlohmann::json budget_to_json(const AllocationBudget& budget,
                              const std::vector<citygrid::FacilityCategory>& categories);

struct WalkingResult {
  citygrid::Dataset layouts;
  metrics::MetricsReport report;
};

// The status quo: existing layouts scored as they stand.
WalkingResult walking_based(const citygrid::Dataset& dataset,
                            metrics::EfficiencyMode mode = metrics::EfficiencyMode::Coverage);

// ceil(mid * P / 1000) for facility categories in demand class 0 or 1, where
// mid is the centre of the category's band; 0 otherwise.
std::vector<int> requirements(const citygrid::Region& region, const citygrid::Dataset& dataset);
// max over required categories of have/req; 0 without requirements.
double dominant_share(const std::vector<int>& have, const std::vector<int>& req);

struct Grant {
  int step = 0;
  int region_id = 0;
  int category = 0;
  double share_before = 0.0;
  double min_other_share = 0.0;  // lowest share among other eligible regions
  int node_index = 0;
  citygrid::Point position;
};

struct AllocationResult {
  citygrid::Dataset layouts;
  std::vector<Grant> grants;
  std::vector<int> units_left;
  std::string notice;  // set when nothing needed allocating
};

AllocationResult drf_allocate(const citygrid::Dataset& dataset, const AllocationBudget& budget);

void write_decision_log(std::ostream& out, const std::vector<Grant>& grants);

}  // namespace fapcd::baselines
