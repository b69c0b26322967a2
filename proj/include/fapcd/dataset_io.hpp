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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fapcd/citygrid.hpp"

namespace fapcd::citygrid {

inline constexpr int kDatasetVersion = 1;

// Per-region metadata attached to generated layouts.
struct Provenance {
  std::string method;
  std::uint64_t seed = 0;
  int steps = 0;
  std::string checkpoint;
  bool operator==(const Provenance&) const = default;
};

// JSON-lines: one header object, then one object per region. Edges are listed
// in both directions so asymmetric adjacency is detectable on load.
void write_dataset(std::ostream& out, const Dataset& dataset,
                   const std::vector<Provenance>* provenance = nullptr);
Dataset read_dataset(std::istream& in, std::vector<std::optional<Provenance>>* provenance = nullptr);

void save_dataset(const std::string& path, const Dataset& dataset,
                  const std::vector<Provenance>* provenance = nullptr);
Dataset load_dataset(const std::string& path,
                     std::vector<std::optional<Provenance>>* provenance = nullptr);

nlohmann::json categories_to_json(const std::vector<FacilityCategory>& categories);
std::vector<FacilityCategory> categories_from_json(const nlohmann::json& j);

}  // namespace fapcd::citygrid
