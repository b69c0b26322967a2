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

#include "fapcd/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include "fapcd/error.hpp"

namespace fapcd::citygrid {

using nlohmann::json;

json categories_to_json(const std::vector<FacilityCategory>& categories) {
  json arr = json::array();
  for (const auto& c : categories) {
    arr.push_back({{"id", c.id},
                   {"name", c.name},
                   {"is_residence", c.is_residence},
                   {"is_elderly", c.is_elderly},
                   {"is_life_service", c.is_life_service}});
  }
  return arr;
}

std::vector<FacilityCategory> categories_from_json(const json& j) {
  std::vector<FacilityCategory> out;
  for (const auto& c : j) {
    out.push_back({c.at("id").get<int>(), c.at("name").get<std::string>(),
                   c.at("is_residence").get<bool>(), c.at("is_elderly").get<bool>(),
                   c.at("is_life_service").get<bool>()});
  }
  return out;
}

namespace {

json region_to_json(const Region& region, const Provenance* prov) {
  const auto& rec = region.record;
  const auto& g = region.graph;
  json nodes = json::array();
  for (int i = 0; i < g.node_count(); ++i) {
    std::vector<double> feats(rec.grid_features.cols());
    for (Eigen::Index c = 0; c < rec.grid_features.cols(); ++c) feats[c] = rec.grid_features(i, c);
    const Point p = g.positions.empty() ? Point{} : g.positions[i];
    nodes.push_back({{"cat", g.categories[i]}, {"x_m", p.x_m}, {"y_m", p.y_m}, {"features", feats}});
  }
  json edges = json::array();
  for (int i = 0; i < g.node_count(); ++i)
    for (int j = 0; j < g.node_count(); ++j)
      if (g.adjacency(i, j)) edges.push_back({i, j});
  json out = {{"region_id", rec.region_id},
              {"grid_row", rec.grid_row},
              {"grid_col", rec.grid_col},
              {"attributes", rec.urban_attributes},
              {"demand", rec.demand},
              {"population", rec.population},
              {"elderly_population", rec.elderly_population},
              {"nodes", nodes},
              {"edges", edges}};
  if (prov) {
    out["provenance"] = {{"method", prov->method},
                         {"seed", prov->seed},
                         {"steps", prov->steps},
                         {"checkpoint", prov->checkpoint}};
  }
  return out;
}

Region region_from_json(const json& j, const Dataset& header, std::size_t line) {
  Region region;
  auto& rec = region.record;
  auto& g = region.graph;
  rec.region_id = j.at("region_id").get<int>();
  rec.grid_row = j.value("grid_row", 0);
  rec.grid_col = j.value("grid_col", 0);
  rec.urban_attributes = j.at("attributes").get<std::vector<double>>();
  rec.demand = j.at("demand").get<std::vector<int>>();
  rec.population = j.at("population").get<double>();
  rec.elderly_population = j.at("elderly_population").get<double>();
  const auto& nodes = j.at("nodes");
  const int n = static_cast<int>(nodes.size());
  if (n > header.n_max)
    throw CapacityError("line " + std::to_string(line) + ": region has " + std::to_string(n) +
                        " nodes, N_max is " + std::to_string(header.n_max));
  g.n_max = header.n_max;
  g.categories.resize(n);
  g.positions.resize(n);
  rec.grid_features.resize(n, header.feature_dim);
  for (int i = 0; i < n; ++i) {
    const auto& node = nodes[i];
    g.categories[i] = node.at("cat").get<int>();
    g.positions[i] = {node.at("x_m").get<double>(), node.at("y_m").get<double>()};
    const auto feats = node.at("features").get<std::vector<double>>();
    if (static_cast<int>(feats.size()) != header.feature_dim)
      throw ValidationError("line " + std::to_string(line) + ": node " + std::to_string(i) +
                            " has " + std::to_string(feats.size()) + " features, expected " +
                            std::to_string(header.feature_dim));
    for (int c = 0; c < header.feature_dim; ++c) rec.grid_features(i, c) = feats[c];
  }
  g.adjacency = BinaryMatrix::Zero(n, n);
  for (const auto& e : j.at("edges")) {
    const int a = e.at(0).get<int>();
    const int b = e.at(1).get<int>();
    if (a < 0 || b < 0 || a >= n || b >= n)
      throw ValidationError("line " + std::to_string(line) + ": edge (" + std::to_string(a) +
                            ", " + std::to_string(b) + ") references a missing node");
    g.adjacency(a, b) = 1;
  }
  return region;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& dataset,
                   const std::vector<Provenance>* provenance) {
  json bands = json::array();
  for (const auto& b : dataset.demand_bands) bands.push_back({b.lo, b.hi});
  json header = {{"format", "fapcd-citygrid"},
                 {"version", kDatasetVersion},
                 {"K_cat", dataset.k_cat()},
                 {"N_max", dataset.n_max},
                 {"grid_size_m", dataset.grid_size_m},
                 {"walk_threshold_m", dataset.walk_threshold_m},
                 {"feature_dim", dataset.feature_dim},
                 {"regions", dataset.regions.size()},
                 {"categories", categories_to_json(dataset.categories)},
                 {"demand_bands", bands}};
  out << header.dump() << '\n';
  for (std::size_t r = 0; r < dataset.regions.size(); ++r) {
    const Provenance* prov = provenance ? &(*provenance)[r] : nullptr;
    out << region_to_json(dataset.regions[r], prov).dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in, std::vector<std::optional<Provenance>>* provenance) {
  std::string text;
  std::size_t line_no = 0;
  auto parse_line = [&](const std::string& s) {
    try {
      return json::parse(s);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  };
  if (!std::getline(in, text)) throw ParseError(1, "empty dataset file");
  ++line_no;
  const json header = parse_line(text);
  Dataset ds;
  std::size_t expected = 0;
  try {
    if (header.value("format", "") != "fapcd-citygrid")
      throw FormatError("not a fapcd-citygrid dataset");
    const int version = header.at("version").get<int>();
    if (version != kDatasetVersion)
      throw FormatError("dataset version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kDatasetVersion) + ")");
    ds.categories = categories_from_json(header.at("categories"));
    ds.n_max = header.at("N_max").get<int>();
    ds.grid_size_m = header.at("grid_size_m").get<double>();
    ds.walk_threshold_m = header.at("walk_threshold_m").get<double>();
    ds.feature_dim = header.at("feature_dim").get<int>();
    for (const auto& b : header.at("demand_bands"))
      ds.demand_bands.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
    expected = header.at("regions").get<std::size_t>();
    if (header.at("K_cat").get<int>() != ds.k_cat())
      throw FormatError("K_cat disagrees with the category table");
  } catch (const json::exception& e) {
    throw ParseError(line_no, std::string("bad header: ") + e.what());
  }

  std::vector<std::optional<Provenance>> provs;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    const json j = parse_line(text);
    try {
      ds.regions.push_back(region_from_json(j, ds, line_no));
      if (j.contains("provenance")) {
        const auto& p = j["provenance"];
        provs.push_back(Provenance{p.at("method").get<std::string>(),
                                   p.at("seed").get<std::uint64_t>(), p.at("steps").get<int>(),
                                   p.at("checkpoint").get<std::string>()});
      } else {
        provs.emplace_back();
      }
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (ds.regions.size() != expected)
    throw ParseError(line_no, "expected " + std::to_string(expected) + " regions, found " +
                                  std::to_string(ds.regions.size()) + " (truncated file?)");
  validate_dataset(ds);
  if (provenance) *provenance = std::move(provs);
  return ds;
}

void save_dataset(const std::string& path, const Dataset& dataset,
                  const std::vector<Provenance>* provenance) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write_dataset(out, dataset, provenance);
  if (!out) throw InputError("write failed for " + path);
}

Dataset load_dataset(const std::string& path, std::vector<std::optional<Provenance>>* provenance) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path);
  return read_dataset(in, provenance);
}

}  // namespace fapcd::citygrid
