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

#include <string>
#include <vector>

#include "fapcd/citygrid.hpp"
#include "fapcd/dataset_io.hpp"
#include "fapcd/sde.hpp"

namespace fapcd::sampler {

enum class Method { Dpm3, EulerMaruyama };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct SamplerConfig {
  Method method = Method::Dpm3;
  int steps = 200;  // network evaluations for dpm3, time steps for euler-maruyama
  bool clamp_residences = true;
  double decode_threshold = 0.5;
  double t_eps = 1e-3;

  void validate() const;
};

// Continuous state of a reverse trajectory.
struct GraphState {
  Matrix x;  // n x K
  Matrix a;  // n x n, symmetric, zero diagonal
};

// Known entries held at their forward-perturbed values during integration.
struct Clamp {
  std::vector<std::uint8_t> node;  // rows of x to hold
  BinaryMatrix edge;               // entries of a to hold
  Matrix x0;
  Matrix a0;
  bool empty() const { return node.empty(); }
};

Clamp residence_clamp(const citygrid::ResidenceTemplate& tmpl, int k_cat);

// Integrates from t_end() down to config.t_eps starting at `start`.
GraphState integrate(const sde::NoisePredictor& predictor, const sde::NoiseSchedule& schedule,
                     const sde::Conditioning& condition, GraphState start, const Clamp& clamp,
                     const SamplerConfig& config, Rng& rng);

// Time points of the dpm3 grid (uniform in lambda) and the solver order of
// each interval. The orders sum to config.steps.
struct Dpm3Plan {
  std::vector<double> times;
  std::vector<int> orders;
};
Dpm3Plan dpm3_plan(const sde::NoiseSchedule& schedule, int nfe, double t_eps);

// Argmax categories (ties to the lowest id), edges where the symmetric mean
// exceeds the threshold. `allowed` restricts the categories of free rows.
citygrid::WalkingGraph decode_graph(const Matrix& x, const Matrix& a, double threshold, int n_max,
                                    const std::vector<std::uint8_t>& allowed = {});

citygrid::WalkingGraph sample(const sde::NoisePredictor& predictor,
                              const sde::NoiseSchedule& schedule,
                              const sde::Conditioning& condition,
                              const citygrid::ResidenceTemplate& tmpl, int k_cat,
                              const SamplerConfig& config, Rng& rng);

// Facilities are placed at the centroid of their adjacent residences (or of
// all neighbours, or the cell centre when isolated); residences keep their
// template positions.
std::vector<citygrid::Point> place_nodes(const citygrid::WalkingGraph& graph,
                                         const citygrid::ResidenceTemplate& tmpl,
                                         double grid_size_m);

struct Generation {
  citygrid::Dataset dataset;
  std::vector<citygrid::Provenance> provenance;
};

// One layout per region, sampled with seed derive_seed(seed, region_id).
Generation generate_for_dataset(const sde::NoisePredictor& predictor,
                                const sde::NoiseSchedule& schedule,
                                const citygrid::Dataset& dataset,
                                const std::vector<sde::Conditioning>& conditions,
                                const SamplerConfig& config, std::uint64_t seed,
                                const std::string& checkpoint_label);

}  // namespace fapcd::sampler
