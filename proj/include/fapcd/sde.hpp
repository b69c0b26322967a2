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

#include <functional>
#include <span>
#include <string>
#include <utility>

#include "fapcd/citygrid.hpp"
#include "fapcd/common.hpp"

namespace fapcd::sde {

enum class ScheduleKind { LinearVp, Cosine };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

// Variance-preserving schedule: x_t = alpha_t x_0 + sigma_t eps with
// alpha_t^2 + sigma_t^2 = 1 and forward SDE dx = -beta/2 x dt + sqrt(beta) dw.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::Cosine;
  double beta_min = 0.1;
  double beta_max = 20.0;
  double cosine_s = 0.008;
  // Cosine alpha reaches zero at t = 1; it is frozen past this point.
  double cosine_t_max = 0.9946;
  int steps = 200;

  double log_alpha(double t) const;
  double alpha(double t) const;
  double sigma(double t) const;
  double beta(double t) const;
  // Half log-SNR, log(alpha_t / sigma_t).
  double lambda(double t) const;
  double t_of_lambda(double lambda) const;
  // Latest time with a finite lambda; reverse integration starts here.
  double t_end() const;

  bool operator==(const NoiseSchedule&) const = default;
};

std::pair<double, double> marginal_params(const NoiseSchedule& schedule, double t);

// Active-node tensors for one region. Edge tensors are n x n, symmetric,
// zero on the diagonal.
struct NoisySample {
  Matrix x_t;
  Matrix a_t;
  double t = 0.0;
  Matrix eps_x;
  Matrix eps_a;
};

// Standard normal node noise and symmetric edge noise drawn on the strict
// upper triangle.
std::pair<Matrix, Matrix> sample_noise(Eigen::Index n, Eigen::Index k_cat, Rng& rng);
Matrix symmetric_noise(Eigen::Index n, Rng& rng);

NoisySample perturb_with_noise(const Matrix& x0, const Matrix& a0, double t,
                               const NoiseSchedule& schedule, Matrix eps_x, Matrix eps_a);
NoisySample perturb(const Matrix& x0, const Matrix& a0, double t, const NoiseSchedule& schedule,
                    Rng& rng);

// Keeps A_ij when at least one endpoint has the residence category.
BinaryMatrix make_condition_graph(const citygrid::WalkingGraph& graph, int residence_category);

struct Conditioning {
  Matrix embedding;    // n x d_h
  BinaryMatrix graph;  // n x n
};

struct TrainingExample {
  Matrix x0;  // n x K one-hot
  Matrix a0;  // n x n adjacency
  Conditioning condition;
};

struct NoisePrediction {
  Matrix eps_x;
  Matrix eps_a;
};

using NoisePredictor =
    std::function<NoisePrediction(const NoisySample& sample, const Conditioning& condition)>;

// ||eps_x - hat_x||^2 + 2 sum_{i<j} (eps_a - hat_a)_ij^2.
double graph_noise_loss(const Matrix& eps_x, const Matrix& eps_a, const Matrix& hat_x,
                        const Matrix& hat_a);

// Upper-triangle edge weights (2 above the diagonal, 0 elsewhere) so that a
// full-matrix weighted sum equals the symmetric edge norm above.
Matrix edge_loss_weights(Eigen::Index n);

// Uniform t in (0, 1] drawn per graph.
double sample_time(Rng& rng);

// Batch mean of graph_noise_loss under fresh t and noise for every example.
double score_matching_loss(const NoisePredictor& predictor,
                           std::span<const TrainingExample> batch, const NoiseSchedule& schedule,
                           Rng& rng);

// n K + n (n - 1): the expected loss of a predictor that always returns zero.
double zero_predictor_expectation(Eigen::Index n, Eigen::Index k_cat);

}  // namespace fapcd::sde
