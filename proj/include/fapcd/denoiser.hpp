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

#include "json.hpp"

#include "fapcd/autodiff.hpp"
#include "fapcd/kernels.hpp"
#include "fapcd/nn.hpp"
#include "fapcd/sde.hpp"

namespace fapcd::denoiser {

struct DenoiserConfig {
  int layers = 3;
  int d_hidden = 128;
  int heads = 4;
  int m_walk = 20;
  int time_embed_dim = 128;  // width of the sinusoidal code
  double dropout = 0.0;
  int k_cat = 14;
  int cond_dim = 128;

  void validate() const;
  int node_input_dim() const { return k_cat + m_walk + 2; }
  // noisy value, shortest-path buckets 0..m_walk+1, condition bit
  int edge_input_dim() const { return m_walk + 4; }
  bool operator==(const DenoiserConfig&) const = default;
};

nlohmann::json config_to_json(const DenoiserConfig& config);
DenoiserConfig config_from_json(const nlohmann::json& j);
nlohmann::json schedule_to_json(const sde::NoiseSchedule& schedule);
sde::NoiseSchedule schedule_from_json(const nlohmann::json& j);

struct AugmentedGraph {
  Matrix node_feats;   // n x (K + m_walk + 2)
  Matrix edge_feats;   // (n*n) x (m_walk + 4)
  BinaryMatrix a_hat;  // binarized noisy adjacency
};

// Â_ij = [A_t,ij > threshold * alpha_t], zero diagonal.
BinaryMatrix binarize(const Matrix& a_t, double alpha_t, double threshold = 0.5);
// Wasserman-Faust closeness: ((r-1)/sum d) * ((r-1)/(n-1)) over the r nodes
// reachable from i, 0 for isolated nodes.
Eigen::VectorXd closeness_centrality(const kernels::HopMatrix& hops);
AugmentedGraph augment(const sde::NoisySample& sample, const BinaryMatrix& condition_graph,
                       double alpha_t, const DenoiserConfig& config);

// [sin(1000 t w_i), cos(1000 t w_i)] with w_i = 10000^(-i/(dim/2)).
Matrix time_sinusoid(double t, int dim);

struct DenoiserModel {
  DenoiserConfig config;
  sde::NoiseSchedule schedule;
  ad::ParameterSet params;

  std::size_t parameter_count() const { return params.scalar_count(); }
};

DenoiserModel build_model(const DenoiserConfig& config, const sde::NoiseSchedule& schedule,
                          std::uint64_t seed);

// Time embedding after the two fully connected layers, 1 x d_hidden.
ad::Var time_embedding(DenoiserModel& model, ad::Tape& tape, double t);

struct LayerState {
  ad::Var h;  // n x d
  ad::Var e;  // (n*n) x d
};

// Graph-transformer block of layer l: edge-gated attention, residual, norm.
ad::Var gtb_forward(DenoiserModel& model, ad::Tape& tape, int layer, const LayerState& in);
// Message-passing block of layer l over Â: returns updated node and edge states.
LayerState mpb_forward(DenoiserModel& model, ad::Tape& tape, int layer, const LayerState& in,
                       const BinaryMatrix& a_hat);

struct NoiseOutput {
  ad::Var eps_x;  // n x K
  ad::Var eps_a;  // n x n, symmetric, zero diagonal
};

// dropout_rng == nullptr disables dropout.
NoiseOutput forward(DenoiserModel& model, ad::Tape& tape, const sde::NoisySample& sample,
                    const sde::Conditioning& condition, Rng* dropout_rng = nullptr);

sde::NoisePrediction predict_noise(const DenoiserModel& model, const sde::NoisySample& sample,
                                   const sde::Conditioning& condition);

sde::NoisePredictor as_predictor(const DenoiserModel& model);

// Differentiable per-graph loss ||eps_x - hat||^2 + 2 sum_{i<j} (eps_a - hat)^2.
ad::Var sample_loss(DenoiserModel& model, ad::Tape& tape, const sde::NoisySample& sample,
                    const sde::Conditioning& condition, Rng* dropout_rng = nullptr);

}  // namespace fapcd::denoiser
