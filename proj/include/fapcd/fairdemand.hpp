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

#include "fapcd/autodiff.hpp"
#include "fapcd/citygrid.hpp"
#include "fapcd/sde.hpp"

namespace fapcd::fairdemand {

// Single-head demand attention. The query is built from the standardized
// urban attributes concatenated with the demand vector; keys and values come
// from the region's grid features.
struct FairDemandModel {
  int d_h = 32;
  int k_cat = 14;
  int attr_dim = citygrid::kAttributeDim;
  int feature_dim = 0;
  int residence_category = 0;
  ad::ParameterSet params;  // w_q, w_k, w_v, w_h, w_o
  Matrix w_f;               // frozen feature projection, feature_dim x d_h
  Matrix attr_mean;         // 1 x attr_dim
  Matrix attr_std;          // 1 x attr_dim

  std::size_t parameter_count() const { return params.scalar_count(); }
};

FairDemandModel init_model(const citygrid::Dataset& dataset, int d_h, std::uint64_t seed);

struct AttentionResult {
  Matrix alpha;   // 1 x n, attention over nodes
  Matrix pooled;  // 1 x d_h, alpha V W_H
  Matrix h;       // n x d_h, pooled broadcast to node rows
};

AttentionResult demand_attention(const citygrid::RegionRecord& record,
                                 const citygrid::WalkingGraph& graph,
                                 const FairDemandModel& model);

// C = H .* F_proj elementwise.
Matrix condition_embedding(const Matrix& h, const Matrix& f_proj);

// F W_F for the region's grid features.
Matrix project_features(const citygrid::RegionRecord& record, const FairDemandModel& model);

// Differentiable 1 x K category logits for one region.
ad::Var region_logits(FairDemandModel& model, ad::Tape& tape, const citygrid::RegionRecord& record);

// Mask of categories that take part in the entropy objective.
std::vector<std::uint8_t> facility_mask(const std::vector<std::uint8_t>& residence_mask);

ad::Var fairness_loss(const ad::Var& logits, const std::vector<std::uint8_t>& residence_mask);
double fairness_loss(const Matrix& logits, const std::vector<std::uint8_t>& residence_mask);

// -p ln p of the batch-mean category distribution, 1 x K; residence entries 0.
Matrix category_entropy(const Matrix& logits, const std::vector<std::uint8_t>& residence_mask);
Matrix dataset_logits(const FairDemandModel& model, const citygrid::Dataset& dataset);
double min_category_entropy(const FairDemandModel& model, const citygrid::Dataset& dataset);

struct PretrainConfig {
  int epochs = 60;
  int batch = 6;
  double lr = 1e-5;
  std::uint64_t seed = 0;
};

struct PretrainLog {
  std::vector<double> epoch_loss;
  double initial_loss = 0.0;  // full-dataset L before the first step
  double final_loss = 0.0;
  double initial_min_entropy = 0.0;
  double final_min_entropy = 0.0;
};

// Adam on the fairness loss over shuffled mini-batches. A non-finite loss
// throws TrainingError before any update is applied, so the model keeps the
// last finite parameters.
PretrainLog pretrain(FairDemandModel& model, const citygrid::Dataset& dataset,
                     const PretrainConfig& config);

// What the denoiser sees of a region. Full: every node's embedding and every
// residence-incident edge. Template: embeddings of facility slots are zeroed
// and only residence-residence edges are kept, so the target layout cannot be
// read back from the condition.
enum class ConditionView { Full, Template };

std::string to_string(ConditionView view);
ConditionView condition_view_from_string(const std::string& name);

sde::Conditioning build_conditioning(const FairDemandModel& model, const citygrid::Region& region,
                                     ConditionView view);
std::vector<sde::Conditioning> build_conditioning(const FairDemandModel& model,
                                                  const citygrid::Dataset& dataset,
                                                  ConditionView view);

void save_model(const std::string& path, const FairDemandModel& model, const PretrainLog* log);
FairDemandModel load_model(const std::string& path);

}  // namespace fapcd::fairdemand
