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
#include <string>
#include <vector>

#include "json.hpp"

#include "fapcd/denoiser.hpp"
#include "fapcd/nn.hpp"
#include "fapcd/sde.hpp"

namespace fapcd::training {

struct TrainConfig {
  int epochs = 1000;
  int batch = 8;
  double lr = 3e-4;
  double weight_decay = 1e-2;
  double grad_clip = 1.0;
  std::string lr_decay = "none";  // "none" or "cosine"
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs between periodic checkpoints, 0 = off

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainState {
  int epoch = 0;  // completed epochs
  std::vector<double> loss_curve;
};

nn::Adam make_optimizer(const denoiser::DenoiserModel& model, const TrainConfig& config);

// Learning-rate multiplier for a 0-based epoch.
double lr_scale(const TrainConfig& config, int epoch);

// One epoch of epsilon-matching over shuffled mini-batches; returns the mean
// per-graph loss. Everything random is drawn from (seed, epoch), so a run
// resumed from a checkpoint continues bit-identically.
double train_epoch(denoiser::DenoiserModel& model, nn::Adam& adam,
                   const std::vector<sde::TrainingExample>& examples, const TrainConfig& config,
                   int epoch);

using EpochCallback = std::function<void(const TrainState&)>;

// Runs epochs state.epoch .. config.epochs-1, appending to the loss curve.
void train(denoiser::DenoiserModel& model, nn::Adam& adam,
           const std::vector<sde::TrainingExample>& examples, const TrainConfig& config,
           TrainState& state, const EpochCallback& on_epoch = {});

std::vector<sde::TrainingExample> make_examples(const citygrid::Dataset& dataset,
                                                const std::vector<sde::Conditioning>& conditions);

struct DenoiserCheckpoint {
  denoiser::DenoiserModel model;
  nn::Adam adam;
  bool has_optimizer = false;
  TrainState state;
  nlohmann::json extra = nlohmann::json::object();  // training and conditioning settings
};

void save_denoiser(const std::string& path, const denoiser::DenoiserModel& model,
                   const nn::Adam* adam, const TrainState& state, const nlohmann::json& extra);
DenoiserCheckpoint load_denoiser(const std::string& path);

}  // namespace fapcd::training
