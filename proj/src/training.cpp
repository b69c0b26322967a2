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

#include "fapcd/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fapcd/checkpoint.hpp"
#include "fapcd/error.hpp"

namespace fapcd::training {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 0 || batch < 1) throw ConfigError("training needs epochs >= 0 and batch >= 1");
  if (lr < 0.0 || weight_decay < 0.0 || grad_clip < 0.0)
    throw ConfigError("lr, weight_decay and grad_clip must be non-negative");
  if (lr_decay != "none" && lr_decay != "cosine")
    throw ConfigError("lr_decay must be 'none' or 'cosine'");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},     {"batch", c.batch},
          {"lr", c.lr},             {"weight_decay", c.weight_decay},
          {"grad_clip", c.grad_clip}, {"lr_decay", c.lr_decay},
          {"seed", c.seed},         {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  return c;
}

nn::Adam make_optimizer(const denoiser::DenoiserModel& model, const TrainConfig& config) {
  nn::AdamConfig ac;
  ac.lr = config.lr;
  ac.weight_decay = config.weight_decay;
  ac.grad_clip = config.grad_clip;
  return nn::Adam(model.params, ac);
}

double lr_scale(const TrainConfig& config, int epoch) {
  if (config.lr_decay == "cosine" && config.epochs > 0)
    return 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / config.epochs));
  return 1.0;
}

double train_epoch(denoiser::DenoiserModel& model, nn::Adam& adam,
                   const std::vector<sde::TrainingExample>& examples, const TrainConfig& config,
                   int epoch) {
  if (examples.empty()) throw InputError("training set is empty");
  Rng rng = make_rng(config.seed, 0x7EA1, static_cast<std::uint64_t>(epoch));
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const double scale = lr_scale(config, epoch);
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += config.batch) {
    const std::size_t stop = std::min(order.size(), start + config.batch);
    const double inv_b = 1.0 / static_cast<double>(stop - start);
    model.params.zero_grad();
    for (std::size_t b = start; b < stop; ++b) {
      const auto& ex = examples[order[b]];
      const double t = sde::sample_time(rng);
      const sde::NoisySample s = sde::perturb(ex.x0, ex.a0, t, model.schedule, rng);
      ad::Tape tape;
      ad::Var loss = denoiser::sample_loss(model, tape, s, ex.condition,
                                           model.config.dropout > 0.0 ? &rng : nullptr);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
      tape.backward(loss, inv_b);
      total += value;
    }
    adam.step(model.params, scale);
  }
  return total / static_cast<double>(examples.size());
}

void train(denoiser::DenoiserModel& model, nn::Adam& adam,
           const std::vector<sde::TrainingExample>& examples, const TrainConfig& config,
           TrainState& state, const EpochCallback& on_epoch) {
  config.validate();
  while (state.epoch < config.epochs) {
    const double loss = train_epoch(model, adam, examples, config, state.epoch);
    state.loss_curve.push_back(loss);
    ++state.epoch;
    if (on_epoch) on_epoch(state);
  }
}

std::vector<sde::TrainingExample> make_examples(const citygrid::Dataset& dataset,
                                                const std::vector<sde::Conditioning>& conditions) {
  if (conditions.size() != dataset.regions.size())
    throw ConfigError("training needs one condition embedding per region");
  std::vector<sde::TrainingExample> out;
  for (std::size_t r = 0; r < dataset.regions.size(); ++r) {
    const auto& g = dataset.regions[r].graph;
    if (conditions[r].embedding.rows() != g.node_count())
      throw ConfigError("condition embedding of region " +
                        std::to_string(dataset.regions[r].record.region_id) +
                        " does not match its node count");
    sde::TrainingExample ex;
    ex.x0 = g.one_hot(dataset.k_cat()).topRows(g.node_count());
    ex.a0 = g.adjacency.cast<double>();
    ex.condition = conditions[r];
    out.push_back(std::move(ex));
  }
  return out;
}

void save_denoiser(const std::string& path, const denoiser::DenoiserModel& model,
                   const nn::Adam* adam, const TrainState& state, const json& extra) {
  ckpt::CheckpointFile file;
  file.kind = "denoiser";
  file.config = {{"denoiser", denoiser::config_to_json(model.config)},
                 {"schedule", denoiser::schedule_to_json(model.schedule)},
                 {"extra", extra}};
  file.meta = {{"epoch", state.epoch},
               {"loss_curve", state.loss_curve},
               {"parameter_count", model.parameter_count()}};
  ckpt::store_parameters(file, model.params);
  if (adam) ckpt::store_optimizer(file, model.params, *adam);
  ckpt::write_checkpoint(path, file);
}

DenoiserCheckpoint load_denoiser(const std::string& path) {
  const auto file = ckpt::read_checkpoint(path);
  if (file.kind != "denoiser")
    throw FormatError(path + ": expected a denoiser checkpoint, found " + file.kind);
  DenoiserCheckpoint out;
  try {
    const auto cfg = denoiser::config_from_json(file.config.at("denoiser"));
    const auto sch = denoiser::schedule_from_json(file.config.at("schedule"));
    out.extra = file.config.value("extra", json::object());
    out.model = denoiser::build_model(cfg, sch, 0);
    out.state.epoch = file.meta.at("epoch").get<int>();
    out.state.loss_curve = file.meta.at("loss_curve").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  ckpt::restore_parameters(file, out.model.params);
  TrainConfig tc = train_config_from_json(out.extra.value("train", json::object()));
  out.adam = make_optimizer(out.model, tc);
  out.has_optimizer = ckpt::restore_optimizer(file, out.model.params, out.adam);
  return out;
}

}  // namespace fapcd::training
