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

#include "json.hpp"

#include "fapcd/baselines.hpp"
#include "fapcd/citygrid.hpp"
#include "fapcd/denoiser.hpp"
#include "fapcd/fairdemand.hpp"
#include "fapcd/metrics.hpp"
#include "fapcd/sampler.hpp"
#include "fapcd/training.hpp"

namespace fapcd::pipeline {

struct Seeds {
  std::uint64_t synth = 1;
  std::uint64_t eval_synth = 2;
  std::uint64_t fairdemand = 3;
  std::uint64_t model = 4;
  std::uint64_t train = 5;
  std::uint64_t sample = 6;
  bool operator==(const Seeds&) const = default;
};

struct FairDemandSettings {
  int d_h = 32;
  int epochs = 60;
  int batch = 6;
  double lr = 1e-5;
  bool operator==(const FairDemandSettings&) const = default;
};

struct ExperimentConfig {
  // Empty paths mean the datasets are synthesized from the generator settings.
  std::string dataset_path;
  std::string eval_dataset_path;
  citygrid::GeneratorConfig generator;
  int eval_regions = 16;
  double eval_balance = 0.3;
  denoiser::DenoiserConfig model;
  sde::ScheduleKind schedule = sde::ScheduleKind::Cosine;
  fairdemand::ConditionView condition_view = fairdemand::ConditionView::Template;
  FairDemandSettings fair;
  training::TrainConfig train;
  sampler::SamplerConfig sampler;
  metrics::EfficiencyMode efficiency_mode = metrics::EfficiencyMode::Coverage;
  // Per-category DRF units; empty = one unit of each facility category per
  // evaluation region.
  std::vector<int> drf_units;
  int drf_per_region_cap = 0;  // 0 = N_max
  Seeds seeds;

  void validate() const;
};

// 64 regions, N_max 64, 200 epochs, batch 8, lr 3e-4, width 32.
ExperimentConfig desk_preset();
ExperimentConfig default_config();

nlohmann::json config_to_json(const ExperimentConfig& config);
// Missing keys keep the values of `base`.
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const ExperimentConfig& base = default_config());
ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base);

// FNV-1a over the canonical JSON dump.
std::string config_hash(const ExperimentConfig& config);

inline const std::vector<std::string> kStages = {"synth",  "pretrain", "train",
                                                 "sample", "evaluate", "baselines"};

struct RunSummary {
  std::string run_dir;
  std::vector<std::string> completed;
  std::vector<metrics::MetricsReport> reports;  // model, walking-based, DRF
  std::vector<double> loss_curve;
};

// synth -> pretrain -> train -> sample -> evaluate -> baselines inside
// run_dir. A failing stage is recorded in the manifest and rethrown as
// Error("stage <name>: ...").
RunSummary run_pipeline(const ExperimentConfig& config, const std::string& run_dir);

// Human-readable description of a checkpoint of either kind.
std::string inspect(const std::string& checkpoint_path);

// One SVG bar chart comparing the reports on one metric.
std::string bar_chart_svg(const std::vector<metrics::MetricsReport>& reports,
                          const std::string& metric);

double metric_value(const metrics::MetricsReport& report, const std::string& metric);

}  // namespace fapcd::pipeline
