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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fapcd/baselines.hpp"
#include "fapcd/dataset_io.hpp"
#include "fapcd/error.hpp"
#include "fapcd/fairdemand.hpp"
#include "fapcd/metrics.hpp"
#include "fapcd/pipeline.hpp"
#include "fapcd/sampler.hpp"
#include "fapcd/training.hpp"

namespace {

using namespace fapcd;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct ConfigSource {
  std::string preset;
  std::string path;
  pipeline::ExperimentConfig resolve() const {
    pipeline::ExperimentConfig base = pipeline::default_config();
    if (preset == "desk") base = pipeline::desk_preset();
    else if (!preset.empty()) throw ConfigError("unknown preset '" + preset + "'");
    return path.empty() ? base : pipeline::load_config(path, base);
  }
};

void add_config_options(CLI::App* cmd, ConfigSource& src) {
  cmd->add_option("--config", src.path, "JSON experiment config");
  cmd->add_option("--preset", src.preset, "named preset (desk)");
}

void write_report(const std::string& path, const metrics::MetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << metrics::report_to_json(report).dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware facility layout generation with graph diffusion"};
  app.require_subcommand(1);

  ConfigSource src;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic city dataset");
  add_config_options(synth, src);
  int regions = -1;
  double balance = -1.0;
  std::uint64_t seed = 1;
  std::string out_path;
  synth->add_option("--regions", regions, "region count");
  synth->add_option("--balance", balance, "how well-served layouts are, in [0, 1]");
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--out", out_path, "output dataset (JSON lines)")->required();

  // pretrain-fairness
  auto* pre = app.add_subcommand("pretrain-fairness", "pretrain the fair-demand module");
  std::string dataset_path;
  int fd_epochs = 60, fd_batch = 6, fd_dh = 32;
  double fd_lr = 1e-5;
  pre->add_option("--dataset", dataset_path)->required();
  pre->add_option("--epochs", fd_epochs);
  pre->add_option("--batch", fd_batch);
  pre->add_option("--lr", fd_lr);
  pre->add_option("--d-h", fd_dh, "hidden width");
  pre->add_option("--seed", seed);
  pre->add_option("--out", out_path)->required();

  // train
  auto* train = app.add_subcommand("train", "train the denoiser");
  add_config_options(train, src);
  std::string fair_path, resume_path;
  int epochs = -1;
  train->add_option("--dataset", dataset_path)->required();
  train->add_option("--fairdemand", fair_path, "fair-demand checkpoint")->required();
  train->add_option("--epochs", epochs);
  train->add_option("--resume", resume_path, "checkpoint to continue from");
  train->add_option("--out", out_path)->required();

  // sample
  auto* samp = app.add_subcommand("sample", "generate layouts for every region");
  std::string ckpt_path, method = "dpm3";
  int steps = 200;
  bool no_clamp = false;
  samp->add_option("--ckpt", ckpt_path)->required();
  samp->add_option("--fairdemand", fair_path)->required();
  samp->add_option("--dataset", dataset_path)->required();
  samp->add_option("--seed", seed);
  samp->add_option("--method", method, "dpm3 or euler-maruyama");
  samp->add_option("--steps", steps);
  samp->add_flag("--no-clamp", no_clamp, "let residences be regenerated");
  samp->add_option("--out", out_path)->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score generated layouts");
  std::string generated_path, mode = "coverage", label = "Generated";
  eval->add_option("--generated", generated_path)->required();
  eval->add_option("--dataset", dataset_path)->required();
  eval->add_option("--mode", mode, "coverage or literal");
  eval->add_option("--label", label);
  eval->add_option("--out", out_path)->required();

  // baseline
  auto* base = app.add_subcommand("baseline", "run a reference allocator");
  std::string budget_path, log_path, report_path;
  base->add_option("--method", method, "walking or drf")->required();
  base->add_option("--dataset", dataset_path)->required();
  base->add_option("--budget", budget_path, "budget JSON (drf)");
  base->add_option("--log", log_path, "decision log (drf)");
  base->add_option("--report", report_path, "metrics report JSON");
  base->add_option("--out", out_path)->required();

  // moran
  auto* moran = app.add_subcommand("moran", "local Moran's I per region (CSV)");
  std::string value = "accessibility";
  moran->add_option("--dataset", dataset_path)->required();
  moran->add_option("--generated", generated_path, "layouts to score instead of the dataset");
  moran->add_option("--value", value, "per-region metric");
  moran->add_option("--out", out_path, "CSV path (stdout when absent)");

  // run
  auto* run = app.add_subcommand("run", "full pipeline into a run directory");
  add_config_options(run, src);
  std::string run_dir;
  run->add_option("--run-dir", run_dir)->required();

  // inspect
  auto* insp = app.add_subcommand("inspect", "summarize a checkpoint");
  insp->add_option("checkpoint", ckpt_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) {
      auto cfg = src.resolve();
      if (regions > 0) cfg.generator.regions = regions;
      if (balance >= 0.0) cfg.generator.balance = balance;
      citygrid::save_dataset(out_path, citygrid::generate_synthetic_city(cfg.generator, seed));
    } else if (*pre) {
      const auto ds = citygrid::load_dataset(dataset_path);
      auto model = fairdemand::init_model(ds, fd_dh, seed);
      const auto log = fairdemand::pretrain(model, ds, {fd_epochs, fd_batch, fd_lr, seed});
      fairdemand::save_model(out_path, model, &log);
      std::printf("fairness loss %.6f -> %.6f, min entropy %.6f -> %.6f\n", log.initial_loss,
                  log.final_loss, log.initial_min_entropy, log.final_min_entropy);
    } else if (*train) {
      auto cfg = src.resolve();
      if (epochs >= 0) cfg.train.epochs = epochs;
      cfg.train.validate();
      const auto ds = citygrid::load_dataset(dataset_path);
      const auto fair = fairdemand::load_model(fair_path);
      const auto examples = training::make_examples(
          ds, fairdemand::build_conditioning(fair, ds, cfg.condition_view));
      denoiser::DenoiserModel model;
      nn::Adam adam;
      training::TrainState state;
      if (!resume_path.empty()) {
        auto ck = training::load_denoiser(resume_path);
        model = std::move(ck.model);
        adam = ck.has_optimizer ? std::move(ck.adam) : training::make_optimizer(model, cfg.train);
        adam.config() = training::make_optimizer(model, cfg.train).config();
        state = ck.state;
      } else {
        auto mc = cfg.model;
        mc.k_cat = ds.k_cat();
        mc.cond_dim = fair.d_h;
        sde::NoiseSchedule schedule;
        schedule.kind = cfg.schedule;
        model = denoiser::build_model(mc, schedule, cfg.seeds.model);
        adam = training::make_optimizer(model, cfg.train);
      }
      const json extra = {{"train", training::train_config_to_json(cfg.train)},
                          {"condition_view", fairdemand::to_string(cfg.condition_view)},
                          {"fairdemand", fair_path}};
      training::train(model, adam, examples, cfg.train, state, [&](const training::TrainState& s) {
        std::printf("epoch %d loss %.6f\n", s.epoch, s.loss_curve.back());
        if (cfg.train.checkpoint_every > 0 && s.epoch % cfg.train.checkpoint_every == 0)
          training::save_denoiser(out_path, model, &adam, s, extra);
      });
      training::save_denoiser(out_path, model, &adam, state, extra);
    } else if (*samp) {
      const auto ck = training::load_denoiser(ckpt_path);
      const auto fair = fairdemand::load_model(fair_path);
      const auto ds = citygrid::load_dataset(dataset_path);
      const auto view =
          fairdemand::condition_view_from_string(ck.extra.value("condition_view", "template"));
      sampler::SamplerConfig sc;
      sc.method = sampler::method_from_string(method);
      sc.steps = steps;
      sc.clamp_residences = !no_clamp;
      auto gen = sampler::generate_for_dataset(denoiser::as_predictor(ck.model), ck.model.schedule,
                                               ds, fairdemand::build_conditioning(fair, ds, view),
                                               sc, seed, ckpt_path);
      citygrid::save_dataset(out_path, gen.dataset, &gen.provenance);
    } else if (*eval) {
      const auto ds = citygrid::load_dataset(dataset_path);
      const auto gen = citygrid::load_dataset(generated_path);
      const auto report =
          metrics::evaluate(gen, ds, metrics::efficiency_mode_from_string(mode), label);
      write_report(out_path, report);
      std::cout << metrics::format_table(std::vector{report});
    } else if (*base) {
      const auto ds = citygrid::load_dataset(dataset_path);
      if (method == "walking") {
        const auto res = baselines::walking_based(ds);
        citygrid::save_dataset(out_path, res.layouts);
        if (!report_path.empty()) write_report(report_path, res.report);
        std::cout << metrics::format_table(std::vector{res.report});
      } else if (method == "drf") {
        if (budget_path.empty()) throw ConfigError("drf needs --budget");
        std::ifstream in(budget_path);
        if (!in) throw ConfigError("cannot read budget " + budget_path);
        json bj;
        try {
          bj = json::parse(in);
        } catch (const json::exception& e) {
          throw ConfigError(budget_path + ": " + e.what());
        }
        const auto res = baselines::drf_allocate(ds, baselines::budget_from_json(bj, ds));
        if (!res.notice.empty()) std::cout << res.notice << "\n";
        citygrid::save_dataset(out_path, res.layouts);
        if (!log_path.empty()) {
          std::ofstream log(log_path);
          baselines::write_decision_log(log, res.grants);
        }
        if (!report_path.empty()) write_report(report_path, metrics::evaluate(res.layouts, ds,
                                                                              metrics::EfficiencyMode::Coverage, "DRF"));
      } else {
        throw ConfigError("unknown baseline '" + method + "'");
      }
    } else if (*moran) {
      const auto ds = citygrid::load_dataset(dataset_path);
      const auto layouts = generated_path.empty() ? ds : citygrid::load_dataset(generated_path);
      const auto report = metrics::evaluate(layouts, ds);
      const auto values = metrics::region_values(report, value);
      std::vector<std::pair<int, int>> cells;
      for (const auto& m : report.per_region) {
        const auto* r = ds.find(m.region_id);
        cells.emplace_back(r->record.grid_row, r->record.grid_col);
      }
      const auto moran_i = metrics::local_morans_i(values, metrics::rook_weights(cells));
      std::ostringstream csv;
      csv << "region_id,grid_row,grid_col," << value << ",local_moran_i\n";
      for (std::size_t i = 0; i < values.size(); ++i)
        csv << report.per_region[i].region_id << "," << cells[i].first << "," << cells[i].second
            << "," << values[i] << "," << moran_i[i] << "\n";
      if (out_path.empty()) {
        std::cout << csv.str();
      } else {
        std::ofstream out(out_path);
        out << csv.str();
      }
    } else if (*run) {
      const auto summary = pipeline::run_pipeline(src.resolve(), run_dir);
      std::cout << metrics::format_table(summary.reports);
    } else if (*insp) {
      std::cout << pipeline::inspect(ckpt_path);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
