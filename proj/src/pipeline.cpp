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

#include "fapcd/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fapcd/checkpoint.hpp"
#include "fapcd/dataset_io.hpp"
#include "fapcd/error.hpp"

namespace fapcd::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
  if (dataset_path.empty()) generator.validate();
  if (eval_dataset_path.empty()) {
    if (eval_regions < 3) throw ConfigError("eval_regions must be >= 3");
    if (!(eval_balance >= 0.0 && eval_balance <= 1.0))
      throw ConfigError("eval_balance must lie in [0, 1]");
  }
  model.validate();
  train.validate();
  sampler.validate();
  if (fair.d_h < 1 || fair.epochs < 0 || fair.batch < 1 || fair.lr < 0.0)
    throw ConfigError("invalid fair-demand settings");
  if (drf_per_region_cap < 0) throw ConfigError("drf_per_region_cap must be >= 0");
  for (const auto* p : {&dataset_path, &eval_dataset_path})
    if (!p->empty() && !fs::exists(*p)) throw ConfigError("dataset file " + *p + " does not exist");
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.model.cond_dim = c.fair.d_h;
  c.train.seed = c.seeds.train;
  return c;
}

ExperimentConfig desk_preset() {
  ExperimentConfig c = default_config();
  c.generator.regions = 64;
  c.generator.n_max = 64;
  c.generator.balance = 1.0;
  c.model.layers = 3;
  c.model.d_hidden = 32;
  c.model.heads = 4;
  c.model.time_embed_dim = 32;
  c.fair.d_h = 32;
  c.model.cond_dim = 32;
  c.train.epochs = 200;
  c.train.batch = 8;
  c.train.lr = 3e-4;
  c.train.weight_decay = 1e-2;
  return c;
}

namespace {

json generator_to_json(const citygrid::GeneratorConfig& g) {
  json bands = json::array();
  for (const auto& b : g.demand_bands) bands.push_back({b.lo, b.hi});
  return {{"regions", g.regions},
          {"grid_cols", g.grid_cols},
          {"node_min", g.node_min},
          {"node_max", g.node_max},
          {"residence_min", g.residence_min},
          {"residence_max", g.residence_max},
          {"n_max", g.n_max},
          {"balance", g.balance},
          {"grid_size_m", g.grid_size_m},
          {"walk_threshold_m", g.walk_threshold_m},
          {"residence_radius_m", g.residence_radius_m},
          {"category_embedding_dim", g.category_embedding_dim},
          {"person_per_residence_min", g.person_per_residence_min},
          {"person_per_residence_max", g.person_per_residence_max},
          {"categories", citygrid::categories_to_json(g.categories)},
          {"demand_bands", bands}};
}

citygrid::GeneratorConfig generator_from_json(const json& j, citygrid::GeneratorConfig g) {
  g.regions = j.value("regions", g.regions);
  g.grid_cols = j.value("grid_cols", g.grid_cols);
  g.node_min = j.value("node_min", g.node_min);
  g.node_max = j.value("node_max", g.node_max);
  g.residence_min = j.value("residence_min", g.residence_min);
  g.residence_max = j.value("residence_max", g.residence_max);
  g.n_max = j.value("n_max", g.n_max);
  g.balance = j.value("balance", g.balance);
  g.grid_size_m = j.value("grid_size_m", g.grid_size_m);
  g.walk_threshold_m = j.value("walk_threshold_m", g.walk_threshold_m);
  g.residence_radius_m = j.value("residence_radius_m", g.residence_radius_m);
  g.category_embedding_dim = j.value("category_embedding_dim", g.category_embedding_dim);
  g.person_per_residence_min = j.value("person_per_residence_min", g.person_per_residence_min);
  g.person_per_residence_max = j.value("person_per_residence_max", g.person_per_residence_max);
  if (j.contains("categories")) g.categories = citygrid::categories_from_json(j["categories"]);
  if (j.contains("demand_bands")) {
    g.demand_bands.clear();
    for (const auto& b : j["demand_bands"])
      g.demand_bands.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  }
  return g;
}

json sampler_to_json(const sampler::SamplerConfig& s) {
  return {{"method", sampler::to_string(s.method)},
          {"steps", s.steps},
          {"clamp_residences", s.clamp_residences},
          {"decode_threshold", s.decode_threshold},
          {"t_eps", s.t_eps}};
}

sampler::SamplerConfig sampler_from_json(const json& j, sampler::SamplerConfig s) {
  if (j.contains("method")) s.method = sampler::method_from_string(j["method"].get<std::string>());
  s.steps = j.value("steps", s.steps);
  s.clamp_residences = j.value("clamp_residences", s.clamp_residences);
  s.decode_threshold = j.value("decode_threshold", s.decode_threshold);
  s.t_eps = j.value("t_eps", s.t_eps);
  return s;
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  return {{"dataset_path", c.dataset_path},
          {"eval_dataset_path", c.eval_dataset_path},
          {"generator", generator_to_json(c.generator)},
          {"eval_regions", c.eval_regions},
          {"eval_balance", c.eval_balance},
          {"model", denoiser::config_to_json(c.model)},
          {"schedule", sde::to_string(c.schedule)},
          {"condition_view", fairdemand::to_string(c.condition_view)},
          {"fairdemand",
           {{"d_h", c.fair.d_h}, {"epochs", c.fair.epochs}, {"batch", c.fair.batch}, {"lr", c.fair.lr}}},
          {"train", training::train_config_to_json(c.train)},
          {"sampler", sampler_to_json(c.sampler)},
          {"efficiency_mode", metrics::to_string(c.efficiency_mode)},
          {"drf", {{"units", c.drf_units}, {"per_region_cap", c.drf_per_region_cap}}},
          {"seeds",
           {{"synth", c.seeds.synth},
            {"eval_synth", c.seeds.eval_synth},
            {"fairdemand", c.seeds.fairdemand},
            {"model", c.seeds.model},
            {"train", c.seeds.train},
            {"sample", c.seeds.sample}}}};
}

ExperimentConfig config_from_json(const json& j, const ExperimentConfig& base) {
  ExperimentConfig c = base;
  try {
    c.dataset_path = j.value("dataset_path", c.dataset_path);
    c.eval_dataset_path = j.value("eval_dataset_path", c.eval_dataset_path);
    if (j.contains("generator")) c.generator = generator_from_json(j["generator"], c.generator);
    c.eval_regions = j.value("eval_regions", c.eval_regions);
    c.eval_balance = j.value("eval_balance", c.eval_balance);
    if (j.contains("model")) {
      json merged = denoiser::config_to_json(c.model);
      merged.update(j["model"]);
      c.model = denoiser::config_from_json(merged);
    }
    if (j.contains("schedule"))
      c.schedule = sde::schedule_kind_from_string(j["schedule"].get<std::string>());
    if (j.contains("condition_view"))
      c.condition_view = fairdemand::condition_view_from_string(j["condition_view"].get<std::string>());
    if (j.contains("fairdemand")) {
      const auto& f = j["fairdemand"];
      c.fair.d_h = f.value("d_h", c.fair.d_h);
      c.fair.epochs = f.value("epochs", c.fair.epochs);
      c.fair.batch = f.value("batch", c.fair.batch);
      c.fair.lr = f.value("lr", c.fair.lr);
    }
    if (j.contains("train")) {
      json merged = training::train_config_to_json(c.train);
      merged.update(j["train"]);
      c.train = training::train_config_from_json(merged);
    }
    if (j.contains("sampler")) c.sampler = sampler_from_json(j["sampler"], c.sampler);
    if (j.contains("efficiency_mode"))
      c.efficiency_mode = metrics::efficiency_mode_from_string(j["efficiency_mode"].get<std::string>());
    if (j.contains("drf")) {
      c.drf_units = j["drf"].value("units", c.drf_units);
      c.drf_per_region_cap = j["drf"].value("per_region_cap", c.drf_per_region_cap);
    }
    if (j.contains("seeds")) {
      const auto& s = j["seeds"];
      c.seeds.synth = s.value("synth", c.seeds.synth);
      c.seeds.eval_synth = s.value("eval_synth", c.seeds.eval_synth);
      c.seeds.fairdemand = s.value("fairdemand", c.seeds.fairdemand);
      c.seeds.model = s.value("model", c.seeds.model);
      c.seeds.train = s.value("train", c.seeds.train);
      c.seeds.sample = s.value("sample", c.seeds.sample);
      if (!j.contains("train") || !j["train"].contains("seed")) c.train.seed = c.seeds.train;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j, base);
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = config_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double metric_value(const metrics::MetricsReport& r, const std::string& metric) {
  if (metric == "life_service") return r.life_service;
  if (metric == "elderly_care") return r.elderly_care;
  if (metric == "diversity") return r.diversity;
  if (metric == "accessibility") return r.accessibility;
  if (metric == "gini") return r.gini;
  if (metric == "average") return r.average;
  throw ConfigError("unknown metric '" + metric + "'");
}

std::string bar_chart_svg(const std::vector<metrics::MetricsReport>& reports,
                          const std::string& metric) {
  const int width = 120 + 110 * static_cast<int>(reports.size());
  const int height = 300;
  const int top = 40, bottom = 250;
  double lo = 0.0, hi = 0.0;
  for (const auto& r : reports) {
    lo = std::min(lo, metric_value(r, metric));
    hi = std::max(hi, metric_value(r, metric));
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  auto ypos = [&](double v) { return bottom - (v - lo) / (hi - lo) * (bottom - top); };
  std::ostringstream s;
  char buf[256];
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<text x=\"10\" y=\"20\" font-size=\"14\">" << metric << "</text>\n";
  const double zero = ypos(0.0);
  std::snprintf(buf, sizeof buf, "<line x1=\"50\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"black\"/>\n",
                zero, width - 20, zero);
  s << buf;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const double v = metric_value(reports[i], metric);
    const double x = 70.0 + 110.0 * static_cast<double>(i);
    const double y = std::min(ypos(v), zero);
    const double h = std::abs(ypos(v) - zero);
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"80\" height=\"%.1f\" fill=\"#4a7ab5\"/>\n"
                  "<text x=\"%.1f\" y=\"%.1f\">%.3f</text>\n",
                  x, y, h, x + 20.0, y - 4.0, v);
    s << buf;
    s << "<text x=\"" << x << "\" y=\"" << bottom + 25 << "\">" << reports[i].label << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

struct Manifest {
  fs::path path;
  json doc;
  void stage(const std::string& name, const std::string& status) {
    for (auto& s : doc["stages"])
      if (s["name"] == name) s["status"] = status;
    write_json(path, doc);
  }
};

std::vector<int> default_units(const citygrid::Dataset& ds) {
  std::vector<int> units(ds.k_cat(), 0);
  for (const auto& c : ds.categories)
    if (!c.is_residence) units[c.id] = static_cast<int>(ds.regions.size());
  return units;
}

}  // namespace

RunSummary run_pipeline(const ExperimentConfig& input, const std::string& run_dir) {
  ExperimentConfig config = input;
  config.validate();
  fs::create_directories(fs::path(run_dir) / "plots");
  const fs::path dir(run_dir);
  write_json(dir / "config.json", config_to_json(config));

  Manifest manifest{dir / "manifest.json", json::object()};
  manifest.doc["config_hash"] = config_hash(config);
  manifest.doc["seeds"] = config_to_json(config)["seeds"];
  manifest.doc["train_seed"] = config.train.seed;
  manifest.doc["config"] = "config.json";
  manifest.doc["stages"] = json::array();
  for (const auto& s : kStages) manifest.doc["stages"].push_back({{"name", s}, {"status", "pending"}});
  write_json(manifest.path, manifest.doc);

  RunSummary summary;
  summary.run_dir = run_dir;
  citygrid::Dataset train_ds, eval_ds, generated;
  fairdemand::FairDemandModel fair;
  denoiser::DenoiserModel model;
  metrics::MetricsReport model_report;

  auto run_stage = [&](const std::string& name, const auto& body) {
    manifest.stage(name, "running");
    try {
      body();
    } catch (const std::exception& e) {
      manifest.stage(name, "failed");
      manifest.doc["error"] = e.what();
      write_json(manifest.path, manifest.doc);
      throw Error("stage " + name + ": " + e.what());
    }
    manifest.stage(name, "complete");
    summary.completed.push_back(name);
  };

  run_stage("synth", [&] {
    if (config.dataset_path.empty()) {
      train_ds = citygrid::generate_synthetic_city(config.generator, config.seeds.synth);
    } else {
      train_ds = citygrid::load_dataset(config.dataset_path);
    }
    if (config.eval_dataset_path.empty()) {
      citygrid::GeneratorConfig g = config.generator;
      g.regions = config.eval_regions;
      g.balance = config.eval_balance;
      eval_ds = citygrid::generate_synthetic_city(g, config.seeds.eval_synth);
    } else {
      eval_ds = citygrid::load_dataset(config.eval_dataset_path);
    }
    citygrid::save_dataset((dir / "dataset.jsonl").string(), train_ds);
    citygrid::save_dataset((dir / "eval.jsonl").string(), eval_ds);
  });

  run_stage("pretrain", [&] {
    fair = fairdemand::init_model(train_ds, config.fair.d_h, config.seeds.fairdemand);
    const auto log = fairdemand::pretrain(
        fair, train_ds,
        {config.fair.epochs, config.fair.batch, config.fair.lr, config.seeds.fairdemand});
    fairdemand::save_model((dir / "fairdemand.ckpt").string(), fair, &log);
  });

  run_stage("train", [&] {
    denoiser::DenoiserConfig mc = config.model;
    mc.k_cat = train_ds.k_cat();
    mc.cond_dim = fair.d_h;
    sde::NoiseSchedule schedule;
    schedule.kind = config.schedule;
    model = denoiser::build_model(mc, schedule, config.seeds.model);
    const auto examples = training::make_examples(
        train_ds, fairdemand::build_conditioning(fair, train_ds, config.condition_view));
    nn::Adam adam = training::make_optimizer(model, config.train);
    training::TrainState state;
    const json extra = {{"train", training::train_config_to_json(config.train)},
                        {"condition_view", fairdemand::to_string(config.condition_view)},
                        {"fairdemand", "fairdemand.ckpt"}};
    fs::create_directories(dir / "checkpoints");
    training::train(model, adam, examples, config.train, state, [&](const training::TrainState& s) {
      if (config.train.checkpoint_every > 0 && s.epoch % config.train.checkpoint_every == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%05d.ckpt", s.epoch);
        training::save_denoiser((dir / "checkpoints" / name).string(), model, &adam, s, extra);
      }
    });
    training::save_denoiser((dir / "denoiser.ckpt").string(), model, &adam, state, extra);
    std::ostringstream csv;
    csv << "epoch,loss\n";
    char buf[64];
    for (std::size_t e = 0; e < state.loss_curve.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, state.loss_curve[e]);
      csv << buf;
    }
    write_text(dir / "loss_curve.csv", csv.str());
    summary.loss_curve = state.loss_curve;
  });

  run_stage("sample", [&] {
    const auto conditions = fairdemand::build_conditioning(fair, eval_ds, config.condition_view);
    auto gen = sampler::generate_for_dataset(denoiser::as_predictor(model), model.schedule, eval_ds,
                                             conditions, config.sampler, config.seeds.sample,
                                             "denoiser.ckpt");
    citygrid::save_dataset((dir / "generated.jsonl").string(), gen.dataset, &gen.provenance);
    generated = std::move(gen.dataset);
  });

  run_stage("evaluate", [&] {
    model_report = metrics::evaluate(generated, eval_ds, config.efficiency_mode, "Diffusion");
    write_json(dir / "report.json", metrics::report_to_json(model_report));
  });

  run_stage("baselines", [&] {
    auto walking = baselines::walking_based(eval_ds, config.efficiency_mode);
    baselines::AllocationBudget budget;
    budget.total_units = config.drf_units.empty() ? default_units(eval_ds) : config.drf_units;
    budget.per_region_cap = config.drf_per_region_cap > 0 ? config.drf_per_region_cap : eval_ds.n_max;
    auto drf = baselines::drf_allocate(eval_ds, budget);
    citygrid::save_dataset((dir / "drf_layouts.jsonl").string(), drf.layouts);
    std::ofstream log(dir / "drf_decisions.jsonl");
    baselines::write_decision_log(log, drf.grants);
    auto drf_report = metrics::evaluate(drf.layouts, eval_ds, config.efficiency_mode, "DRF");
    summary.reports = {model_report, walking.report, drf_report};
    json all = json::array();
    for (const auto& r : summary.reports) all.push_back(metrics::report_to_json(r));
    write_json(dir / "comparison.json", all);
    write_text(dir / "table.txt", metrics::format_table(summary.reports));
    for (const char* m : {"life_service", "elderly_care", "diversity", "accessibility", "gini", "average"})
      write_text(dir / "plots" / (std::string(m) + ".svg"), bar_chart_svg(summary.reports, m));
  });
  return summary;
}

std::string inspect(const std::string& path) {
  const auto file = ckpt::read_checkpoint(path);
  std::ostringstream out;
  out << "kind: " << file.kind << "\n";
  out << "parameters: " << file.scalar_count("param") << "\n";
  out << "epoch: " << file.meta.value("epoch", 0) << "\n";
  out << "optimizer step: " << file.optimizer_step << "\n";
  if (file.config.contains("schedule")) out << "schedule: " << file.config["schedule"].dump() << "\n";
  if (file.config.contains("denoiser"))
    out << "config: " << file.config["denoiser"].dump() << "\n";
  else
    out << "config: " << file.config.dump() << "\n";
  if (file.meta.contains("loss_curve") && !file.meta["loss_curve"].empty())
    out << "last loss: " << file.meta["loss_curve"].back().get<double>() << "\n";
  return out.str();
}

}  // namespace fapcd::pipeline
