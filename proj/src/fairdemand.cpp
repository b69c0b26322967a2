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

#include "fapcd/fairdemand.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fapcd/checkpoint.hpp"
#include "fapcd/error.hpp"
#include "fapcd/nn.hpp"

namespace fapcd::fairdemand {

namespace {

std::vector<std::uint8_t> residence_mask_of(const FairDemandModel& model) {
  std::vector<std::uint8_t> mask(model.k_cat, 0);
  mask[model.residence_category] = 1;
  return mask;
}

Matrix query_input(const citygrid::RegionRecord& record, const FairDemandModel& model) {
  if (static_cast<int>(record.urban_attributes.size()) != model.attr_dim ||
      static_cast<int>(record.demand.size()) != model.k_cat)
    throw ShapeError("region " + std::to_string(record.region_id) +
                     ": attribute or demand length does not match the model");
  Matrix q(1, model.attr_dim + model.k_cat);
  for (int a = 0; a < model.attr_dim; ++a)
    q(0, a) = (record.urban_attributes[a] - model.attr_mean(0, a)) / model.attr_std(0, a);
  // Demand classes scaled to [0, 1].
  for (int k = 0; k < model.k_cat; ++k) q(0, model.attr_dim + k) = record.demand[k] / 3.0;
  return q;
}

void check_features(const citygrid::RegionRecord& record, const FairDemandModel& model) {
  if (record.grid_features.cols() != model.feature_dim || record.grid_features.rows() == 0)
    throw ShapeError("region " + std::to_string(record.region_id) +
                     ": grid features do not match the model");
}

}  // namespace

FairDemandModel init_model(const citygrid::Dataset& dataset, int d_h, std::uint64_t seed) {
  if (dataset.regions.empty()) throw InputError("fair-demand model needs a non-empty dataset");
  if (d_h < 1) throw ConfigError("d_h must be positive");
  FairDemandModel m;
  m.d_h = d_h;
  m.k_cat = dataset.k_cat();
  m.feature_dim = dataset.feature_dim;
  m.residence_category = dataset.residence();
  m.attr_mean = Matrix::Zero(1, m.attr_dim);
  m.attr_std = Matrix::Ones(1, m.attr_dim);
  const double n = static_cast<double>(dataset.regions.size());
  for (const auto& r : dataset.regions)
    for (int a = 0; a < m.attr_dim; ++a) m.attr_mean(0, a) += r.record.urban_attributes.at(a) / n;
  for (int a = 0; a < m.attr_dim; ++a) {
    double var = 0.0;
    for (const auto& r : dataset.regions)
      var += std::pow(r.record.urban_attributes[a] - m.attr_mean(0, a), 2) / n;
    m.attr_std(0, a) = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  Rng rng = make_rng(seed, 0xFA1D);
  m.params.add("w_q", nn::xavier_uniform(m.attr_dim + m.k_cat, d_h, rng));
  m.params.add("w_k", nn::xavier_uniform(m.feature_dim, d_h, rng));
  m.params.add("w_v", nn::xavier_uniform(m.feature_dim, d_h, rng));
  m.params.add("w_h", nn::xavier_uniform(d_h, d_h, rng));
  m.params.add("w_o", nn::xavier_uniform(d_h, m.k_cat, rng));
  m.w_f = nn::xavier_uniform(m.feature_dim, d_h, rng);
  return m;
}

AttentionResult demand_attention(const citygrid::RegionRecord& record,
                                 const citygrid::WalkingGraph& graph,
                                 const FairDemandModel& model) {
  check_features(record, model);
  if (record.grid_features.rows() != graph.node_count())
    throw ShapeError("region " + std::to_string(record.region_id) +
                     ": feature rows differ from node count");
  const Matrix q = query_input(record, model) * model.params.get("w_q").value;
  const Matrix k = record.grid_features * model.params.get("w_k").value;
  const Matrix v = record.grid_features * model.params.get("w_v").value;
  Matrix logits = q * k.transpose() / std::sqrt(static_cast<double>(model.d_h));
  const double mx = logits.maxCoeff();
  Matrix alpha = (logits.array() - mx).exp();
  alpha /= alpha.sum();
  AttentionResult out;
  out.pooled = alpha * v * model.params.get("w_h").value;
  out.alpha = std::move(alpha);
  out.h = out.pooled.replicate(graph.node_count(), 1);
  return out;
}

Matrix condition_embedding(const Matrix& h, const Matrix& f_proj) {
  if (h.rows() != f_proj.rows() || h.cols() != f_proj.cols())
    throw ShapeError("condition_embedding: H is " + std::to_string(h.rows()) + "x" +
                     std::to_string(h.cols()) + ", F_proj is " + std::to_string(f_proj.rows()) +
                     "x" + std::to_string(f_proj.cols()));
  return h.cwiseProduct(f_proj);
}

Matrix project_features(const citygrid::RegionRecord& record, const FairDemandModel& model) {
  check_features(record, model);
  return record.grid_features * model.w_f;
}

ad::Var region_logits(FairDemandModel& model, ad::Tape& tape,
                      const citygrid::RegionRecord& record) {
  check_features(record, model);
  auto& p = model.params;
  ad::Var q = ad::matmul(tape.constant(query_input(record, model)), tape.parameter(p.get("w_q")));
  ad::Var f = tape.constant(record.grid_features);
  ad::Var k = ad::matmul(f, tape.parameter(p.get("w_k")));
  ad::Var v = ad::matmul(f, tape.parameter(p.get("w_v")));
  ad::Var alpha =
      ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(model.d_h))));
  ad::Var h = ad::matmul(ad::matmul(alpha, v), tape.parameter(p.get("w_h")));
  return ad::matmul(h, tape.parameter(p.get("w_o")));
}

std::vector<std::uint8_t> facility_mask(const std::vector<std::uint8_t>& residence_mask) {
  std::vector<std::uint8_t> allowed(residence_mask.size());
  bool any = false;
  for (std::size_t k = 0; k < allowed.size(); ++k) {
    allowed[k] = residence_mask[k] ? 0 : 1;
    any = any || allowed[k];
  }
  if (!any) throw DegenerateError("fairness loss: every category is masked");
  return allowed;
}

ad::Var fairness_loss(const ad::Var& logits, const std::vector<std::uint8_t>& residence_mask) {
  if (static_cast<Eigen::Index>(residence_mask.size()) != logits.cols())
    throw ShapeError("fairness loss: mask length differs from logit width");
  if (logits.rows() < 1) throw InputError("fairness loss: empty batch");
  const auto allowed = facility_mask(residence_mask);
  ad::Var p = ad::softmax_rows(logits, allowed);
  ad::Var pbar = ad::row_normalize(ad::mean_rows(p));
  ad::Var e = ad::neg_xlogx(pbar);
  return ad::reciprocal(ad::add_scalar(ad::masked_min(e, allowed), 1.0));
}

double fairness_loss(const Matrix& logits, const std::vector<std::uint8_t>& residence_mask) {
  ad::Tape tape(false);
  return fairness_loss(tape.constant(logits), residence_mask).value()(0, 0);
}

Matrix category_entropy(const Matrix& logits, const std::vector<std::uint8_t>& residence_mask) {
  ad::Tape tape(false);
  const auto allowed = facility_mask(residence_mask);
  ad::Var p = ad::softmax_rows(tape.constant(logits), allowed);
  return ad::neg_xlogx(ad::row_normalize(ad::mean_rows(p))).value();
}

Matrix dataset_logits(const FairDemandModel& model, const citygrid::Dataset& dataset) {
  Matrix out(dataset.regions.size(), model.k_cat);
  auto& mut = const_cast<FairDemandModel&>(model);
  for (std::size_t r = 0; r < dataset.regions.size(); ++r) {
    ad::Tape tape(false);
    out.row(r) = region_logits(mut, tape, dataset.regions[r].record).value();
  }
  return out;
}

double min_category_entropy(const FairDemandModel& model, const citygrid::Dataset& dataset) {
  const auto mask = residence_mask_of(model);
  const Matrix e = category_entropy(dataset_logits(model, dataset), mask);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < model.k_cat; ++k)
    if (!mask[k]) best = std::min(best, e(0, k));
  return best;
}

PretrainLog pretrain(FairDemandModel& model, const citygrid::Dataset& dataset,
                     const PretrainConfig& config) {
  if (dataset.regions.empty()) throw InputError("pretrain on an empty dataset");
  if (config.epochs < 0 || config.batch < 1 || config.lr < 0.0)
    throw ConfigError("pretrain: epochs >= 0, batch >= 1 and lr >= 0 required");
  const auto mask = residence_mask_of(model);
  PretrainLog log;
  log.initial_loss = fairness_loss(dataset_logits(model, dataset), mask);
  log.initial_min_entropy = min_category_entropy(model, dataset);
  nn::Adam adam(model.params, nn::AdamConfig{config.lr, 0.9, 0.999, 1e-8, 0.0, 0.0});
  std::vector<std::size_t> order(dataset.regions.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(config.seed, 0xE90C, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t stop = std::min(order.size(), start + config.batch);
      model.params.zero_grad();
      ad::Tape tape;
      // Logits of the batch are stacked through a selection product so one
      // loss node sees every region.
      ad::Var logits;
      for (std::size_t b = start; b < stop; ++b) {
        ad::Var row = region_logits(model, tape, dataset.regions[order[b]].record);
        Matrix sel = Matrix::Zero(static_cast<Eigen::Index>(stop - start), 1);
        sel(static_cast<Eigen::Index>(b - start), 0) = 1.0;
        ad::Var placed = ad::matmul(tape.constant(sel), row);
        logits = logits.valid() ? ad::add(logits, placed) : placed;
      }
      ad::Var loss = fairness_loss(logits, mask);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value))
        throw TrainingError("fair-demand loss became non-finite at epoch " + std::to_string(epoch));
      tape.backward(loss);
      adam.step(model.params);
      sum += value;
      ++batches;
    }
    log.epoch_loss.push_back(sum / batches);
  }
  log.final_loss = fairness_loss(dataset_logits(model, dataset), mask);
  log.final_min_entropy = min_category_entropy(model, dataset);
  return log;
}

std::string to_string(ConditionView view) {
  return view == ConditionView::Full ? "full" : "template";
}

ConditionView condition_view_from_string(const std::string& name) {
  if (name == "full") return ConditionView::Full;
  if (name == "template") return ConditionView::Template;
  throw ConfigError("unknown condition view '" + name + "'");
}

sde::Conditioning build_conditioning(const FairDemandModel& model, const citygrid::Region& region,
                                     ConditionView view) {
  const auto att = demand_attention(region.record, region.graph, model);
  sde::Conditioning c;
  c.embedding = condition_embedding(att.h, project_features(region.record, model));
  if (view == ConditionView::Full) {
    c.graph = sde::make_condition_graph(region.graph, model.residence_category);
    return c;
  }
  const auto tmpl = citygrid::residence_template(region.graph, model.residence_category);
  for (int i = 0; i < tmpl.node_count; ++i)
    if (!tmpl.is_residence[i]) c.embedding.row(i).setZero();
  const int placeholder = model.residence_category == 0 ? 1 : 0;
  c.graph = sde::make_condition_graph(citygrid::template_graph(tmpl, placeholder),
                                      model.residence_category);
  return c;
}

std::vector<sde::Conditioning> build_conditioning(const FairDemandModel& model,
                                                  const citygrid::Dataset& dataset,
                                                  ConditionView view) {
  std::vector<sde::Conditioning> out;
  out.reserve(dataset.regions.size());
  for (const auto& r : dataset.regions) out.push_back(build_conditioning(model, r, view));
  return out;
}

void save_model(const std::string& path, const FairDemandModel& model, const PretrainLog* log) {
  ckpt::CheckpointFile file;
  file.kind = "fairdemand";
  file.config = {{"d_h", model.d_h},
                 {"k_cat", model.k_cat},
                 {"attr_dim", model.attr_dim},
                 {"feature_dim", model.feature_dim},
                 {"residence_category", model.residence_category}};
  if (log) {
    file.meta = {{"epoch", log->epoch_loss.size()},
                 {"loss_curve", log->epoch_loss},
                 {"initial_loss", log->initial_loss},
                 {"final_loss", log->final_loss},
                 {"initial_min_entropy", log->initial_min_entropy},
                 {"final_min_entropy", log->final_min_entropy}};
  } else {
    file.meta = {{"epoch", 0}};
  }
  ckpt::store_parameters(file, model.params);
  file.tensors.push_back({"frozen", "w_f", model.w_f});
  file.tensors.push_back({"frozen", "attr_mean", model.attr_mean});
  file.tensors.push_back({"frozen", "attr_std", model.attr_std});
  ckpt::write_checkpoint(path, file);
}

FairDemandModel load_model(const std::string& path) {
  const auto file = ckpt::read_checkpoint(path);
  if (file.kind != "fairdemand")
    throw FormatError(path + ": expected a fairdemand checkpoint, found " + file.kind);
  FairDemandModel m;
  try {
    m.d_h = file.config.at("d_h").get<int>();
    m.k_cat = file.config.at("k_cat").get<int>();
    m.attr_dim = file.config.at("attr_dim").get<int>();
    m.feature_dim = file.config.at("feature_dim").get<int>();
    m.residence_category = file.config.at("residence_category").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  for (const char* name : {"w_q", "w_k", "w_v", "w_h", "w_o"})
    m.params.add(name, file.get("param", name));
  m.w_f = file.get("frozen", "w_f");
  m.attr_mean = file.get("frozen", "attr_mean");
  m.attr_std = file.get("frozen", "attr_std");
  return m;
}

}  // namespace fapcd::fairdemand
