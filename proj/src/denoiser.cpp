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

#include "fapcd/denoiser.hpp"

#include <cmath>

#include "fapcd/error.hpp"

namespace fapcd::denoiser {

using nlohmann::json;

void DenoiserConfig::validate() const {
  if (layers < 0) throw ConfigError("layers must be >= 0");
  if (d_hidden < 4 || heads < 1 || d_hidden % heads != 0)
    throw ConfigError("d_hidden must be >= 4 and divisible by heads");
  if (m_walk < 1) throw ConfigError("m_walk must be >= 1");
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0)
    throw ConfigError("time_embed_dim must be even and >= 2");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (k_cat < 2 || cond_dim < 1) throw ConfigError("k_cat >= 2 and cond_dim >= 1 required");
}

json config_to_json(const DenoiserConfig& c) {
  return {{"layers", c.layers},   {"d_hidden", c.d_hidden},
          {"heads", c.heads},     {"m_walk", c.m_walk},
          {"time_embed_dim", c.time_embed_dim}, {"dropout", c.dropout},
          {"k_cat", c.k_cat},     {"cond_dim", c.cond_dim}};
}

DenoiserConfig config_from_json(const json& j) {
  DenoiserConfig c;
  c.layers = j.value("layers", c.layers);
  c.d_hidden = j.value("d_hidden", c.d_hidden);
  c.heads = j.value("heads", c.heads);
  c.m_walk = j.value("m_walk", c.m_walk);
  c.time_embed_dim = j.value("time_embed_dim", c.time_embed_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.k_cat = j.value("k_cat", c.k_cat);
  c.cond_dim = j.value("cond_dim", c.cond_dim);
  return c;
}

json schedule_to_json(const sde::NoiseSchedule& s) {
  return {{"kind", sde::to_string(s.kind)}, {"beta_min", s.beta_min},
          {"beta_max", s.beta_max},         {"cosine_s", s.cosine_s},
          {"cosine_t_max", s.cosine_t_max}, {"steps", s.steps}};
}

sde::NoiseSchedule schedule_from_json(const json& j) {
  sde::NoiseSchedule s;
  s.kind = sde::schedule_kind_from_string(j.value("kind", std::string("cosine")));
  s.beta_min = j.value("beta_min", s.beta_min);
  s.beta_max = j.value("beta_max", s.beta_max);
  s.cosine_s = j.value("cosine_s", s.cosine_s);
  s.cosine_t_max = j.value("cosine_t_max", s.cosine_t_max);
  s.steps = j.value("steps", s.steps);
  return s;
}

BinaryMatrix binarize(const Matrix& a_t, double alpha_t, double threshold) {
  const auto n = a_t.rows();
  BinaryMatrix out = BinaryMatrix::Zero(n, n);
  const double cut = threshold * alpha_t;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && 0.5 * (a_t(i, j) + a_t(j, i)) > cut) out(i, j) = 1;
  return out;
}

Eigen::VectorXd closeness_centrality(const kernels::HopMatrix& hops) {
  const auto n = hops.rows();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  if (n < 2) return c;
  for (Eigen::Index i = 0; i < n; ++i) {
    double reach = 0.0;
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i && hops(i, j) > 0) {
        reach += 1.0;
        total += hops(i, j);
      }
    if (reach > 0.0) c(i) = (reach / total) * (reach / static_cast<double>(n - 1));
  }
  return c;
}

AugmentedGraph augment(const sde::NoisySample& sample, const BinaryMatrix& condition_graph,
                       double alpha_t, const DenoiserConfig& config) {
  const auto n = sample.x_t.rows();
  if (sample.x_t.cols() != config.k_cat) throw ShapeError("augment: X_t width differs from K");
  if (sample.a_t.rows() != n || sample.a_t.cols() != n || condition_graph.rows() != n ||
      condition_graph.cols() != n)
    throw ShapeError("augment: adjacency shapes differ from node count");
  const int m = config.m_walk;
  AugmentedGraph out;
  out.a_hat = binarize(sample.a_t, alpha_t);
  const Matrix ret = kernels::return_probabilities(out.a_hat, m);
  const kernels::HopMatrix hops = kernels::shortest_paths(out.a_hat);
  const Eigen::VectorXd close = closeness_centrality(hops);

  out.node_feats.resize(n, config.node_input_dim());
  out.node_feats.leftCols(config.k_cat) = sample.x_t;
  out.node_feats.middleCols(config.k_cat, m) = ret;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.node_feats(i, config.k_cat + m) =
        out.a_hat.row(i).cast<double>().sum() / static_cast<double>(n);
    out.node_feats(i, config.k_cat + m + 1) = close(i);
  }

  out.edge_feats = Matrix::Zero(n * n, config.edge_input_dim());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index r = i * n + j;
      out.edge_feats(r, 0) = i == j ? 0.0 : 0.5 * (sample.a_t(i, j) + sample.a_t(j, i));
      const int hop = hops(i, j);
      const int bucket = hop < 0 ? m + 1 : std::min(hop, m);
      out.edge_feats(r, 1 + bucket) = 1.0;
      out.edge_feats(r, m + 3) = (condition_graph(i, j) || condition_graph(j, i)) ? 1.0 : 0.0;
    }
  return out;
}

Matrix time_sinusoid(double t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw ConfigError("sinusoid width must be even");
  const int half = dim / 2;
  Matrix out(1, dim);
  for (int i = 0; i < half; ++i) {
    const double w = std::exp(-std::log(10000.0) * i / half);
    out(0, i) = std::sin(1000.0 * t * w);
    out(0, half + i) = std::cos(1000.0 * t * w);
  }
  return out;
}

namespace {

std::string lname(int layer, const char* part) {
  return "layer" + std::to_string(layer) + "." + part;
}

ad::Var linear(DenoiserModel& m, ad::Tape& tape, const std::string& name, const ad::Var& x,
               bool bias = true) {
  return nn::Linear{name, bias}(m.params, tape, x);
}

ad::Var mlp(DenoiserModel& m, ad::Tape& tape, const std::string& name, const ad::Var& x) {
  return nn::Mlp{nn::Linear{name + ".0", true}, nn::Linear{name + ".1", true}}(m.params, tape, x);
}

ad::Var norm(DenoiserModel& m, ad::Tape& tape, const std::string& name, const ad::Var& x) {
  return nn::LayerNorm{name}(m.params, tape, x);
}

ad::Var head(DenoiserModel& m, ad::Tape& tape, const std::string& name, const ad::Var& x) {
  ad::Var z = ad::silu(mlp(m, tape, name + ".mlp", x));
  z = ad::silu(linear(m, tape, name + ".c0", z));
  z = ad::silu(linear(m, tape, name + ".c1", z));
  return linear(m, tape, name + ".c2", z);
}

ad::Var maybe_dropout(const ad::Var& x, double p, Rng* rng) {
  return rng && p > 0.0 ? ad::dropout(x, p, *rng) : x;
}

// D^{-1/2} (Â + I) D^{-1/2}
Matrix gcn_operator(const BinaryMatrix& a_hat) {
  Matrix s = a_hat.cast<double>();
  s.diagonal().array() += 1.0;
  const Eigen::VectorXd inv = s.rowwise().sum().array().rsqrt();
  return inv.asDiagonal() * s * inv.asDiagonal();
}

}  // namespace

DenoiserModel build_model(const DenoiserConfig& config, const sde::NoiseSchedule& schedule,
                          std::uint64_t seed) {
  config.validate();
  DenoiserModel m;
  m.config = config;
  m.schedule = schedule;
  Rng rng = make_rng(seed, 0xDE70);
  auto& p = m.params;
  const int d = config.d_hidden;
  const int d2 = d / 2;
  const int d4 = d / 4;
  nn::Linear::create(p, "in.node", config.node_input_dim(), d, rng);
  nn::Linear::create(p, "in.cond", config.cond_dim, d, rng);
  nn::Linear::create(p, "in.edge", config.edge_input_dim(), d, rng);
  nn::Linear::create(p, "time.fc0", config.time_embed_dim, d, rng);
  nn::Linear::create(p, "time.fc1", d, d, rng);
  for (int l = 0; l < config.layers; ++l) {
    nn::Linear::create(p, lname(l, "time"), d, d, rng);
    for (const char* part : {"q", "k", "v", "g0", "g1", "o"})
      nn::Linear::create(p, lname(l, part), d, d, rng);
    nn::LayerNorm::create(p, lname(l, "ln_gtb"), d);
    nn::Linear::create(p, lname(l, "mp_node"), d, d, rng, false);
    nn::Linear::create(p, lname(l, "mp_edge"), d, d, rng, false);
    p.add(lname(l, "mp_bias"), Matrix::Zero(1, d));
    nn::Mlp::create(p, lname(l, "mp_ffn"), d, d, d, rng);
    nn::LayerNorm::create(p, lname(l, "ln_mpb"), d);
    nn::Mlp::create(p, lname(l, "edge_ffn"), d, d, d, rng);
    nn::LayerNorm::create(p, lname(l, "ln_edge"), d);
    nn::Mlp::create(p, lname(l, "fuse_ffn"), d, d, d, rng);
    nn::LayerNorm::create(p, lname(l, "ln_fuse"), d);
  }
  for (const char* h : {"head.node", "head.edge"}) {
    const std::string name(h);
    nn::Mlp::create(p, name + ".mlp", d, d, d, rng);
    nn::Linear::create(p, name + ".c0", d, d2, rng);
    nn::Linear::create(p, name + ".c1", d2, d4, rng);
    nn::Linear::create(p, name + ".c2", d4, name == "head.node" ? config.k_cat : 1, rng);
  }
  return m;
}

ad::Var time_embedding(DenoiserModel& model, ad::Tape& tape, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("time embedding needs t in [0, 1]");
  ad::Var code = tape.constant(time_sinusoid(t, model.config.time_embed_dim));
  return linear(model, tape, "time.fc1", ad::silu(linear(model, tape, "time.fc0", code)));
}

ad::Var gtb_forward(DenoiserModel& model, ad::Tape& tape, int l, const LayerState& in) {
  ad::Var q = linear(model, tape, lname(l, "q"), in.h);
  ad::Var k = linear(model, tape, lname(l, "k"), in.h);
  ad::Var v = linear(model, tape, lname(l, "v"), in.h);
  ad::Var g0 = ad::tanh(linear(model, tape, lname(l, "g0"), in.e));
  ad::Var g1 = ad::tanh(linear(model, tape, lname(l, "g1"), in.e));
  ad::Var att = ad::edge_attention(q, k, v, g0, g1, model.config.heads);
  return norm(model, tape, lname(l, "ln_gtb"), ad::add(in.h, linear(model, tape, lname(l, "o"), att)));
}

LayerState mpb_forward(DenoiserModel& model, ad::Tape& tape, int l, const LayerState& in,
                       const BinaryMatrix& a_hat) {
  const Matrix s = gcn_operator(a_hat);
  ad::Var hbar = ad::add(ad::matmul(tape.constant(s), linear(model, tape, lname(l, "mp_node"), in.h, false)),
                         ad::edge_aggregate(s, linear(model, tape, lname(l, "mp_edge"), in.e, false)));
  hbar = ad::add_row(hbar, tape.parameter(model.params.get(lname(l, "mp_bias"))));
  LayerState out;
  out.h = norm(model, tape, lname(l, "ln_mpb"), ad::add(hbar, mlp(model, tape, lname(l, "mp_ffn"), hbar)));
  out.e = norm(model, tape, lname(l, "ln_edge"),
               ad::add(in.e, mlp(model, tape, lname(l, "edge_ffn"), ad::pair_sum(hbar))));
  return out;
}

NoiseOutput forward(DenoiserModel& model, ad::Tape& tape, const sde::NoisySample& sample,
                    const sde::Conditioning& condition, Rng* dropout_rng) {
  const auto& cfg = model.config;
  const auto n = sample.x_t.rows();
  if (n < 1) throw ShapeError("denoiser needs at least one node");
  if (condition.embedding.rows() != n || condition.embedding.cols() != cfg.cond_dim)
    throw ConfigError("condition embedding is " + std::to_string(condition.embedding.rows()) + "x" +
                      std::to_string(condition.embedding.cols()) + ", model expects " +
                      std::to_string(n) + "x" + std::to_string(cfg.cond_dim));
  const double alpha_t = model.schedule.alpha(sample.t);
  const AugmentedGraph aug = augment(sample, condition.graph, alpha_t, cfg);

  ad::Var temb = time_embedding(model, tape, sample.t);
  ad::Var h = ad::add(linear(model, tape, "in.node", tape.constant(aug.node_feats)),
                      linear(model, tape, "in.cond", tape.constant(condition.embedding)));
  h = ad::add(h, ad::broadcast_rows(temb, n));
  ad::Var e = linear(model, tape, "in.edge", tape.constant(aug.edge_feats));

  ad::Var h_sum = h;
  ad::Var e_sum = e;
  ad::Var temb_act = ad::silu(temb);
  for (int l = 0; l < cfg.layers; ++l) {
    LayerState in{ad::add(h, ad::broadcast_rows(linear(model, tape, lname(l, "time"), temb_act), n)), e};
    ad::Var h_gtb = gtb_forward(model, tape, l, in);
    LayerState mp = mpb_forward(model, tape, l, in, aug.a_hat);
    ad::Var x = ad::add(h_gtb, mp.h);
    h = norm(model, tape, lname(l, "ln_fuse"), ad::add(x, mlp(model, tape, lname(l, "fuse_ffn"), x)));
    h = maybe_dropout(h, cfg.dropout, dropout_rng);
    e = maybe_dropout(mp.e, cfg.dropout, dropout_rng);
    h_sum = ad::add(h_sum, h);
    e_sum = ad::add(e_sum, e);
  }
  NoiseOutput out;
  out.eps_x = head(model, tape, "head.node", h_sum);
  out.eps_a = ad::symmetrize_pairs(head(model, tape, "head.edge", e_sum), n);
  return out;
}

sde::NoisePrediction predict_noise(const DenoiserModel& model, const sde::NoisySample& sample,
                                   const sde::Conditioning& condition) {
  ad::Tape tape(false);
  auto out = forward(const_cast<DenoiserModel&>(model), tape, sample, condition, nullptr);
  return {out.eps_x.value(), out.eps_a.value()};
}

sde::NoisePredictor as_predictor(const DenoiserModel& model) {
  return [&model](const sde::NoisySample& s, const sde::Conditioning& c) {
    return predict_noise(model, s, c);
  };
}

ad::Var sample_loss(DenoiserModel& model, ad::Tape& tape, const sde::NoisySample& sample,
                    const sde::Conditioning& condition, Rng* dropout_rng) {
  NoiseOutput out = forward(model, tape, sample, condition, dropout_rng);
  const auto n = sample.x_t.rows();
  ad::Var lx = ad::weighted_square_error(out.eps_x, sample.eps_x,
                                         Matrix::Ones(n, model.config.k_cat));
  ad::Var la = ad::weighted_square_error(out.eps_a, sample.eps_a, sde::edge_loss_weights(n));
  return ad::add(lx, la);
}

}  // namespace fapcd::denoiser
