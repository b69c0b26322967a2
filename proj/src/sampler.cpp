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

#include "fapcd/sampler.hpp"

#include <cmath>

#include "fapcd/error.hpp"

namespace fapcd::sampler {

std::string to_string(Method method) {
  return method == Method::Dpm3 ? "dpm3" : "euler-maruyama";
}

Method method_from_string(const std::string& name) {
  if (name == "dpm3") return Method::Dpm3;
  if (name == "euler-maruyama" || name == "em") return Method::EulerMaruyama;
  throw ConfigError("unknown sampler method '" + name + "'");
}

void SamplerConfig::validate() const {
  if (steps < 10) throw ConfigError("sampler steps must be >= 10");
  if (!(decode_threshold > 0.0 && decode_threshold < 1.0))
    throw ConfigError("decode threshold must lie in (0, 1)");
  if (!(t_eps > 0.0 && t_eps < 0.5)) throw ConfigError("t_eps must lie in (0, 0.5)");
}

Clamp residence_clamp(const citygrid::ResidenceTemplate& tmpl, int k_cat) {
  const int n = tmpl.node_count;
  Clamp c;
  c.node = tmpl.is_residence;
  c.edge = BinaryMatrix::Zero(n, n);
  c.x0 = Matrix::Zero(n, k_cat);
  c.a0 = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (!tmpl.is_residence[i]) continue;
    c.x0(i, tmpl.residence_category) = 1.0;
    for (int j = 0; j < n; ++j)
      if (j != i && tmpl.is_residence[j]) {
        c.edge(i, j) = 1;
        c.a0(i, j) = tmpl.adjacency(i, j);
      }
  }
  return c;
}

namespace {

struct Noise {
  Matrix x;
  Matrix a;
};

void apply_clamp(GraphState& s, const Clamp& clamp, double alpha, double sigma, const Noise& z) {
  if (clamp.empty()) return;
  const auto n = s.x.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (clamp.node[i]) s.x.row(i) = alpha * clamp.x0.row(i) + sigma * z.x.row(i);
    for (Eigen::Index j = 0; j < n; ++j)
      if (clamp.edge(i, j)) s.a(i, j) = alpha * clamp.a0(i, j) + sigma * z.a(i, j);
  }
}

void check_finite(const GraphState& s, int step) {
  if (!s.x.allFinite() || !s.a.allFinite())
    throw SamplingError(step, "non-finite state during reverse integration");
}

sde::NoisePrediction eval(const sde::NoisePredictor& predictor, const GraphState& s, double t,
                          const sde::Conditioning& condition, int step) {
  sde::NoisySample sample;
  sample.x_t = s.x;
  sample.a_t = s.a;
  sample.t = t;
  sde::NoisePrediction p = predictor(sample, condition);
  if (p.eps_x.rows() != s.x.rows() || p.eps_x.cols() != s.x.cols() ||
      p.eps_a.rows() != s.a.rows() || p.eps_a.cols() != s.a.cols())
    throw SamplingError(step, "noise prediction has the wrong shape");
  if (!p.eps_x.allFinite() || !p.eps_a.allFinite())
    throw SamplingError(step, "non-finite noise prediction");
  return p;
}

// x_t = (alpha_t/alpha_s) x_s - sigma_t (e^h - 1) eps_s - corr
GraphState first_order(const GraphState& s, const sde::NoisePrediction& e, double ratio,
                       double coef) {
  return {ratio * s.x - coef * e.eps_x, ratio * s.a - coef * e.eps_a};
}

void add_scaled_diff(GraphState& s, double c, const sde::NoisePrediction& a,
                     const sde::NoisePrediction& b) {
  s.x -= c * (a.eps_x - b.eps_x);
  s.a -= c * (a.eps_a - b.eps_a);
}

void zero_diagonal(GraphState& s) { s.a.diagonal().setZero(); }

GraphState dpm3_integrate(const sde::NoisePredictor& predictor, const sde::NoiseSchedule& sch,
                          const sde::Conditioning& condition, GraphState x, const Clamp& clamp,
                          const SamplerConfig& config, const Noise& z) {
  const Dpm3Plan plan = dpm3_plan(sch, config.steps, config.t_eps);
  auto stage = [&](double t) {
    return std::pair{sch.alpha(t), sch.sigma(t)};
  };
  int nfe = 0;
  for (std::size_t k = 0; k < plan.orders.size(); ++k) {
    const double s = plan.times[k];
    const double t = plan.times[k + 1];
    const double ls = sch.lambda(s);
    const double h = sch.lambda(t) - ls;
    const auto [as, ss] = stage(s);
    const auto [at, st] = stage(t);
    (void)ss;
    const auto e0 = eval(predictor, x, s, condition, nfe++);
    const int order = plan.orders[k];
    GraphState next;
    if (order == 1) {
      next = first_order(x, e0, at / as, st * std::expm1(h));
    } else if (order == 2) {
      const double r1 = 0.5;
      const double s1 = sch.t_of_lambda(ls + r1 * h);
      const auto [a1, sg1] = stage(s1);
      GraphState x1 = first_order(x, e0, a1 / as, sg1 * std::expm1(r1 * h));
      zero_diagonal(x1);
      apply_clamp(x1, clamp, a1, sg1, z);
      const auto e1 = eval(predictor, x1, s1, condition, nfe++);
      next = first_order(x, e0, at / as, st * std::expm1(h));
      add_scaled_diff(next, st / (2.0 * r1) * std::expm1(h), e1, e0);
    } else {
      const double r1 = 1.0 / 3.0;
      const double r2 = 2.0 / 3.0;
      const double s1 = sch.t_of_lambda(ls + r1 * h);
      const double s2 = sch.t_of_lambda(ls + r2 * h);
      const auto [a1, sg1] = stage(s1);
      const auto [a2, sg2] = stage(s2);
      GraphState x1 = first_order(x, e0, a1 / as, sg1 * std::expm1(r1 * h));
      zero_diagonal(x1);
      apply_clamp(x1, clamp, a1, sg1, z);
      const auto e1 = eval(predictor, x1, s1, condition, nfe++);
      GraphState x2 = first_order(x, e0, a2 / as, sg2 * std::expm1(r2 * h));
      add_scaled_diff(x2, sg2 * r2 / r1 * (std::expm1(r2 * h) / (r2 * h) - 1.0), e1, e0);
      zero_diagonal(x2);
      apply_clamp(x2, clamp, a2, sg2, z);
      const auto e2 = eval(predictor, x2, s2, condition, nfe++);
      next = first_order(x, e0, at / as, st * std::expm1(h));
      add_scaled_diff(next, st / r2 * (std::expm1(h) / h - 1.0), e2, e0);
    }
    zero_diagonal(next);
    apply_clamp(next, clamp, at, st, z);
    check_finite(next, nfe);
    x = std::move(next);
  }
  return x;
}

GraphState em_integrate(const sde::NoisePredictor& predictor, const sde::NoiseSchedule& sch,
                        const sde::Conditioning& condition, GraphState x, const Clamp& clamp,
                        const SamplerConfig& config, Rng& rng) {
  const double t0 = sch.t_end();
  const double dt = (t0 - config.t_eps) / config.steps;
  const auto n = x.x.rows();
  const auto k = x.x.cols();
  for (int i = 0; i < config.steps; ++i) {
    const double t = t0 - i * dt;
    const double beta = sch.beta(t);
    const double sigma = sch.sigma(t);
    const auto e = eval(predictor, x, t, condition, i);
    // score = -eps / sigma
    x.x += dt * (0.5 * beta * x.x - beta / sigma * e.eps_x);
    x.a += dt * (0.5 * beta * x.a - beta / sigma * e.eps_a);
    if (i + 1 < config.steps) {
      const double g = std::sqrt(beta * dt);
      x.x += g * standard_normal(rng, n, k);
      x.a += g * sde::symmetric_noise(n, rng);
    }
    zero_diagonal(x);
    const double tn = t - dt;
    if (!clamp.empty()) {
      Noise z{standard_normal(rng, n, k), sde::symmetric_noise(n, rng)};
      apply_clamp(x, clamp, sch.alpha(tn), sch.sigma(tn), z);
    }
    check_finite(x, i);
  }
  return x;
}

}  // namespace

Dpm3Plan dpm3_plan(const sde::NoiseSchedule& schedule, int nfe, double t_eps) {
  if (nfe < 1) throw ConfigError("dpm3 needs at least one evaluation");
  Dpm3Plan plan;
  plan.orders.assign(nfe / 3, 3);
  if (nfe % 3) plan.orders.push_back(nfe % 3);
  const std::size_t m = plan.orders.size();
  const double l0 = schedule.lambda(schedule.t_end());
  const double l1 = schedule.lambda(t_eps);
  for (std::size_t i = 0; i <= m; ++i) {
    const double lam = l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(m);
    plan.times.push_back(i == 0 ? schedule.t_end() : i == m ? t_eps : schedule.t_of_lambda(lam));
  }
  return plan;
}

GraphState integrate(const sde::NoisePredictor& predictor, const sde::NoiseSchedule& schedule,
                     const sde::Conditioning& condition, GraphState start, const Clamp& clamp,
                     const SamplerConfig& config, Rng& rng) {
  config.validate();
  const auto n = start.x.rows();
  const auto k = start.x.cols();
  if (start.a.rows() != n || start.a.cols() != n) throw ShapeError("sampler: bad start state");
  if (!clamp.empty() && (static_cast<Eigen::Index>(clamp.node.size()) != n ||
                         clamp.x0.cols() != k))
    throw ShapeError("sampler: clamp does not match the state");
  start.a.diagonal().setZero();
  if (config.method == Method::Dpm3) {
    Noise z;
    if (!clamp.empty()) z = {standard_normal(rng, n, k), sde::symmetric_noise(n, rng)};
    const double t0 = schedule.t_end();
    apply_clamp(start, clamp, schedule.alpha(t0), schedule.sigma(t0), z);
    return dpm3_integrate(predictor, schedule, condition, std::move(start), clamp, config, z);
  }
  if (!clamp.empty()) {
    Noise z{standard_normal(rng, n, k), sde::symmetric_noise(n, rng)};
    const double t0 = schedule.t_end();
    apply_clamp(start, clamp, schedule.alpha(t0), schedule.sigma(t0), z);
  }
  return em_integrate(predictor, schedule, condition, std::move(start), clamp, config, rng);
}

citygrid::WalkingGraph decode_graph(const Matrix& x, const Matrix& a, double threshold, int n_max,
                                    const std::vector<std::uint8_t>& allowed) {
  const auto n = x.rows();
  if (a.rows() != n || a.cols() != n) throw ShapeError("decode: adjacency shape differs");
  if (!x.allFinite() || !a.allFinite()) throw InputError("decode: non-finite tensors");
  citygrid::WalkingGraph g;
  g.n_max = n_max;
  g.categories.resize(n);
  g.positions.assign(n, citygrid::Point{});
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = -1;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (!allowed.empty() && !allowed[c]) continue;
      if (best < 0 || x(i, c) > x(i, best)) best = static_cast<int>(c);
    }
    g.categories[i] = best;
  }
  g.adjacency = BinaryMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (0.5 * (a(i, j) + a(j, i)) > threshold) g.adjacency(i, j) = g.adjacency(j, i) = 1;
  return g;
}

std::vector<citygrid::Point> place_nodes(const citygrid::WalkingGraph& graph,
                                         const citygrid::ResidenceTemplate& tmpl,
                                         double grid_size_m) {
  const int n = graph.node_count();
  std::vector<citygrid::Point> pos(n);
  for (int i = 0; i < n; ++i) {
    if (tmpl.is_residence[i]) {
      pos[i] = tmpl.positions[i];
      continue;
    }
    double sx = 0, sy = 0, cnt = 0;
    for (int j = 0; j < n; ++j)
      if (graph.adjacency(i, j) && tmpl.is_residence[j]) {
        sx += tmpl.positions[j].x_m;
        sy += tmpl.positions[j].y_m;
        cnt += 1;
      }
    if (cnt > 0)
      pos[i] = {sx / cnt, sy / cnt};
    else
      pos[i] = {0.5 * grid_size_m, 0.5 * grid_size_m};
  }
  // Facilities linked only to other facilities take their neighbours' mean.
  for (int i = 0; i < n; ++i) {
    if (tmpl.is_residence[i]) continue;
    bool has_res = false;
    double sx = 0, sy = 0, cnt = 0;
    for (int j = 0; j < n; ++j)
      if (graph.adjacency(i, j)) {
        has_res = has_res || tmpl.is_residence[j];
        sx += pos[j].x_m;
        sy += pos[j].y_m;
        cnt += 1;
      }
    if (!has_res && cnt > 0) pos[i] = {sx / cnt, sy / cnt};
  }
  return pos;
}

citygrid::WalkingGraph sample(const sde::NoisePredictor& predictor,
                              const sde::NoiseSchedule& schedule,
                              const sde::Conditioning& condition,
                              const citygrid::ResidenceTemplate& tmpl, int k_cat,
                              const SamplerConfig& config, Rng& rng) {
  config.validate();
  const int n = tmpl.node_count;
  GraphState start{standard_normal(rng, n, k_cat), sde::symmetric_noise(n, rng)};
  const Clamp clamp = config.clamp_residences ? residence_clamp(tmpl, k_cat) : Clamp{};
  const GraphState end = integrate(predictor, schedule, condition, std::move(start), clamp, config, rng);
  std::vector<std::uint8_t> allowed;
  if (config.clamp_residences) {
    allowed.assign(k_cat, 1);
    allowed[tmpl.residence_category] = 0;
  }
  citygrid::WalkingGraph g = decode_graph(end.x, end.a, config.decode_threshold, tmpl.n_max, allowed);
  if (config.clamp_residences) {
    for (int i = 0; i < n; ++i) {
      if (!tmpl.is_residence[i]) continue;
      g.categories[i] = tmpl.residence_category;
      for (int j = 0; j < n; ++j)
        if (tmpl.is_residence[j]) g.adjacency(i, j) = tmpl.adjacency(i, j);
    }
  }
  return g;
}

Generation generate_for_dataset(const sde::NoisePredictor& predictor,
                                const sde::NoiseSchedule& schedule,
                                const citygrid::Dataset& dataset,
                                const std::vector<sde::Conditioning>& conditions,
                                const SamplerConfig& config, std::uint64_t seed,
                                const std::string& checkpoint_label) {
  config.validate();
  if (conditions.size() != dataset.regions.size())
    throw ConfigError("generation needs one condition embedding per region (" +
                      std::to_string(conditions.size()) + " for " +
                      std::to_string(dataset.regions.size()) + " regions)");
  Generation out;
  out.dataset = dataset;
  out.provenance.resize(dataset.regions.size());
  const int res = dataset.residence();
  const int count = static_cast<int>(dataset.regions.size());
  for (int r = 0; r < count; ++r)
    if (conditions[r].embedding.rows() != dataset.regions[r].graph.node_count())
      throw ConfigError("condition embedding for region " +
                        std::to_string(dataset.regions[r].record.region_id) +
                        " has the wrong row count");
  std::vector<std::string> errors(count);
  std::vector<int> failed_step(count, -1);
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < count; ++r) {
    try {
      const auto& region = dataset.regions[r];
      const auto tmpl = citygrid::residence_template(region.graph, res);
      const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(region.record.region_id));
      Rng rng(s);
      citygrid::WalkingGraph g =
          sample(predictor, schedule, conditions[r], tmpl, dataset.k_cat(), config, rng);
      g.positions = place_nodes(g, tmpl, dataset.grid_size_m);
      out.dataset.regions[r].graph = std::move(g);
      out.provenance[r] = {to_string(config.method), s, config.steps, checkpoint_label};
    } catch (const SamplingError& e) {
      errors[r] = e.what();
      failed_step[r] = e.step();
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  }
  for (int r = 0; r < count; ++r)
    if (!errors[r].empty())
      throw SamplingError(failed_step[r], "region " +
                                              std::to_string(dataset.regions[r].record.region_id) +
                                              ": " + errors[r]);
  return out;
}

}  // namespace fapcd::sampler
