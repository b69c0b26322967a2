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

#include <cmath>

#include "doctest.h"

#include "fapcd/error.hpp"
#include "fapcd/sampler.hpp"

using namespace fapcd;
using namespace fapcd::sampler;

namespace {

sde::NoisePredictor zero_predictor() {
  return [](const sde::NoisySample& s, const sde::Conditioning&) {
    return sde::NoisePrediction{Matrix::Zero(s.x_t.rows(), s.x_t.cols()),
                                Matrix::Zero(s.a_t.rows(), s.a_t.cols())};
  };
}

// Exact epsilon for data x0 ~ N(mu, s^2) entrywise.
struct GaussianTarget {
  sde::NoiseSchedule schedule;
  Matrix mu_x, mu_a;
  double s = 0.5;

  double var(double t) const {
    const double a = schedule.alpha(t), g = schedule.sigma(t);
    return a * a * s * s + g * g;
  }
  sde::NoisePredictor predictor() const {
    return [this](const sde::NoisySample& x, const sde::Conditioning&) {
      const double a = schedule.alpha(x.t), g = schedule.sigma(x.t), v = var(x.t);
      Matrix ea = g * (x.a_t - a * mu_a) / v;
      ea.diagonal().setZero();
      return sde::NoisePrediction{g * (x.x_t - a * mu_x) / v, ea};
    };
  }
  // Probability-flow solution from t0 to t1 for one entry.
  double flow(double x, double mu, double t0, double t1) const {
    return schedule.alpha(t1) * mu +
           std::sqrt(var(t1) / var(t0)) * (x - schedule.alpha(t0) * mu);
  }
};

citygrid::ResidenceTemplate small_template(Rng& rng) {
  citygrid::GeneratorConfig g;
  g.regions = 1;
  const auto ds = citygrid::generate_synthetic_city(g, rng());
  return citygrid::residence_template(ds.regions[0].graph, ds.residence());
}

sde::Conditioning empty_condition(int n) {
  return {Matrix::Zero(n, 4), BinaryMatrix::Zero(n, n)};
}

}  // namespace

TEST_CASE("decode examples") {
  Matrix x = Matrix::Zero(3, 4);
  x(0, 2) = 1.0;
  x(1, 1) = 1.0;
  x(2, 3) = 0.7;
  x(2, 0) = 0.7;
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = 0.6;
  a(1, 0) = 0.5;
  a(1, 2) = 0.5;
  a(2, 1) = 0.5;
  a(0, 0) = 9.0;
  const auto g = decode_graph(x, a, 0.5, 64);
  CHECK(g.categories == std::vector<int>{2, 1, 0});
  CHECK(g.adjacency(0, 1) == 1);
  CHECK(g.adjacency(1, 0) == 1);
  CHECK(g.adjacency(1, 2) == 0);
  CHECK(g.adjacency(0, 0) == 0);
  CHECK(decode_graph(x, Matrix::Constant(3, 3, 0.2), 0.5, 64).adjacency.cast<int>().sum() == 0);
  const auto restricted = decode_graph(x, a, 0.5, 64, {0, 1, 1, 1});
  CHECK(restricted.categories[2] == 3);
  CHECK_THROWS_AS(decode_graph(x, Matrix::Zero(2, 2), 0.5, 64), ShapeError);
}

TEST_CASE("config validation") {
  SamplerConfig c;
  c.steps = 9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.steps = 10;
  c.decode_threshold = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(method_from_string(to_string(Method::EulerMaruyama)) == Method::EulerMaruyama);
  CHECK_THROWS_AS(method_from_string("ddim"), ConfigError);
}

TEST_CASE("dpm3 plan is uniform in lambda and spends exactly the evaluation budget") {
  const sde::NoiseSchedule s;
  for (int nfe : {10, 50, 200, 201}) {
    const auto plan = dpm3_plan(s, nfe, 1e-3);
    int total = 0;
    for (int o : plan.orders) total += o;
    CHECK(total == nfe);
    CHECK(plan.times.size() == plan.orders.size() + 1);
    CHECK(plan.times.front() == s.t_end());
    CHECK(plan.times.back() == 1e-3);
    const double step = s.lambda(plan.times[1]) - s.lambda(plan.times[0]);
    for (std::size_t i = 1; i + 1 < plan.times.size(); ++i)
      CHECK(s.lambda(plan.times[i + 1]) - s.lambda(plan.times[i]) == doctest::Approx(step).epsilon(1e-9));
  }
  CHECK(dpm3_plan(s, 200, 1e-3).orders.back() == 2);
}

TEST_CASE("dpm3 on an analytic Gaussian score follows the exact flow") {
  for (auto kind : {sde::ScheduleKind::Cosine, sde::ScheduleKind::LinearVp}) {
    GaussianTarget g;
    g.schedule.kind = kind;
    const int n = 6, k = 3;
    g.mu_x = Matrix::Constant(n, k, 2.0);
    g.mu_a = Matrix::Constant(n, n, 1.5);
    g.mu_a.diagonal().setZero();
    Rng rng(3);
    SamplerConfig cfg;
    cfg.steps = 50;
    const double t0 = g.schedule.t_end();
    double sum = 0.0, want_sum = 0.0, worst = 0.0;
    for (int r = 0; r < 64; ++r) {
      GraphState start{standard_normal(rng, n, k), sde::symmetric_noise(n, rng)};
      const auto end = integrate(g.predictor(), g.schedule, empty_condition(n), start, Clamp{}, cfg, rng);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < k; ++c) {
          const double want = g.flow(start.x(i, c), 2.0, t0, cfg.t_eps);
          sum += end.x(i, c);
          want_sum += want;
          worst = std::max(worst, std::abs(end.x(i, c) - want) / std::abs(want));
        }
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          const double want = g.flow(start.a(i, j), 1.5, t0, cfg.t_eps);
          worst = std::max(worst, std::abs(end.a(i, j) - want) / std::abs(want));
        }
    }
    CHECK(std::abs(sum - want_sum) / std::abs(want_sum) < 0.01);
    CHECK(worst < 0.01);
  }
}

TEST_CASE("sampling is deterministic in the seed") {
  Rng trng(4);
  const auto tmpl = small_template(trng);
  const auto cond = empty_condition(tmpl.node_count);
  for (auto method : {Method::Dpm3, Method::EulerMaruyama}) {
    SamplerConfig cfg;
    cfg.method = method;
    cfg.steps = 20;
    Rng a(9), b(9);
    const auto ga = sample(zero_predictor(), sde::NoiseSchedule{}, cond, tmpl, 14, cfg, a);
    const auto gb = sample(zero_predictor(), sde::NoiseSchedule{}, cond, tmpl, 14, cfg, b);
    CHECK(ga == gb);
  }
}

TEST_CASE("clamped residences match the template exactly") {
  Rng trng(5);
  for (int trial = 0; trial < 4; ++trial) {
    const auto tmpl = small_template(trng);
    const auto cond = empty_condition(tmpl.node_count);
    for (auto method : {Method::Dpm3, Method::EulerMaruyama}) {
      SamplerConfig cfg;
      cfg.method = method;
      cfg.steps = 12;
      Rng rng(trial);
      const auto g = sample(zero_predictor(), sde::NoiseSchedule{}, cond, tmpl, 14, cfg, rng);
      int res = 0;
      for (int i = 0; i < tmpl.node_count; ++i) {
        res += g.categories[i] == tmpl.residence_category;
        CHECK((g.categories[i] == tmpl.residence_category) == bool(tmpl.is_residence[i]));
        for (int j = 0; j < tmpl.node_count; ++j)
          if (tmpl.is_residence[i] && tmpl.is_residence[j]) CHECK(g.adjacency(i, j) == tmpl.adjacency(i, j));
      }
      CHECK(res == tmpl.residence_count());
      citygrid::validate_graph(g, 14);
    }
  }
}

TEST_CASE("dpm3 holds clamped rows at alpha x0 + sigma z with one fixed z") {
  Rng trng(6);
  const auto tmpl = small_template(trng);
  const int n = tmpl.node_count;
  const sde::NoiseSchedule sch;
  const Clamp clamp = residence_clamp(tmpl, 14);
  int first = 0;
  while (!tmpl.is_residence[first]) ++first;
  std::vector<Matrix> implied;
  sde::NoisePredictor spy = [&](const sde::NoisySample& s, const sde::Conditioning&) {
    implied.push_back((s.x_t.row(first) - sch.alpha(s.t) * clamp.x0.row(first)) / sch.sigma(s.t));
    return sde::NoisePrediction{Matrix::Zero(n, 14), Matrix::Zero(n, n)};
  };
  SamplerConfig cfg;
  cfg.steps = 12;
  Rng rng(1);
  GraphState start{standard_normal(rng, n, 14), sde::symmetric_noise(n, rng)};
  integrate(spy, sch, empty_condition(n), start, clamp, cfg, rng);
  REQUIRE(implied.size() == 12);
  for (const auto& z : implied) CHECK((z - implied.front()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("non-finite predictions raise a sampling error with the step") {
  Rng trng(7);
  const auto tmpl = small_template(trng);
  int calls = 0;
  sde::NoisePredictor bad = [&](const sde::NoisySample& s, const sde::Conditioning&) {
    Matrix ex = Matrix::Zero(s.x_t.rows(), s.x_t.cols());
    if (++calls == 5) ex(0, 0) = std::nan("");
    return sde::NoisePrediction{ex, Matrix::Zero(s.a_t.rows(), s.a_t.cols())};
  };
  SamplerConfig cfg;
  cfg.steps = 12;
  Rng rng(1);
  try {
    sample(bad, sde::NoiseSchedule{}, empty_condition(tmpl.node_count), tmpl, 14, cfg, rng);
    FAIL("expected a sampling error");
  } catch (const SamplingError& e) {
    CHECK(e.step() == 4);
  }
}

TEST_CASE("facility placement uses adjacent residences") {
  citygrid::ResidenceTemplate tmpl;
  tmpl.node_count = 4;
  tmpl.is_residence = {1, 1, 0, 0};
  tmpl.positions = {{100, 100}, {300, 100}, {}, {}};
  tmpl.adjacency = BinaryMatrix::Zero(4, 4);
  citygrid::WalkingGraph g;
  g.categories = {0, 0, 1, 2};
  g.adjacency = BinaryMatrix::Zero(4, 4);
  g.adjacency(2, 0) = g.adjacency(0, 2) = g.adjacency(2, 1) = g.adjacency(1, 2) = 1;
  auto pos = place_nodes(g, tmpl, 2000.0);
  CHECK(pos[2].x_m == 200.0);
  CHECK(pos[3].x_m == 1000.0);
  g.adjacency(3, 2) = g.adjacency(2, 3) = 1;
  pos = place_nodes(g, tmpl, 2000.0);
  CHECK(pos[3].x_m == 200.0);
  CHECK(pos[3].y_m == 100.0);
}

TEST_CASE("generation covers every region and is reproducible") {
  citygrid::GeneratorConfig gc;
  gc.regions = 4;
  const auto ds = citygrid::generate_synthetic_city(gc, 21);
  std::vector<sde::Conditioning> conds;
  for (const auto& r : ds.regions) conds.push_back(empty_condition(r.graph.node_count()));
  SamplerConfig cfg;
  cfg.steps = 10;
  const auto a = generate_for_dataset(zero_predictor(), sde::NoiseSchedule{}, ds, conds, cfg, 5, "x");
  const auto b = generate_for_dataset(zero_predictor(), sde::NoiseSchedule{}, ds, conds, cfg, 5, "x");
  REQUIRE(a.dataset.regions.size() == 4);
  CHECK(a.dataset == b.dataset);
  CHECK(a.provenance == b.provenance);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(a.dataset.regions[r].record.region_id == ds.regions[r].record.region_id);
    CHECK(a.provenance[r].method == "dpm3");
    citygrid::validate_graph(a.dataset.regions[r].graph, ds.k_cat());
  }
  conds.pop_back();
  CHECK_THROWS_AS(generate_for_dataset(zero_predictor(), sde::NoiseSchedule{}, ds, conds, cfg, 5, "x"),
                  ConfigError);
}
