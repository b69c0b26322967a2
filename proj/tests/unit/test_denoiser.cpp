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
#include <numeric>

#include "doctest.h"

#include "fapcd/denoiser.hpp"
#include "fapcd/error.hpp"

using namespace fapcd;
using namespace fapcd::denoiser;

namespace {

DenoiserConfig tiny_config(int layers = 2) {
  DenoiserConfig c;
  c.layers = layers;
  c.d_hidden = 16;
  c.heads = 2;
  c.m_walk = 5;
  c.time_embed_dim = 8;
  c.k_cat = 4;
  c.cond_dim = 6;
  return c;
}

struct Case {
  sde::NoisySample sample;
  sde::Conditioning cond;
};

Case random_case(int n, const DenoiserConfig& cfg, const sde::NoiseSchedule& s, double t, Rng& rng) {
  Matrix x0 = Matrix::Zero(n, cfg.k_cat);
  Matrix a0 = Matrix::Zero(n, n);
  std::uniform_int_distribution<int> cat(0, cfg.k_cat - 1);
  std::bernoulli_distribution edge(0.4);
  for (int i = 0; i < n; ++i) x0(i, cat(rng)) = 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (edge(rng)) a0(i, j) = a0(j, i) = 1.0;
  Case c;
  c.sample = sde::perturb(x0, a0, t, s, rng);
  std::normal_distribution<double> nd;
  c.cond.embedding.resize(n, cfg.cond_dim);
  for (Eigen::Index i = 0; i < c.cond.embedding.size(); ++i) c.cond.embedding.data()[i] = nd(rng);
  c.cond.graph = BinaryMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (a0(i, j) > 0 && (i + j) % 2 == 0) c.cond.graph(i, j) = c.cond.graph(j, i) = 1;
  return c;
}

double loss_value(DenoiserModel& m, const Case& c) {
  ad::Tape tape(false);
  return sample_loss(m, tape, c.sample, c.cond).value()(0, 0);
}

std::size_t expected_parameters(const DenoiserConfig& c) {
  const std::size_t d = c.d_hidden, d2 = d / 2, d4 = d / 4;
  auto lin = [](std::size_t in, std::size_t out) { return in * out + out; };
  std::size_t total = lin(c.node_input_dim(), d) + lin(c.cond_dim, d) + lin(c.edge_input_dim(), d) +
                      lin(c.time_embed_dim, d) + lin(d, d);
  total += c.layers * (15 * d * d + 22 * d);
  for (std::size_t out : {static_cast<std::size_t>(c.k_cat), std::size_t{1}})
    total += 2 * lin(d, d) + lin(d, d2) + lin(d2, d4) + lin(d4, out);
  return total;
}

}  // namespace

TEST_CASE("time sinusoid follows the closed form") {
  const Matrix s = time_sinusoid(0.3, 8);
  for (int i = 0; i < 4; ++i) {
    const double w = std::pow(10000.0, -i / 4.0);
    CHECK(s(0, i) == doctest::Approx(std::sin(300.0 * w)).epsilon(1e-12));
    CHECK(s(0, 4 + i) == doctest::Approx(std::cos(300.0 * w)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(time_sinusoid(0.3, 7), ConfigError);
}

TEST_CASE("augmenting a two-node path") {
  auto cfg = tiny_config();
  cfg.m_walk = 4;
  sde::NoisySample s;
  s.t = 0.1;
  s.x_t = Matrix::Zero(2, cfg.k_cat);
  s.a_t = (Matrix(2, 2) << 0.0, 0.9, 0.9, 0.0).finished();
  BinaryMatrix cond = BinaryMatrix::Zero(2, 2);
  const auto aug = augment(s, cond, 1.0, cfg);
  CHECK(aug.a_hat(0, 1) == 1);
  const int k = cfg.k_cat;
  for (int i = 0; i < 2; ++i) {
    CHECK(aug.node_feats(i, k + 0) == 0.0);
    CHECK(aug.node_feats(i, k + 1) == 1.0);
    CHECK(aug.node_feats(i, k + 2) == 0.0);
    CHECK(aug.node_feats(i, k + 3) == 1.0);
    CHECK(aug.node_feats(i, k + 4) == 0.5);
    CHECK(aug.node_feats(i, k + 5) == 1.0);
  }
  CHECK(aug.edge_feats(1, 0) == doctest::Approx(0.9));
  CHECK(aug.edge_feats(1, 1 + 1) == 1.0);
  CHECK(aug.edge_feats(0, 1 + 0) == 1.0);
  CHECK(aug.edge_feats(0, 0) == 0.0);
  CHECK(aug.edge_feats.col(cfg.m_walk + 3).sum() == 0.0);

  s.a_t.setZero();
  const auto iso = augment(s, cond, 1.0, cfg);
  CHECK(iso.edge_feats(1, 1 + cfg.m_walk + 1) == 1.0);
  CHECK(iso.node_feats(0, k + 0) == 1.0);
  CHECK(iso.node_feats(0, k + cfg.m_walk + 1) == 0.0);
}

TEST_CASE("binarization compares against half the signal scale") {
  const Matrix a = (Matrix(3, 3) << 0, 0.26, 0.1, 0.26, 0, 0.24, 0.1, 0.24, 0).finished();
  const auto b = binarize(a, 0.5);
  CHECK(b(0, 1) == 1);
  CHECK(b(1, 2) == 0);
  CHECK(b(0, 2) == 0);
  CHECK(b.diagonal().cast<int>().sum() == 0);
}

TEST_CASE("closeness centrality on a path") {
  kernels::HopMatrix hops(3, 3);
  hops << 0, 1, 2, 1, 0, 1, 2, 1, 0;
  const auto c = closeness_centrality(hops);
  CHECK(c(0) == doctest::Approx(2.0 / 3.0));
  CHECK(c(1) == doctest::Approx(1.0));
  kernels::HopMatrix split(3, 3);
  split << 0, 1, -1, 1, 0, -1, -1, -1, 0;
  const auto d = closeness_centrality(split);
  CHECK(d(0) == doctest::Approx(0.5));
  CHECK(d(2) == 0.0);
}

TEST_CASE("outputs have the right shapes and the edge noise is symmetric") {
  const auto cfg = tiny_config();
  const auto model = build_model(cfg, sde::NoiseSchedule{}, 1);
  Rng rng(2);
  for (int n : {1, 2, 9}) {
    const auto c = random_case(n, cfg, model.schedule, 0.5, rng);
    const auto p = predict_noise(model, c.sample, c.cond);
    CHECK(p.eps_x.rows() == n);
    CHECK(p.eps_x.cols() == cfg.k_cat);
    CHECK(p.eps_a == p.eps_a.transpose());
    CHECK(p.eps_a.diagonal().cwiseAbs().sum() == 0.0);
    CHECK(p.eps_x.allFinite());
  }
}

TEST_CASE("parameter count matches the analytic total") {
  for (int layers : {0, 1, 3}) {
    const auto cfg = tiny_config(layers);
    CHECK(build_model(cfg, sde::NoiseSchedule{}, 1).parameter_count() == expected_parameters(cfg));
  }
  DenoiserConfig full;
  CHECK(build_model(full, sde::NoiseSchedule{}, 1).parameter_count() == expected_parameters(full));
}

TEST_CASE("zero layers still produce a prediction") {
  const auto cfg = tiny_config(0);
  const auto model = build_model(cfg, sde::NoiseSchedule{}, 3);
  Rng rng(4);
  const auto c = random_case(5, cfg, model.schedule, 0.2, rng);
  CHECK(predict_noise(model, c.sample, c.cond).eps_a.allFinite());
}

TEST_CASE("node relabelling permutes the prediction") {
  const auto cfg = tiny_config();
  const auto model = build_model(cfg, sde::NoiseSchedule{}, 5);
  Rng rng(6);
  const int n = 8;
  const auto c = random_case(n, cfg, model.schedule, 0.35, rng);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> p(n);
  for (int i = 0; i < n; ++i) p.indices()(i) = perm[i];
  Case q = c;
  q.sample.x_t = p * c.sample.x_t;
  q.sample.a_t = p * c.sample.a_t * p.transpose();
  q.cond.embedding = p * c.cond.embedding;
  q.cond.graph = (p * c.cond.graph.cast<double>() * p.transpose()).cast<std::uint8_t>();
  const auto a = predict_noise(model, c.sample, c.cond);
  const auto b = predict_noise(model, q.sample, q.cond);
  CHECK((Matrix(p * a.eps_x) - b.eps_x).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((Matrix(p * a.eps_a * p.transpose()) - b.eps_a).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("backward agrees with finite differences") {
  const auto cfg = tiny_config();
  auto model = build_model(cfg, sde::NoiseSchedule{}, 7);
  Rng rng(8);
  const auto c = random_case(5, cfg, model.schedule, 0.4, rng);
  model.params.zero_grad();
  {
    ad::Tape tape;
    tape.backward(sample_loss(model, tape, c.sample, c.cond));
  }
  std::uniform_int_distribution<std::size_t> pick_param(0, model.params.size() - 1);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto& p = model.params[pick_param(rng)];
    std::uniform_int_distribution<Eigen::Index> pick(0, p.value.size() - 1);
    const Eigen::Index i = pick(rng);
    const double orig = p.value.data()[i];
    const double h = 1e-6;
    p.value.data()[i] = orig + h;
    const double up = loss_value(model, c);
    p.value.data()[i] = orig - h;
    const double down = loss_value(model, c);
    p.value.data()[i] = orig;
    const double fd = (up - down) / (2 * h);
    INFO(p.name << "[" << i << "]");
    CHECK(p.grad.data()[i] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    ++checked;
  }
  CHECK(checked == 60);
}

TEST_CASE("one optimizer step lowers the loss on a fixed sample") {
  const auto cfg = tiny_config();
  auto model = build_model(cfg, sde::NoiseSchedule{}, 9);
  Rng rng(10);
  const auto c = random_case(6, cfg, model.schedule, 0.5, rng);
  const double before = loss_value(model, c);
  nn::AdamConfig ac;
  ac.lr = 1e-3;
  nn::Adam adam(model.params, ac);
  model.params.zero_grad();
  {
    ad::Tape tape;
    tape.backward(sample_loss(model, tape, c.sample, c.cond));
  }
  adam.step(model.params);
  CHECK(loss_value(model, c) < before);
}

TEST_CASE("config validation and round trip") {
  auto cfg = tiny_config();
  CHECK(config_from_json(config_to_json(cfg)) == cfg);
  sde::NoiseSchedule s;
  s.kind = sde::ScheduleKind::LinearVp;
  s.steps = 50;
  CHECK(schedule_from_json(schedule_to_json(s)) == s);
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.layers = -1;
  CHECK_THROWS_AS(build_model(cfg, s, 1), ConfigError);
}

TEST_CASE("condition shape mismatch is reported") {
  const auto cfg = tiny_config();
  const auto model = build_model(cfg, sde::NoiseSchedule{}, 1);
  Rng rng(11);
  auto c = random_case(4, cfg, model.schedule, 0.5, rng);
  c.cond.embedding = Matrix::Zero(4, cfg.cond_dim + 1);
  CHECK_THROWS_AS(predict_noise(model, c.sample, c.cond), ConfigError);
}

TEST_CASE("same seed builds identical models") {
  const auto cfg = tiny_config();
  const auto a = build_model(cfg, sde::NoiseSchedule{}, 12);
  const auto b = build_model(cfg, sde::NoiseSchedule{}, 12);
  for (std::size_t i = 0; i < a.params.size(); ++i) CHECK(a.params[i].value == b.params[i].value);
}
