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

#include "fapcd/sde.hpp"

#include <cmath>
#include <numbers>

#include "fapcd/error.hpp"

namespace fapcd::sde {

namespace {

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("t = " + std::to_string(t) + " outside [0, 1]");
}

double log_add_exp0(double x) {
  // log(1 + e^x)
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::LinearVp ? "linear-vp" : "cosine";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "linear-vp" || name == "linear") return ScheduleKind::LinearVp;
  if (name == "cosine") return ScheduleKind::Cosine;
  throw ConfigError("unknown schedule '" + name + "'");
}

double NoiseSchedule::log_alpha(double t) const {
  check_time(t);
  if (kind == ScheduleKind::LinearVp)
    return -0.25 * t * t * (beta_max - beta_min) - 0.5 * t * beta_min;
  const double tc = std::min(t, cosine_t_max);
  const double half_pi = 0.5 * std::numbers::pi;
  return std::log(std::cos((tc + cosine_s) / (1.0 + cosine_s) * half_pi)) -
         std::log(std::cos(cosine_s / (1.0 + cosine_s) * half_pi));
}

double NoiseSchedule::alpha(double t) const { return std::exp(log_alpha(t)); }

double NoiseSchedule::sigma(double t) const {
  // sqrt(1 - alpha^2) without cancellation for small t.
  return std::sqrt(-std::expm1(2.0 * log_alpha(t)));
}

double NoiseSchedule::beta(double t) const {
  check_time(t);
  if (kind == ScheduleKind::LinearVp) return beta_min + t * (beta_max - beta_min);
  if (t > cosine_t_max) return 0.0;
  const double half_pi = 0.5 * std::numbers::pi;
  return std::numbers::pi / (1.0 + cosine_s) * std::tan((t + cosine_s) / (1.0 + cosine_s) * half_pi);
}

double NoiseSchedule::lambda(double t) const {
  const double la = log_alpha(t);
  return la - 0.5 * std::log(-std::expm1(2.0 * la));
}

double NoiseSchedule::t_of_lambda(double lam) const {
  const double la = -0.5 * log_add_exp0(-2.0 * lam);
  if (kind == ScheduleKind::LinearVp) {
    const double tmp = 2.0 * (beta_max - beta_min) * log_add_exp0(-2.0 * lam);
    const double delta = beta_min * beta_min + tmp;
    return tmp / (std::sqrt(delta) + beta_min) / (beta_max - beta_min);
  }
  const double half_pi = 0.5 * std::numbers::pi;
  const double la0 = std::log(std::cos(cosine_s / (1.0 + cosine_s) * half_pi));
  return std::acos(std::exp(la + la0)) * (1.0 + cosine_s) / half_pi - cosine_s;
}

double NoiseSchedule::t_end() const {
  return kind == ScheduleKind::LinearVp ? 1.0 : cosine_t_max;
}

std::pair<double, double> marginal_params(const NoiseSchedule& schedule, double t) {
  return {schedule.alpha(t), schedule.sigma(t)};
}

Matrix symmetric_noise(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix e = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) e(i, j) = e(j, i) = normal(rng);
  return e;
}

std::pair<Matrix, Matrix> sample_noise(Eigen::Index n, Eigen::Index k_cat, Rng& rng) {
  Matrix ex = standard_normal(rng, n, k_cat);
  Matrix ea = symmetric_noise(n, rng);
  return {std::move(ex), std::move(ea)};
}

NoisySample perturb_with_noise(const Matrix& x0, const Matrix& a0, double t,
                               const NoiseSchedule& schedule, Matrix eps_x, Matrix eps_a) {
  const auto n = x0.rows();
  if (a0.rows() != n || a0.cols() != n || eps_x.rows() != n || eps_x.cols() != x0.cols() ||
      eps_a.rows() != n || eps_a.cols() != n)
    throw ShapeError("perturb: tensor shapes disagree");
  const auto [a, s] = marginal_params(schedule, t);
  NoisySample out;
  out.t = t;
  out.x_t = a * x0 + s * eps_x;
  out.a_t = a * a0 + s * eps_a;
  out.a_t.diagonal().setZero();
  out.eps_x = std::move(eps_x);
  out.eps_a = std::move(eps_a);
  return out;
}

NoisySample perturb(const Matrix& x0, const Matrix& a0, double t, const NoiseSchedule& schedule,
                    Rng& rng) {
  check_time(t);
  auto [ex, ea] = sample_noise(x0.rows(), x0.cols(), rng);
  return perturb_with_noise(x0, a0, t, schedule, std::move(ex), std::move(ea));
}

BinaryMatrix make_condition_graph(const citygrid::WalkingGraph& graph, int residence_category) {
  const int n = graph.node_count();
  BinaryMatrix out = BinaryMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (graph.adjacency(i, j) && (graph.categories[i] == residence_category ||
                                    graph.categories[j] == residence_category))
        out(i, j) = 1;
  return out;
}

double graph_noise_loss(const Matrix& eps_x, const Matrix& eps_a, const Matrix& hat_x,
                        const Matrix& hat_a) {
  if (eps_x.rows() != hat_x.rows() || eps_x.cols() != hat_x.cols() ||
      eps_a.rows() != hat_a.rows() || eps_a.cols() != hat_a.cols())
    throw ShapeError("noise prediction shape differs from the noise");
  double loss = (eps_x - hat_x).squaredNorm();
  for (Eigen::Index i = 0; i < eps_a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < eps_a.cols(); ++j) {
      const double d = eps_a(i, j) - hat_a(i, j);
      loss += 2.0 * d * d;
    }
  return loss;
}

Matrix edge_loss_weights(Eigen::Index n) {
  Matrix w = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) w(i, j) = 2.0;
  return w;
}

double sample_time(Rng& rng) {
  // (0, 1]: 1 - U[0, 1)
  return 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double score_matching_loss(const NoisePredictor& predictor,
                           std::span<const TrainingExample> batch, const NoiseSchedule& schedule,
                           Rng& rng) {
  if (batch.empty()) throw InputError("score_matching_loss on an empty batch");
  double total = 0.0;
  for (const auto& ex : batch) {
    const double t = sample_time(rng);
    const NoisySample s = perturb(ex.x0, ex.a0, t, schedule, rng);
    const NoisePrediction p = predictor(s, ex.condition);
    total += graph_noise_loss(s.eps_x, s.eps_a, p.eps_x, p.eps_a);
  }
  const double loss = total / static_cast<double>(batch.size());
  if (!std::isfinite(loss)) throw TrainingError("non-finite score-matching loss");
  return loss;
}

double zero_predictor_expectation(Eigen::Index n, Eigen::Index k_cat) {
  return static_cast<double>(n * k_cat + n * (n - 1));
}

}  // namespace fapcd::sde
