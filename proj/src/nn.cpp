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

#include "fapcd/nn.hpp"

#include <cmath>

#include "fapcd/error.hpp"

namespace fapcd::nn {

Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  return w;
}

Linear Linear::create(ad::ParameterSet& params, const std::string& name, Eigen::Index in,
                      Eigen::Index out, Rng& rng, bool bias) {
  params.add(name + ".w", xavier_uniform(in, out, rng));
  if (bias) params.add(name + ".b", Matrix::Zero(1, out));
  return Linear{name, bias};
}

ad::Var Linear::operator()(ad::ParameterSet& params, ad::Tape& tape, const ad::Var& x) const {
  ad::Var y = ad::matmul(x, tape.parameter(params.get(name + ".w")));
  if (bias) y = ad::add_row(y, tape.parameter(params.get(name + ".b")));
  return y;
}

LayerNorm LayerNorm::create(ad::ParameterSet& params, const std::string& name, Eigen::Index width) {
  params.add(name + ".gamma", Matrix::Ones(1, width));
  params.add(name + ".beta", Matrix::Zero(1, width));
  return LayerNorm{name};
}

ad::Var LayerNorm::operator()(ad::ParameterSet& params, ad::Tape& tape, const ad::Var& x) const {
  return ad::layer_norm(x, tape.parameter(params.get(name + ".gamma")),
                        tape.parameter(params.get(name + ".beta")));
}

Mlp Mlp::create(ad::ParameterSet& params, const std::string& name, Eigen::Index in,
                Eigen::Index hidden, Eigen::Index out, Rng& rng) {
  return Mlp{Linear::create(params, name + ".0", in, hidden, rng),
             Linear::create(params, name + ".1", hidden, out, rng)};
}

ad::Var Mlp::operator()(ad::ParameterSet& params, ad::Tape& tape, const ad::Var& x) const {
  return second(params, tape, ad::silu(first(params, tape, x)));
}

Adam::Adam(const ad::ParameterSet& params, AdamConfig config) : config_(config) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    v_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
  }
}

double gradient_norm(const ad::ParameterSet& params) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) sq += params[i].grad.squaredNorm();
  return std::sqrt(sq);
}

double Adam::step(ad::ParameterSet& params, double lr_scale) {
  if (params.size() != m_.size()) throw ShapeError("optimizer state does not match parameters");
  const double norm = gradient_norm(params);
  if (!std::isfinite(norm)) throw TrainingError("non-finite gradient norm");
  const double clip =
      config_.grad_clip > 0.0 && norm > config_.grad_clip ? config_.grad_clip / norm : 1.0;
  ++t_;
  const double lr = config_.lr * lr_scale;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) continue;
    const Matrix g = p.grad * clip;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
    if (lr == 0.0) continue;
    p.value *= 1.0 - lr * config_.weight_decay;
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
  return norm;
}

}  // namespace fapcd::nn
