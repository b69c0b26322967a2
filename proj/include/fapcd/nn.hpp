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

#include "fapcd/autodiff.hpp"

namespace fapcd::nn {

// Xavier/Glorot uniform initialisation of a fan_in x fan_out block.
Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

// y = x W + b with W stored as in x out.
struct Linear {
  std::string name;
  bool bias = true;
  static Linear create(ad::ParameterSet& params, const std::string& name, Eigen::Index in,
                       Eigen::Index out, Rng& rng, bool bias = true);
  ad::Var operator()(ad::ParameterSet& params, ad::Tape& tape, const ad::Var& x) const;
};

struct LayerNorm {
  std::string name;
  static LayerNorm create(ad::ParameterSet& params, const std::string& name, Eigen::Index width);
  ad::Var operator()(ad::ParameterSet& params, ad::Tape& tape, const ad::Var& x) const;
};

// Two-layer perceptron with SiLU between the layers.
struct Mlp {
  Linear first;
  Linear second;
  static Mlp create(ad::ParameterSet& params, const std::string& name, Eigen::Index in,
                    Eigen::Index hidden, Eigen::Index out, Rng& rng);
  ad::Var operator()(ad::ParameterSet& params, ad::Tape& tape, const ad::Var& x) const;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
  double grad_clip = 0.0;     // global L2 norm, 0 disables
};

// Adam with decoupled weight decay. Moment buffers follow the parameter order
// of the set they were created for.
class Adam {
 public:
  Adam() = default;
  Adam(const ad::ParameterSet& params, AdamConfig config);

  // Applies one update from the accumulated Parameter::grad values and
  // returns the pre-clip gradient norm. lr_scale multiplies the learning rate.
  double step(ad::ParameterSet& params, double lr_scale = 1.0);

  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  long long step_count() const { return t_; }
  void set_step_count(long long t) { t_ = t; }
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long long t_ = 0;
};

double gradient_norm(const ad::ParameterSet& params);

}  // namespace fapcd::nn
