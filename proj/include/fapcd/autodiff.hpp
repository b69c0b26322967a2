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

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fapcd/common.hpp"

// Reverse-mode differentiation over dense row-major matrices. A Tape records
// every op applied during one forward pass; backward() walks the record in
// reverse and deposits gradients into the Parameters that were read.

namespace fapcd::ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(const std::string& name, Matrix init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t scalar_count() const;
  void zero_grad();
  // Deep copy of values into an existing set with the same layout.
  void copy_values_from(const ParameterSet& other);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> index_;
};

class Tape;

class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(const Matrix& grad_out)>;

  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Parameter& p);
  // Appends an op result. `backward` runs only when some parent needs a
  // gradient, and must route grad_out into the parents with accumulate().
  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }
  void accumulate(const Var& v, const Matrix& g);

  // Seeds d(loss)/d(loss) = seed for a 1x1 loss and adds parameter gradients
  // into Parameter::grad.
  void backward(const Var& loss, double seed = 1.0);
  bool recording() const { return record_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Parameter* param = nullptr;
    Backward backward;
  };
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool record_;
};

// Elementwise and linear-algebra ops. Shapes follow Eigen conventions; all ops
// throw ShapeError on mismatch.
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_row(const Var& a, const Var& row);         // broadcast a 1 x c row over a
Var broadcast_rows(const Var& row, Eigen::Index n);  // 1 x c -> n x c
Var mul_row(const Var& a, const Var& row);         // a .* broadcast(row)
Var tanh(const Var& a);
Var silu(const Var& a);
Var reciprocal(const Var& a);
Var neg_xlogx(const Var& a);  // -x ln x, 0 at x = 0
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
// Row softmax restricted to columns with allowed[c] != 0; other columns are 0.
Var softmax_rows(const Var& x, const std::vector<std::uint8_t>& allowed = {});
Var mean_rows(const Var& a);  // n x c -> 1 x c
Var sum_all(const Var& a);
Var masked_min(const Var& row, const std::vector<std::uint8_t>& allowed);  // 1 x c -> 1 x 1
Var row_normalize(const Var& row);  // divide a 1 x c row by its sum
// Sum of weight .* (pred - target)^2 with constant target and weight.
Var weighted_square_error(const Var& pred, const Matrix& target, const Matrix& weight);
// Inverted dropout with a fixed mask drawn from rng.
Var dropout(const Var& a, double p, Rng& rng);

// Graph ops backed by fapcd::kernels.
Var edge_attention(const Var& q, const Var& k, const Var& v, const Var& g0, const Var& g1,
                   int heads);
Var pair_sum(const Var& h);
Var edge_aggregate(const Matrix& s, const Var& e);
// (n*n) x 1 -> n x n with out_ij = (y_ij + y_ji)/2 and a zero diagonal.
Var symmetrize_pairs(const Var& y, Eigen::Index n);

}  // namespace fapcd::ad
