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

#include "fapcd/autodiff.hpp"

#include <cmath>
#include <limits>

#include "fapcd/error.hpp"
#include "fapcd/kernels.hpp"

namespace fapcd::ad {

Parameter& ParameterSet::add(const std::string& name, Matrix init) {
  if (contains(name)) throw ConfigError("duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  index_[name] = p.get();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return *it->second;
}

const Parameter& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return *it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += static_cast<std::size_t>(p->value.size());
  return total;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  if (other.size() != size()) throw ShapeError("parameter sets differ in size");
  for (std::size_t i = 0; i < size(); ++i) {
    if (params_[i]->value.rows() != other[i].value.rows() ||
        params_[i]->value.cols() != other[i].value.cols())
      throw ShapeError("parameter " + params_[i]->name + " differs in shape");
    params_[i]->value = other[i].value;
  }
}

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node node;
  node.value = p.value;
  node.requires_grad = record_;
  node.param = &p;
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_[&p] = id;
  return Var(this, id);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  Node node;
  node.value = std::move(value);
  if (record_) {
    for (const auto& p : parents) {
      if (p.tape() != this) throw ShapeError("op mixes variables from different tapes");
      node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) return;
  if (!node.has_grad) {
    node.grad = g;
    node.has_grad = true;
  } else {
    node.grad += g;
  }
}

void Tape::backward(const Var& loss, double seed) {
  if (!record_) throw TrainingError("backward on a tape that does not record gradients");
  if (loss.value().size() != 1) throw ShapeError("backward expects a scalar loss");
  accumulate(loss, Matrix::Constant(1, 1, seed));
  for (int id = loss.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.has_grad) continue;
    if (node.backward) node.backward(node.grad);
    if (node.param) {
      if (node.param->grad.rows() != node.grad.rows() || node.param->grad.cols() != node.grad.cols())
        node.param->grad.setZero(node.grad.rows(), node.grad.cols());
      node.param->grad += node.grad;
    }
    node.grad.resize(0, 0);
    node.has_grad = false;
  }
}

namespace {

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Tape* t = a.tape();
  Matrix out = a.value() * b.value();
  return t->record(std::move(out), {a, b}, [t, a, b](const Matrix& g) {
    if (t->requires_grad(a)) t->accumulate(a, g * b.value().transpose());
    if (t->requires_grad(b)) t->accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  Tape* t = a.tape();
  Matrix out = a.value() * b.value().transpose();
  return t->record(std::move(out), {a, b}, [t, a, b](const Matrix& g) {
    if (t->requires_grad(a)) t->accumulate(a, g * b.value());
    if (t->requires_grad(b)) t->accumulate(b, g.transpose() * a.value());
  });
}

Var add(const Var& a, const Var& b) {
  same_shape(a, b, "add");
  Tape* t = a.tape();
  return t->record(a.value() + b.value(), {a, b}, [t, a, b](const Matrix& g) {
    t->accumulate(a, g);
    t->accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  same_shape(a, b, "sub");
  Tape* t = a.tape();
  return t->record(a.value() - b.value(), {a, b}, [t, a, b](const Matrix& g) {
    t->accumulate(a, g);
    if (t->requires_grad(b)) t->accumulate(b, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  same_shape(a, b, "mul");
  Tape* t = a.tape();
  Matrix out = a.value().cwiseProduct(b.value());
  return t->record(std::move(out), {a, b}, [t, a, b](const Matrix& g) {
    if (t->requires_grad(a)) t->accumulate(a, g.cwiseProduct(b.value()));
    if (t->requires_grad(b)) t->accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(const Var& a, double s) {
  Tape* t = a.tape();
  return t->record(a.value() * s, {a}, [t, a, s](const Matrix& g) { t->accumulate(a, g * s); });
}

Var add_scalar(const Var& a, double s) {
  Tape* t = a.tape();
  Matrix out = a.value().array() + s;
  return t->record(std::move(out), {a}, [t, a](const Matrix& g) { t->accumulate(a, g); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: row shape mismatch");
  Tape* t = a.tape();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t->record(std::move(out), {a, row}, [t, a, row](const Matrix& g) {
    t->accumulate(a, g);
    if (t->requires_grad(row)) t->accumulate(row, g.colwise().sum());
  });
}

Var broadcast_rows(const Var& row, Eigen::Index n) {
  if (row.rows() != 1) throw ShapeError("broadcast_rows: expects a single row");
  Tape* t = row.tape();
  Matrix out = row.value().replicate(n, 1);
  return t->record(std::move(out), {row},
                   [t, row](const Matrix& g) { t->accumulate(row, g.colwise().sum()); });
}

Var mul_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("mul_row: row shape mismatch");
  Tape* t = a.tape();
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return t->record(std::move(out), {a, row}, [t, a, row](const Matrix& g) {
    if (t->requires_grad(a)) {
      Matrix ga = g.array().rowwise() * row.value().row(0).array();
      t->accumulate(a, ga);
    }
    if (t->requires_grad(row)) t->accumulate(row, g.cwiseProduct(a.value()).colwise().sum());
  });
}

Var tanh(const Var& a) {
  Tape* t = a.tape();
  Matrix out = a.value().array().tanh();
  Matrix y = out;
  return t->record(std::move(out), {a}, [t, a, y = std::move(y)](const Matrix& g) {
    t->accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var silu(const Var& a) {
  Tape* t = a.tape();
  Matrix sig = (1.0 + (-a.value().array()).exp()).inverse();
  Matrix out = a.value().cwiseProduct(sig);
  return t->record(std::move(out), {a}, [t, a, sig = std::move(sig)](const Matrix& g) {
    // d/dx x*s(x) = s + x s (1 - s)
    Matrix d = sig.array() + a.value().array() * sig.array() * (1.0 - sig.array());
    t->accumulate(a, g.cwiseProduct(d));
  });
}

Var reciprocal(const Var& a) {
  Tape* t = a.tape();
  Matrix out = a.value().cwiseInverse();
  return t->record(std::move(out), {a}, [t, a](const Matrix& g) {
    Matrix d = -a.value().array().square().inverse();
    t->accumulate(a, g.cwiseProduct(d));
  });
}

Var neg_xlogx(const Var& a) {
  Tape* t = a.tape();
  Matrix out = a.value().unaryExpr([](double x) { return x > 0.0 ? -x * std::log(x) : 0.0; });
  return t->record(std::move(out), {a}, [t, a](const Matrix& g) {
    Matrix d = a.value().unaryExpr([](double x) { return x > 0.0 ? -(std::log(x) + 1.0) : 0.0; });
    t->accumulate(a, g.cwiseProduct(d));
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const auto n = x.rows();
  const auto c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c)
    throw ShapeError("layer_norm: gamma/beta must be 1 x features");
  Tape* t = x.tape();
  Matrix xhat(n, c);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.value().row(i).array() - mean) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  return t->record(std::move(out), {x, gamma, beta},
                   [t, x, gamma, beta, xhat = std::move(xhat), inv_std](const Matrix& g) {
                     if (t->requires_grad(gamma))
                       t->accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
                     if (t->requires_grad(beta)) t->accumulate(beta, g.colwise().sum());
                     if (!t->requires_grad(x)) return;
                     Matrix dxhat = g.array().rowwise() * gamma.value().row(0).array();
                     Matrix dx(dxhat.rows(), dxhat.cols());
                     for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
                       const double m1 = dxhat.row(i).mean();
                       const double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
                       dx.row(i) = inv_std(i) * (dxhat.row(i).array() - m1 -
                                                 xhat.row(i).array() * m2);
                     }
                     t->accumulate(x, dx);
                   });
}

Var softmax_rows(const Var& x, const std::vector<std::uint8_t>& allowed) {
  const auto c = x.cols();
  if (!allowed.empty() && static_cast<Eigen::Index>(allowed.size()) != c)
    throw ShapeError("softmax_rows: mask length differs from columns");
  auto ok = [&](Eigen::Index j) { return allowed.empty() || allowed[j] != 0; };
  bool any = false;
  for (Eigen::Index j = 0; j < c; ++j) any = any || ok(j);
  if (!any) throw DegenerateError("softmax over an empty set of columns");
  Tape* t = x.tape();
  Matrix y = Matrix::Zero(x.rows(), c);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < c; ++j)
      if (ok(j)) mx = std::max(mx, x.value()(i, j));
    double z = 0.0;
    for (Eigen::Index j = 0; j < c; ++j)
      if (ok(j)) z += (y(i, j) = std::exp(x.value()(i, j) - mx));
    y.row(i) /= z;
  }
  Matrix saved = y;
  return t->record(std::move(y), {x}, [t, x, y = std::move(saved)](const Matrix& g) {
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = y.row(i).dot(g.row(i));
      dx.row(i) = y.row(i).array() * (g.row(i).array() - dot);
    }
    t->accumulate(x, dx);
  });
}

Var mean_rows(const Var& a) {
  Tape* t = a.tape();
  const auto n = a.rows();
  Matrix out = a.value().colwise().mean();
  return t->record(std::move(out), {a}, [t, a, n](const Matrix& g) {
    t->accumulate(a, g.replicate(n, 1) / static_cast<double>(n));
  });
}

Var sum_all(const Var& a) {
  Tape* t = a.tape();
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  return t->record(std::move(out), {a}, [t, a](const Matrix& g) {
    t->accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var masked_min(const Var& row, const std::vector<std::uint8_t>& allowed) {
  if (row.rows() != 1 || static_cast<Eigen::Index>(allowed.size()) != row.cols())
    throw ShapeError("masked_min: expects a row and a matching mask");
  Eigen::Index arg = -1;
  for (Eigen::Index j = 0; j < row.cols(); ++j)
    if (allowed[j] && (arg < 0 || row.value()(0, j) < row.value()(0, arg))) arg = j;
  if (arg < 0) throw DegenerateError("minimum over an empty set of columns");
  Tape* t = row.tape();
  Matrix out = Matrix::Constant(1, 1, row.value()(0, arg));
  return t->record(std::move(out), {row}, [t, row, arg](const Matrix& g) {
    Matrix d = Matrix::Zero(1, row.cols());
    d(0, arg) = g(0, 0);
    t->accumulate(row, d);
  });
}

Var row_normalize(const Var& row) {
  if (row.rows() != 1) throw ShapeError("row_normalize: expects a single row");
  Tape* t = row.tape();
  const double s = row.value().sum();
  if (!(s > 0.0)) throw DegenerateError("row_normalize: non-positive sum");
  Matrix out = row.value() / s;
  Matrix saved = out;
  return t->record(std::move(out), {row}, [t, row, s, y = std::move(saved)](const Matrix& g) {
    // d(x_j/s)/dx_k = delta_jk/s - x_j/s^2
    const double dot = g.row(0).dot(y.row(0));
    Matrix d = (g.array() - dot) / s;
    t->accumulate(row, d);
  });
}

Var weighted_square_error(const Var& pred, const Matrix& target, const Matrix& weight) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() ||
      weight.rows() != target.rows() || weight.cols() != target.cols())
    throw ShapeError("weighted_square_error: shape mismatch");
  Tape* t = pred.tape();
  Matrix diff = pred.value() - target;
  Matrix out = Matrix::Constant(1, 1, (diff.array().square() * weight.array()).sum());
  return t->record(std::move(out), {pred},
                   [t, pred, weight, diff = std::move(diff)](const Matrix& g) {
                     t->accumulate(pred, (2.0 * g(0, 0)) * diff.cwiseProduct(weight));
                   });
}

Var dropout(const Var& a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  Tape* t = a.tape();
  Matrix out = a.value().cwiseProduct(mask);
  return t->record(std::move(out), {a}, [t, a, mask = std::move(mask)](const Matrix& g) {
    t->accumulate(a, g.cwiseProduct(mask));
  });
}

Var edge_attention(const Var& q, const Var& k, const Var& v, const Var& g0, const Var& g1,
                   int heads) {
  Tape* t = q.tape();
  Matrix out, probs;
  kernels::edge_attention_forward(q.value(), k.value(), v.value(), g0.value(), g1.value(), heads,
                                  out, probs);
  return t->record(std::move(out), {q, k, v, g0, g1},
                   [t, q, k, v, g0, g1, heads, probs = std::move(probs)](const Matrix& g) {
                     Matrix dq, dk, dv, dg0, dg1;
                     kernels::edge_attention_backward(q.value(), k.value(), v.value(), g0.value(),
                                                      g1.value(), probs, heads, g, dq, dk, dv, dg0,
                                                      dg1);
                     t->accumulate(q, dq);
                     t->accumulate(k, dk);
                     t->accumulate(v, dv);
                     t->accumulate(g0, dg0);
                     t->accumulate(g1, dg1);
                   });
}

Var pair_sum(const Var& h) {
  Tape* t = h.tape();
  Matrix out;
  kernels::pair_sum_forward(h.value(), out);
  const int n = static_cast<int>(h.rows());
  return t->record(std::move(out), {h}, [t, h, n](const Matrix& g) {
    Matrix dh;
    kernels::pair_sum_backward(g, n, dh);
    t->accumulate(h, dh);
  });
}

Var edge_aggregate(const Matrix& s, const Var& e) {
  Tape* t = e.tape();
  Matrix out;
  kernels::edge_aggregate_forward(s, e.value(), out);
  return t->record(std::move(out), {e}, [t, e, s](const Matrix& g) {
    Matrix de;
    kernels::edge_aggregate_backward(s, g, de);
    t->accumulate(e, de);
  });
}

Var symmetrize_pairs(const Var& y, Eigen::Index n) {
  if (y.rows() != n * n || y.cols() != 1) throw ShapeError("symmetrize_pairs: expects (n*n) x 1");
  Tape* t = y.tape();
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out(i, j) = i == j ? 0.0 : 0.5 * (y.value()(i * n + j, 0) + y.value()(j * n + i, 0));
  return t->record(std::move(out), {y}, [t, y, n](const Matrix& g) {
    Matrix dy = Matrix::Zero(n * n, 1);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) {
          dy(i * n + j, 0) += 0.5 * g(i, j);
          dy(j * n + i, 0) += 0.5 * g(i, j);
        }
    t->accumulate(y, dy);
  });
}

}  // namespace fapcd::ad
