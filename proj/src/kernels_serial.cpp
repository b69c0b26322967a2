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
#include <deque>
#include <vector>

#include "fapcd/error.hpp"
#include "fapcd/kernels.hpp"

namespace fapcd::kernels::serial {

void edge_attention_forward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& g0,
                            const Matrix& g1, int heads, Matrix& out, Matrix& probs) {
  const int n = static_cast<int>(q.rows());
  const int d = static_cast<int>(q.cols());
  if (heads <= 0 || d % heads != 0) throw ShapeError("edge attention: d not divisible by heads");
  const int dh = d / heads;
  out = Matrix::Zero(n, d);
  probs = Matrix::Zero(static_cast<Eigen::Index>(heads) * n, n);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < n; ++i) {
      std::vector<double> logit(n, 0.0);
      for (int j = 0; j < n; ++j) {
        for (int c = h * dh; c < (h + 1) * dh; ++c)
          logit[j] += g0(i * n + j, c) * q(i, c) * k(j, c);
        logit[j] /= std::sqrt(static_cast<double>(dh));
      }
      double mx = logit[0];
      for (double x : logit) mx = std::max(mx, x);
      double z = 0.0;
      for (double x : logit) z += std::exp(x - mx);
      for (int j = 0; j < n; ++j) probs(h * n + i, j) = std::exp(logit[j] - mx) / z;
      for (int c = h * dh; c < (h + 1) * dh; ++c)
        for (int j = 0; j < n; ++j) out(i, c) += probs(h * n + i, j) * g1(i * n + j, c) * v(j, c);
    }
  }
}

void edge_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& g0,
                             const Matrix& g1, const Matrix& probs, int heads, const Matrix& d_out,
                             Matrix& dq, Matrix& dk, Matrix& dv, Matrix& dg0, Matrix& dg1) {
  const int n = static_cast<int>(q.rows());
  const int d = static_cast<int>(q.cols());
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  dq = Matrix::Zero(n, d);
  dk = Matrix::Zero(n, d);
  dv = Matrix::Zero(n, d);
  dg0 = Matrix::Zero(g0.rows(), d);
  dg1 = Matrix::Zero(g1.rows(), d);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < n; ++i) {
      // d out_i[c] / d p_ij = g1_ij[c] v_j[c]
      std::vector<double> dp(n, 0.0);
      for (int j = 0; j < n; ++j) {
        for (int c = h * dh; c < (h + 1) * dh; ++c) {
          dp[j] += d_out(i, c) * g1(i * n + j, c) * v(j, c);
          dg1(i * n + j, c) += d_out(i, c) * probs(h * n + i, j) * v(j, c);
          dv(j, c) += d_out(i, c) * probs(h * n + i, j) * g1(i * n + j, c);
        }
      }
      double mean = 0.0;
      for (int j = 0; j < n; ++j) mean += probs(h * n + i, j) * dp[j];
      for (int j = 0; j < n; ++j) {
        const double dl = probs(h * n + i, j) * (dp[j] - mean) * scale;
        for (int c = h * dh; c < (h + 1) * dh; ++c) {
          dg0(i * n + j, c) += dl * q(i, c) * k(j, c);
          dq(i, c) += dl * g0(i * n + j, c) * k(j, c);
          dk(j, c) += dl * g0(i * n + j, c) * q(i, c);
        }
      }
    }
  }
}

void pair_sum_forward(const Matrix& h, Matrix& out) {
  const int n = static_cast<int>(h.rows());
  out = Matrix::Zero(static_cast<Eigen::Index>(n) * n, h.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < h.cols(); ++c) out(i * n + j, c) = h(i, c) + h(j, c);
}

void pair_sum_backward(const Matrix& d_out, int n, Matrix& dh) {
  dh = Matrix::Zero(n, d_out.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < d_out.cols(); ++c) {
        dh(i, c) += d_out(i * n + j, c);
        dh(j, c) += d_out(i * n + j, c);
      }
}

void edge_aggregate_forward(const Matrix& s, const Matrix& e, Matrix& out) {
  const int n = static_cast<int>(s.rows());
  out = Matrix::Zero(n, e.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < e.cols(); ++c) out(i, c) += s(i, j) * e(i * n + j, c);
}

void edge_aggregate_backward(const Matrix& s, const Matrix& d_out, Matrix& de) {
  const int n = static_cast<int>(s.rows());
  de = Matrix::Zero(static_cast<Eigen::Index>(n) * n, d_out.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < d_out.cols(); ++c) de(i * n + j, c) = s(i, j) * d_out(i, c);
}

BinaryMatrix walk_adjacency(std::span<const double> xs, std::span<const double> ys,
                            double threshold) {
  const int n = static_cast<int>(xs.size());
  BinaryMatrix adj = BinaryMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && std::hypot(xs[i] - xs[j], ys[i] - ys[j]) <= threshold) adj(i, j) = 1;
  return adj;
}

Matrix return_probabilities(const BinaryMatrix& adjacency, int steps) {
  const int n = static_cast<int>(adjacency.rows());
  Matrix p = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double deg = 0;
    for (int j = 0; j < n; ++j) deg += adjacency(i, j);
    if (deg == 0) p(i, i) = 1.0;
    for (int j = 0; j < n; ++j)
      if (adjacency(i, j)) p(i, j) = 1.0 / deg;
  }
  Matrix out(n, steps);
  Matrix power = Matrix::Identity(n, n);
  for (int s = 0; s < steps; ++s) {
    power = (power * p).eval();
    out.col(s) = power.diagonal();
  }
  return out;
}

HopMatrix shortest_paths(const BinaryMatrix& adjacency) {
  const int n = static_cast<int>(adjacency.rows());
  HopMatrix dist = HopMatrix::Constant(n, n, -1);
  for (int src = 0; src < n; ++src) {
    std::deque<int> queue{src};
    dist(src, src) = 0;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int w = 0; w < n; ++w) {
        if (adjacency(u, w) && dist(src, w) < 0) {
          dist(src, w) = dist(src, u) + 1;
          queue.push_back(w);
        }
      }
    }
  }
  return dist;
}

}  // namespace fapcd::kernels::serial
