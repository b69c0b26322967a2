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

#include "fapcd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <deque>
#include <vector>

#include "fapcd/error.hpp"

namespace fapcd::kernels {

namespace {

void check_attention_shapes(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& g0,
                            const Matrix& g1, int heads) {
  const auto n = q.rows();
  const auto d = q.cols();
  if (k.rows() != n || v.rows() != n || k.cols() != d || v.cols() != d)
    throw ShapeError("edge attention: q/k/v shapes differ");
  if (g0.rows() != n * n || g1.rows() != n * n || g0.cols() != d || g1.cols() != d)
    throw ShapeError("edge attention: gate tensors must be (n*n) x d");
  if (heads <= 0 || d % heads != 0) throw ShapeError("edge attention: d not divisible by heads");
}

}  // namespace

void edge_attention_forward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& g0,
                            const Matrix& g1, int heads, Matrix& out, Matrix& probs) {
  check_attention_shapes(q, k, v, g0, g1, heads);
  const int n = static_cast<int>(q.rows());
  const int d = static_cast<int>(q.cols());
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  out.setZero(n, d);
  probs.resize(static_cast<Eigen::Index>(heads) * n, n);

#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    std::vector<double> logits(n);
    const double* qi = q.row(i).data();
    for (int h = 0; h < heads; ++h) {
      const int c0 = h * dh;
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        const double* gij = g0.row(static_cast<Eigen::Index>(i) * n + j).data();
        const double* kj = k.row(j).data();
        double s = 0.0;
        for (int c = c0; c < c0 + dh; ++c) s += gij[c] * qi[c] * kj[c];
        logits[j] = s * scale;
        mx = std::max(mx, logits[j]);
      }
      double total = 0.0;
      for (int j = 0; j < n; ++j) {
        logits[j] = std::exp(logits[j] - mx);
        total += logits[j];
      }
      double* prow = probs.row(static_cast<Eigen::Index>(h) * n + i).data();
      for (int j = 0; j < n; ++j) prow[j] = logits[j] / total;
      double* oi = out.row(i).data();
      for (int j = 0; j < n; ++j) {
        const double p = prow[j];
        const double* gij = g1.row(static_cast<Eigen::Index>(i) * n + j).data();
        const double* vj = v.row(j).data();
        for (int c = c0; c < c0 + dh; ++c) oi[c] += p * gij[c] * vj[c];
      }
    }
  }
}

void edge_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& g0,
                             const Matrix& g1, const Matrix& probs, int heads, const Matrix& d_out,
                             Matrix& dq, Matrix& dk, Matrix& dv, Matrix& dg0, Matrix& dg1) {
  check_attention_shapes(q, k, v, g0, g1, heads);
  const int n = static_cast<int>(q.rows());
  const int d = static_cast<int>(q.cols());
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  dq.setZero(n, d);
  dk.setZero(n, d);
  dv.setZero(n, d);
  dg0.resize(g0.rows(), d);
  dg1.resize(g1.rows(), d);
  Matrix dlogits(static_cast<Eigen::Index>(heads) * n, n);

  // Row-owned quantities: everything indexed by the query node i.
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    std::vector<double> da(n);
    const double* qi = q.row(i).data();
    const double* doi = d_out.row(i).data();
    double* dqi = dq.row(i).data();
    for (int h = 0; h < heads; ++h) {
      const int c0 = h * dh;
      const double* prow = probs.row(static_cast<Eigen::Index>(h) * n + i).data();
      double weighted = 0.0;
      for (int j = 0; j < n; ++j) {
        const Eigen::Index ij = static_cast<Eigen::Index>(i) * n + j;
        const double* g1ij = g1.row(ij).data();
        const double* vj = v.row(j).data();
        double* dg1ij = dg1.row(ij).data();
        double s = 0.0;
        for (int c = c0; c < c0 + dh; ++c) {
          s += doi[c] * g1ij[c] * vj[c];
          dg1ij[c] = doi[c] * prow[j] * vj[c];
        }
        da[j] = s;
        weighted += prow[j] * s;
      }
      double* dl = dlogits.row(static_cast<Eigen::Index>(h) * n + i).data();
      for (int j = 0; j < n; ++j) {
        dl[j] = prow[j] * (da[j] - weighted);
        const Eigen::Index ij = static_cast<Eigen::Index>(i) * n + j;
        const double* g0ij = g0.row(ij).data();
        const double* kj = k.row(j).data();
        double* dg0ij = dg0.row(ij).data();
        const double w = dl[j] * scale;
        for (int c = c0; c < c0 + dh; ++c) {
          dg0ij[c] = w * qi[c] * kj[c];
          dqi[c] += w * g0ij[c] * kj[c];
        }
      }
    }
  }

  // Column-owned quantities: sums over query nodes for each key node j.
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    double* dkj = dk.row(j).data();
    double* dvj = dv.row(j).data();
    for (int i = 0; i < n; ++i) {
      const Eigen::Index ij = static_cast<Eigen::Index>(i) * n + j;
      const double* g0ij = g0.row(ij).data();
      const double* g1ij = g1.row(ij).data();
      const double* qi = q.row(i).data();
      const double* doi = d_out.row(i).data();
      for (int h = 0; h < heads; ++h) {
        const double w = dlogits(static_cast<Eigen::Index>(h) * n + i, j) * scale;
        const double p = probs(static_cast<Eigen::Index>(h) * n + i, j);
        for (int c = h * dh; c < (h + 1) * dh; ++c) {
          dkj[c] += w * g0ij[c] * qi[c];
          dvj[c] += doi[c] * p * g1ij[c];
        }
      }
    }
  }
}

void pair_sum_forward(const Matrix& h, Matrix& out) {
  const int n = static_cast<int>(h.rows());
  const int d = static_cast<int>(h.cols());
  out.resize(static_cast<Eigen::Index>(n) * n, d);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out.row(static_cast<Eigen::Index>(i) * n + j) = h.row(i) + h.row(j);
    }
  }
}

void pair_sum_backward(const Matrix& d_out, int n, Matrix& dh) {
  if (d_out.rows() != static_cast<Eigen::Index>(n) * n) throw ShapeError("pair_sum: bad gradient");
  const auto d = d_out.cols();
  dh.setZero(n, d);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      dh.row(i) += d_out.row(static_cast<Eigen::Index>(i) * n + j);
      dh.row(i) += d_out.row(static_cast<Eigen::Index>(j) * n + i);
    }
  }
}

void edge_aggregate_forward(const Matrix& s, const Matrix& e, Matrix& out) {
  const int n = static_cast<int>(s.rows());
  if (s.cols() != n || e.rows() != static_cast<Eigen::Index>(n) * n)
    throw ShapeError("edge_aggregate: shapes disagree");
  out.setZero(n, e.cols());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double w = s(i, j);
      if (w != 0.0) out.row(i) += w * e.row(static_cast<Eigen::Index>(i) * n + j);
    }
  }
}

void edge_aggregate_backward(const Matrix& s, const Matrix& d_out, Matrix& de) {
  const int n = static_cast<int>(s.rows());
  de.resize(static_cast<Eigen::Index>(n) * n, d_out.cols());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      de.row(static_cast<Eigen::Index>(i) * n + j) = s(i, j) * d_out.row(i);
    }
  }
}

BinaryMatrix walk_adjacency(std::span<const double> xs, std::span<const double> ys,
                            double threshold) {
  const int n = static_cast<int>(xs.size());
  BinaryMatrix adj = BinaryMatrix::Zero(n, n);
  const double t2 = threshold * threshold;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      adj(i, j) = (dx * dx + dy * dy <= t2) ? 1 : 0;
    }
  }
  return adj;
}

namespace {

Matrix transition_matrix(const BinaryMatrix& adjacency) {
  const int n = static_cast<int>(adjacency.rows());
  Matrix p = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    int deg = 0;
    for (int j = 0; j < n; ++j) deg += adjacency(i, j) ? 1 : 0;
    if (deg == 0) {
      p(i, i) = 1.0;
      continue;
    }
    for (int j = 0; j < n; ++j)
      if (adjacency(i, j)) p(i, j) = 1.0 / deg;
  }
  return p;
}

}  // namespace

Matrix return_probabilities(const BinaryMatrix& adjacency, int steps) {
  const int n = static_cast<int>(adjacency.rows());
  const Matrix p = transition_matrix(adjacency);
  Matrix out(n, steps);
  Matrix power = p;
  Matrix next(n, n);
  for (int s = 0; s < steps; ++s) {
    for (int i = 0; i < n; ++i) out(i, s) = power(i, i);
    if (s + 1 == steps) break;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) next(i, j) = 0.0;
      for (int m = 0; m < n; ++m) {
        const double a = power(i, m);
        if (a == 0.0) continue;
        for (int j = 0; j < n; ++j) next(i, j) += a * p(m, j);
      }
    }
    power.swap(next);
  }
  return out;
}

HopMatrix shortest_paths(const BinaryMatrix& adjacency) {
  const int n = static_cast<int>(adjacency.rows());
  HopMatrix dist = HopMatrix::Constant(n, n, -1);
#pragma omp parallel for schedule(static)
  for (int src = 0; src < n; ++src) {
    std::vector<int> frontier{src};
    dist(src, src) = 0;
    int hop = 0;
    while (!frontier.empty()) {
      ++hop;
      std::vector<int> next;
      for (int u : frontier) {
        for (int w = 0; w < n; ++w) {
          if (adjacency(u, w) && dist(src, w) < 0) {
            dist(src, w) = hop;
            next.push_back(w);
          }
        }
      }
      frontier.swap(next);
    }
  }
  return dist;
}

}  // namespace fapcd::kernels
