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

#include <span>

#include "fapcd/common.hpp"

// Hot loops of the denoiser and graph preprocessing. The functions in
// fapcd::kernels are OpenMP-parallel over independent output rows, so results
// do not depend on the thread count. fapcd::kernels::serial holds the direct
// textbook versions used as test references and benchmark baselines.
//
// Edge tensors are stored as (n*n) x d matrices, row i*n + j holding pair (i,j).

namespace fapcd::kernels {

using HopMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Multi-head attention whose logits and values are gated by edge features:
//   logit_ij = sum_{c in head} g0_ij[c] q_i[c] k_j[c] / sqrt(d_head)
//   out_i[c] = sum_j softmax_j(logit)_ij g1_ij[c] v_j[c]
// probs receives (heads*n) x n attention weights for the backward pass.
void edge_attention_forward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& g0,
                            const Matrix& g1, int heads, Matrix& out, Matrix& probs);
void edge_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& g0,
                             const Matrix& g1, const Matrix& probs, int heads, const Matrix& d_out,
                             Matrix& dq, Matrix& dk, Matrix& dv, Matrix& dg0, Matrix& dg1);

// out[i*n+j] = h[i] + h[j]
void pair_sum_forward(const Matrix& h, Matrix& out);
void pair_sum_backward(const Matrix& d_out, int n, Matrix& dh);

// out[i] = sum_j s(i,j) e[i*n+j]
void edge_aggregate_forward(const Matrix& s, const Matrix& e, Matrix& out);
void edge_aggregate_backward(const Matrix& s, const Matrix& d_out, Matrix& de);

BinaryMatrix walk_adjacency(std::span<const double> xs, std::span<const double> ys,
                            double threshold);

// Column s-1 holds the probability that a walk started at node i is back at i
// after s steps. Isolated nodes get a self-loop.
Matrix return_probabilities(const BinaryMatrix& adjacency, int steps);

// Hop distances by breadth-first search; -1 marks unreachable pairs.
HopMatrix shortest_paths(const BinaryMatrix& adjacency);

namespace serial {

void edge_attention_forward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& g0,
                            const Matrix& g1, int heads, Matrix& out, Matrix& probs);
void edge_attention_backward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& g0,
                             const Matrix& g1, const Matrix& probs, int heads, const Matrix& d_out,
                             Matrix& dq, Matrix& dk, Matrix& dv, Matrix& dg0, Matrix& dg1);
void pair_sum_forward(const Matrix& h, Matrix& out);
void pair_sum_backward(const Matrix& d_out, int n, Matrix& dh);
void edge_aggregate_forward(const Matrix& s, const Matrix& e, Matrix& out);
void edge_aggregate_backward(const Matrix& s, const Matrix& d_out, Matrix& de);
BinaryMatrix walk_adjacency(std::span<const double> xs, std::span<const double> ys,
                            double threshold);
Matrix return_probabilities(const BinaryMatrix& adjacency, int steps);
HopMatrix shortest_paths(const BinaryMatrix& adjacency);

}  // namespace serial

}  // namespace fapcd::kernels
