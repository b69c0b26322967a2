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

#include <benchmark/benchmark.h>

#include "fapcd/kernels.hpp"

namespace {

using fapcd::Matrix;

struct AttentionInputs {
  Matrix q, k, v, g0, g1;
  explicit AttentionInputs(int n, int d) {
    q = Matrix::Random(n, d);
    k = Matrix::Random(n, d);
    v = Matrix::Random(n, d);
    g0 = Matrix::Random(n * n, d);
    g1 = Matrix::Random(n * n, d);
  }
};

template <bool Parallel>
void BM_EdgeAttentionForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  AttentionInputs in(n, 32);
  Matrix out, probs;
  for (auto _ : state) {
    if constexpr (Parallel)
      fapcd::kernels::edge_attention_forward(in.q, in.k, in.v, in.g0, in.g1, 4, out, probs);
    else
      fapcd::kernels::serial::edge_attention_forward(in.q, in.k, in.v, in.g0, in.g1, 4, out, probs);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_EdgeAttentionBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  AttentionInputs in(n, 32);
  Matrix out, probs, dq, dk, dv, dg0, dg1;
  fapcd::kernels::edge_attention_forward(in.q, in.k, in.v, in.g0, in.g1, 4, out, probs);
  const Matrix d_out = Matrix::Random(n, 32);
  for (auto _ : state) {
    if constexpr (Parallel)
      fapcd::kernels::edge_attention_backward(in.q, in.k, in.v, in.g0, in.g1, probs, 4, d_out, dq,
                                              dk, dv, dg0, dg1);
    else
      fapcd::kernels::serial::edge_attention_backward(in.q, in.k, in.v, in.g0, in.g1, probs, 4,
                                                      d_out, dq, dk, dv, dg0, dg1);
    benchmark::DoNotOptimize(dq.data());
  }
}

template <bool Parallel>
void BM_PairSum(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix h = Matrix::Random(n, 32);
  Matrix out;
  for (auto _ : state) {
    if constexpr (Parallel)
      fapcd::kernels::pair_sum_forward(h, out);
    else
      fapcd::kernels::serial::pair_sum_forward(h, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_EdgeAggregate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix s = Matrix::Random(n, n);
  const Matrix e = Matrix::Random(n * n, 32);
  Matrix out;
  for (auto _ : state) {
    if constexpr (Parallel)
      fapcd::kernels::edge_aggregate_forward(s, e, out);
    else
      fapcd::kernels::serial::edge_aggregate_forward(s, e, out);
    benchmark::DoNotOptimize(out.data());
  }
}

fapcd::BinaryMatrix random_graph(int n) {
  fapcd::BinaryMatrix a = fapcd::BinaryMatrix::Zero(n, n);
  const Matrix r = Matrix::Random(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (r(i, j) > 0.6) a(i, j) = a(j, i) = 1;
  return a;
}

template <bool Parallel>
void BM_ReturnProbabilities(benchmark::State& state) {
  const auto a = random_graph(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    Matrix p = Parallel ? fapcd::kernels::return_probabilities(a, 20)
                        : fapcd::kernels::serial::return_probabilities(a, 20);
    benchmark::DoNotOptimize(p.data());
  }
}

template <bool Parallel>
void BM_ShortestPaths(benchmark::State& state) {
  const auto a = random_graph(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto d = Parallel ? fapcd::kernels::shortest_paths(a) : fapcd::kernels::serial::shortest_paths(a);
    benchmark::DoNotOptimize(d.data());
  }
}

}  // namespace

BENCHMARK(BM_EdgeAttentionForward<false>)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(BM_EdgeAttentionForward<true>)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(BM_EdgeAttentionBackward<false>)->Arg(32)->Arg(64);
BENCHMARK(BM_EdgeAttentionBackward<true>)->Arg(32)->Arg(64);
BENCHMARK(BM_PairSum<false>)->Arg(32)->Arg(64);
BENCHMARK(BM_PairSum<true>)->Arg(32)->Arg(64);
BENCHMARK(BM_EdgeAggregate<false>)->Arg(32)->Arg(64);
BENCHMARK(BM_EdgeAggregate<true>)->Arg(32)->Arg(64);
BENCHMARK(BM_ReturnProbabilities<false>)->Arg(32)->Arg(64);
BENCHMARK(BM_ReturnProbabilities<true>)->Arg(32)->Arg(64);
BENCHMARK(BM_ShortestPaths<false>)->Arg(32)->Arg(64);
BENCHMARK(BM_ShortestPaths<true>)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
