/*
 * Copyright 2026 The VISION Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>
#include <utility>
#include <vector>

#include "vision/graph_store.hpp"
#include "vision/kernels.hpp"
#include "vision/matrix.hpp"

namespace {

using namespace vision;

Matrix random_matrix(std::size_t rows, std::size_t cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (double& x : m.data) x = n(rng);
  return m;
}

GraphStore random_graph(std::size_t n, std::size_t avg_degree, std::size_t dim) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t e = 0; e < n * avg_degree / 2; ++e) {
    const NodeId a = pick(rng), b = pick(rng);
    if (a != b) edges.emplace_back(a, b);
  }
  return GraphStore::make(random_matrix(n, dim, 8), edges, std::vector<ClassId>(n, 0));
}

template <auto Gemm>
void BM_gemm(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(s, s, 1), b = random_matrix(s, s, 2);
  Matrix c(s, s);
  for (auto _ : state) {
    Gemm(a.data.data(), b.data.data(), c.data.data(), s, s, s);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s * s * s));
}

template <auto Smooth>
void BM_smooth(benchmark::State& state) {
  const GraphStore g = random_graph(static_cast<std::size_t>(state.range(0)), 8, 128);
  for (auto _ : state) benchmark::DoNotOptimize(Smooth(g.adjacency(), g.features()));
}

template <auto Cos>
void BM_row_cosine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, 256, 3), b = random_matrix(n, 256, 4);
  for (auto _ : state) benchmark::DoNotOptimize(Cos(a, b));
}

BENCHMARK(BM_gemm<kernels::serial::gemm_nn>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<kernels::omp::gemm_nn>)->Name("gemm_nn/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<kernels::serial::gemm_nt>)->Name("gemm_nt/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<kernels::omp::gemm_nt>)->Name("gemm_nt/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<kernels::serial::gemm_tn>)->Name("gemm_tn/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<kernels::omp::gemm_tn>)->Name("gemm_tn/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_smooth<kernels::serial::smooth_normalized>)->Name("smooth/serial")->Arg(2708)->Arg(20000);
BENCHMARK(BM_smooth<kernels::omp::smooth_normalized>)->Name("smooth/omp")->Arg(2708)->Arg(20000);
BENCHMARK(BM_row_cosine<kernels::serial::row_cosine>)->Name("row_cosine/serial")->Arg(20000);
BENCHMARK(BM_row_cosine<kernels::omp::row_cosine>)->Name("row_cosine/omp")->Arg(20000);

}  // namespace

BENCHMARK_MAIN();
