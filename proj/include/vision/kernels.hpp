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

#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial` is the
// reference kept for tests and benchmarks, `omp` splits the outermost output
// loop across threads. Both accumulate each output element in the same order,
// so their results are bit-identical for any thread count.

#include <cstddef>
#include <vector>

#include "vision/graph_store.hpp"
#include "vision/matrix.hpp"

namespace vision::kernels {

namespace serial {

/// C[m×n] += A[m×k] · B[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
/// C[k×n] += A[m×k]ᵀ · B[m×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
/// C[m×n] += A[m×k] · B[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);

/// D̃^{-1/2} (A + I) D̃^{-1/2} X by sparse row traversal.
Matrix smooth_normalized(const Csr& adj, const Matrix& x);

/// Cosine between row i of a and row i of b; 0 when either row has zero norm.
std::vector<double> row_cosine(const Matrix& a, const Matrix& b);

}  // namespace serial

namespace omp {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
Matrix smooth_normalized(const Csr& adj, const Matrix& x);
std::vector<double> row_cosine(const Matrix& a, const Matrix& b);

}  // namespace omp

using omp::gemm_nn;
using omp::gemm_nt;
using omp::gemm_tn;
using omp::row_cosine;
using omp::smooth_normalized;

/// Threads the omp kernels will use (1 without OpenMP).
int max_threads();

}  // namespace vision::kernels
