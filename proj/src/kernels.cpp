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

#include "vision/kernels.hpp"

#include <cmath>

#include "vision/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vision::kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

inline void row_nn(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                   std::size_t n) {
  const double* ai = a + i * k;
  double* ci = c + i * n;
  for (std::size_t p = 0; p < k; ++p) {
    const double s = ai[p];
    if (s == 0.0) continue;
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
  }
}

// Row i of C = Aᵀ B, i.e. column i of A against all of B.
inline void row_tn(const double* a, const double* b, double* c, std::size_t i, std::size_t m,
                   std::size_t k, std::size_t n) {
  double* ci = c + i * n;
  for (std::size_t p = 0; p < m; ++p) {
    const double s = a[p * k + i];
    if (s == 0.0) continue;
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
  }
}

inline void row_nt(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                   std::size_t n) {
  const double* ai = a + i * k;
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    const double* bj = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
    ci[j] += acc;
  }
}

inline void smooth_row(const Csr& adj, const Matrix& x, const std::vector<double>& inv_sqrt_deg,
                       Matrix& out, std::size_t v) {
  auto dst = out.row(v);
  const double self = inv_sqrt_deg[v] * inv_sqrt_deg[v];
  auto xv = x.row(v);
  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = self * xv[j];
  for (NodeId u : adj.row(static_cast<NodeId>(v))) {
    const double w = inv_sqrt_deg[v] * inv_sqrt_deg[u];
    auto xu = x.row(u);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * xu[j];
  }
}

std::vector<double> inv_sqrt_degrees(const Csr& adj) {
  std::vector<double> d(adj.num_nodes());
  for (std::size_t v = 0; v < d.size(); ++v) {
    d[v] = 1.0 / std::sqrt(static_cast<double>(adj.degree(static_cast<NodeId>(v)) + 1));
  }
  return d;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void check_smooth_shapes(const Csr& adj, const Matrix& x) {
  if (adj.num_nodes() != x.rows) {
    throw ContractError("smooth: adjacency has " + std::to_string(adj.num_nodes()) +
                        " nodes, features have " + std::to_string(x.rows) + " rows");
  }
}

void check_cos_shapes(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ContractError("row_cosine: shape mismatch");
  }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) row_nn(a, b, c, i, k, n);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < k; ++i) row_tn(a, b, c, i, m, k, n);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) row_nt(a, b, c, i, k, n);
}

Matrix smooth_normalized(const Csr& adj, const Matrix& x) {
  check_smooth_shapes(adj, x);
  const auto isd = inv_sqrt_degrees(adj);
  Matrix out(x.rows, x.cols);
  for (std::size_t v = 0; v < x.rows; ++v) smooth_row(adj, x, isd, out, v);
  return out;
}

std::vector<double> row_cosine(const Matrix& a, const Matrix& b) {
  check_cos_shapes(a, b);
  std::vector<double> out(a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) out[i] = cosine(a.row(i), b.row(i));
  return out;
}

}  // namespace serial

namespace omp {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) row_nn(a, b, c, static_cast<std::size_t>(i), k, n);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) row_tn(a, b, c, static_cast<std::size_t>(i), m, k, n);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) row_nt(a, b, c, static_cast<std::size_t>(i), k, n);
}

Matrix smooth_normalized(const Csr& adj, const Matrix& x) {
  check_smooth_shapes(adj, x);
  const auto isd = inv_sqrt_degrees(adj);
  Matrix out(x.rows, x.cols);
  const auto rows = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t v = 0; v < rows; ++v) smooth_row(adj, x, isd, out, static_cast<std::size_t>(v));
  return out;
}

std::vector<double> row_cosine(const Matrix& a, const Matrix& b) {
  check_cos_shapes(a, b);
  std::vector<double> out(a.rows);
  const auto rows = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    out[static_cast<std::size_t>(i)] =
        cosine(a.row(static_cast<std::size_t>(i)), b.row(static_cast<std::size_t>(i)));
  }
  return out;
}

}  // namespace omp
}  // namespace vision::kernels
