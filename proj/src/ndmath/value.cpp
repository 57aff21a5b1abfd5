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

#include "vision/ndmath/value.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <unordered_set>
#include <utility>

#include "vision/error.hpp"
#include "vision/kernels.hpp"

namespace vision::nd {
namespace {

using detail::Node;

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(const char* op, const Value& a, const Value& b) {
  throw ContractError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                      b.shape_str());
}

Value make(Matrix value, std::initializer_list<Value> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    for (const auto& p : parents) n->parents.push_back(p.ptr());
    n->backward = std::move(bw);
  }
  return Value(std::move(n));
}

Value make_n(Matrix value, const std::vector<Value>& parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    for (const auto& p : parents) n->parents.push_back(p.ptr());
    n->backward = std::move(bw);
  }
  return Value(std::move(n));
}

// Returns the parent's grad buffer when it wants one.
Matrix* pgrad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

enum class Bcast { kSame, kRow, kCol, kScalar };

Bcast broadcast_kind(const char* op, const Value& a, const Value& b, bool allow_col) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Bcast::kSame;
  if (b.rows() == 1 && b.cols() == 1) return Bcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::kRow;
  if (allow_col && b.cols() == 1 && b.rows() == a.rows()) return Bcast::kCol;
  shape_error(op, a, b);
}

inline double bval(const Matrix& b, Bcast kind, std::size_t i, std::size_t j) {
  switch (kind) {
    case Bcast::kSame: return b(i, j);
    case Bcast::kRow: return b(0, j);
    case Bcast::kCol: return b(i, 0);
    case Bcast::kScalar: return b(0, 0);
  }
  return 0.0;
}

inline double& bref(Matrix& b, Bcast kind, std::size_t i, std::size_t j) {
  switch (kind) {
    case Bcast::kSame: return b(i, j);
    case Bcast::kRow: return b(0, j);
    case Bcast::kCol: return b(i, 0);
    case Bcast::kScalar: return b(0, 0);
  }
  return b(0, 0);
}

template <typename F, typename D>
Value unary(const Value& a, F f, D dfdx_from_xy) {
  Matrix out = a.data();
  for (double& x : out.data) x = f(x);
  return make(std::move(out), {a}, [dfdx_from_xy](Node& self) {
    Matrix* ga = pgrad(self, 0);
    if (!ga) return;
    const Matrix& x = self.parents[0]->value;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      ga->data[i] += self.grad.data[i] * dfdx_from_xy(x.data[i], self.value.data[i]);
    }
  });
}

}  // namespace

// ---- Value ---------------------------------------------------------------

Value Value::constant(Matrix m) {
  auto n = std::make_shared<Node>();
  n->value = std::move(m);
  return Value(std::move(n));
}

Value Value::parameter(Matrix m) {
  auto n = std::make_shared<Node>();
  n->value = std::move(m);
  n->requires_grad = true;
  return Value(std::move(n));
}

std::string Value::shape_str() const {
  return "[" + std::to_string(rows()) + "x" + std::to_string(cols()) + "]";
}

double Value::item() const {
  if (rows() != 1 || cols() != 1) throw ContractError("item() on non-scalar " + shape_str());
  return node_->value.data[0];
}

Matrix Value::grad() const {
  if (node_->has_grad) return node_->grad;
  return Matrix(rows(), cols());
}

void Value::zero_grad() {
  node_->grad = Matrix();
  node_->has_grad = false;
}

void Value::backward() {
  if (rows() != 1 || cols() != 1) {
    throw ContractError("backward() needs a scalar loss, got " + shape_str());
  }
  if (node_->backward_ran) {
    throw ContractError("backward() already ran on this graph; rebuild the forward pass");
  }
  node_->backward_ran = true;
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer().data[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward) continue;  // leaf
    if (n->has_grad) n->backward(*n);
    n->grad = Matrix();
    n->has_grad = false;
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- elementwise ---------------------------------------------------------

Value add(const Value& a, const Value& b) {
  const Bcast kind = broadcast_kind("add", a, b, false);
  Matrix out = a.data();
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += bval(b.data(), kind, i, j);
  return make(std::move(out), {a, b}, [kind](Node& self) {
    const Matrix& g = self.grad;
    if (Matrix* ga = pgrad(self, 0)) {
      for (std::size_t i = 0; i < g.data.size(); ++i) ga->data[i] += g.data[i];
    }
    if (Matrix* gb = pgrad(self, 1)) {
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) bref(*gb, kind, i, j) += g(i, j);
    }
  });
}

Value sub(const Value& a, const Value& b) {
  const Bcast kind = broadcast_kind("sub", a, b, false);
  Matrix out = a.data();
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) -= bval(b.data(), kind, i, j);
  return make(std::move(out), {a, b}, [kind](Node& self) {
    const Matrix& g = self.grad;
    if (Matrix* ga = pgrad(self, 0)) {
      for (std::size_t i = 0; i < g.data.size(); ++i) ga->data[i] += g.data[i];
    }
    if (Matrix* gb = pgrad(self, 1)) {
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) bref(*gb, kind, i, j) -= g(i, j);
    }
  });
}

Value mul(const Value& a, const Value& b) {
  const Bcast kind = broadcast_kind("mul", a, b, true);
  Matrix out = a.data();
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) *= bval(b.data(), kind, i, j);
  return make(std::move(out), {a, b}, [kind](Node& self) {
    const Matrix& g = self.grad;
    const Matrix& av = self.parents[0]->value;
    const Matrix& bv = self.parents[1]->value;
    if (Matrix* ga = pgrad(self, 0)) {
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) (*ga)(i, j) += g(i, j) * bval(bv, kind, i, j);
    }
    if (Matrix* gb = pgrad(self, 1)) {
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) bref(*gb, kind, i, j) += g(i, j) * av(i, j);
    }
  });
}

Value affine(const Value& a, double alpha, double beta) {
  return unary(
      a, [alpha, beta](double x) { return alpha * x + beta; },
      [alpha](double, double) { return alpha; });
}

Value exp(const Value& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Value log(const Value& a) {
  for (double x : a.data().data) {
    if (!(x > 0.0)) throw ContractError("log: non-positive input");
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Value clamp(const Value& a, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lower bound above upper bound");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Value sigmoid(const Value& a) {
  return unary(
      a,
      [](double x) {
        return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Value tanh(const Value& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Value gelu(const Value& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [inv_sqrt_2pi](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        return cdf + x * pdf;
      });
}

// ---- linear algebra ------------------------------------------------------

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix out(m, n);
  kernels::gemm_nn(a.data().data.data(), b.data().data.data(), out.data.data(), m, k, n);
  return make(std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* g = self.grad.data.data();
    if (Matrix* ga = pgrad(self, 0)) {
      kernels::gemm_nt(g, self.parents[1]->value.data.data(), ga->data.data(), m, n, k);
    }
    if (Matrix* gb = pgrad(self, 1)) {
      kernels::gemm_tn(self.parents[0]->value.data.data(), g, gb->data.data(), m, k, n);
    }
  });
}

Value matmul_nt(const Value& a, const Value& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix out(m, n);
  kernels::gemm_nt(a.data().data.data(), b.data().data.data(), out.data.data(), m, k, n);
  return make(std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* g = self.grad.data.data();
    if (Matrix* ga = pgrad(self, 0)) {
      kernels::gemm_nn(g, self.parents[1]->value.data.data(), ga->data.data(), m, n, k);
    }
    if (Matrix* gb = pgrad(self, 1)) {
      kernels::gemm_tn(g, self.parents[0]->value.data.data(), gb->data.data(), m, n, k);
    }
  });
}

Value transpose(const Value& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a.data()(i, j);
  return make(std::move(out), {a}, [](Node& self) {
    if (Matrix* ga = pgrad(self, 0)) {
      for (std::size_t i = 0; i < ga->rows; ++i)
        for (std::size_t j = 0; j < ga->cols; ++j) (*ga)(i, j) += self.grad(j, i);
    }
  });
}

// ---- structure -----------------------------------------------------------

Value concat_cols(const Value& a, const Value& b) {
  if (a.rows() != b.rows()) shape_error("concat_cols", a, b);
  const std::size_t ca = a.cols(), cb = b.cols();
  Matrix out(a.rows(), ca + cb);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy_n(a.data().row(i).begin(), ca, out.row(i).begin());
    std::copy_n(b.data().row(i).begin(), cb, out.row(i).begin() + ca);
  }
  return make(std::move(out), {a, b}, [ca, cb](Node& self) {
    const Matrix& g = self.grad;
    if (Matrix* ga = pgrad(self, 0)) {
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < ca; ++j) (*ga)(i, j) += g(i, j);
    }
    if (Matrix* gb = pgrad(self, 1)) {
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < cb; ++j) (*gb)(i, j) += g(i, ca + j);
    }
  });
}

Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) shape_error("concat_rows", parts.front(), p);
    r += p.rows();
  }
  Matrix out(r, c);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data().data.begin(), p.data().data.end(), out.data.begin() + off * c);
    off += p.rows();
  }
  return make_n(std::move(out), parts, [](Node& self) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const std::size_t n = self.parents[i]->value.data.size();
      if (Matrix* gp = pgrad(self, i)) {
        for (std::size_t e = 0; e < n; ++e) gp->data[e] += self.grad.data[off + e];
      }
      off += n;
    }
  });
}

Value gather_rows(const Value& a, const std::vector<std::size_t>& rows) {
  const std::size_t c = a.cols();
  Matrix out(rows.size(), c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) {
      throw ContractError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                          a.shape_str());
    }
    std::copy_n(a.data().row(rows[i]).begin(), c, out.row(i).begin());
  }
  return make(std::move(out), {a}, [rows, c](Node& self) {
    if (Matrix* ga = pgrad(self, 0)) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) (*ga)(rows[i], j) += self.grad(i, j);
    }
  });
}

// ---- reductions ----------------------------------------------------------

Value sum(const Value& a) {
  double s = 0.0;
  for (double x : a.data().data) s += x;
  return make(Matrix(1, 1, s), {a}, [](Node& self) {
    if (Matrix* ga = pgrad(self, 0)) {
      for (double& g : ga->data) g += self.grad.data[0];
    }
  });
}

Value mean(const Value& a) {
  const double n = static_cast<double>(a.data().data.size());
  if (n == 0) throw ContractError("mean of empty tensor");
  return affine(sum(a), 1.0 / n);
}

Value mean_rows(const Value& a) {
  std::vector<std::size_t> all(a.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return group_mean_rows(a, {all});
}

Value group_mean_rows(const Value& a, const std::vector<std::vector<std::size_t>>& groups) {
  const std::size_t c = a.cols();
  Matrix out(groups.size(), c);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    if (groups[gi].empty()) throw ContractError("group_mean_rows: empty group " + std::to_string(gi));
    for (std::size_t r : groups[gi]) {
      if (r >= a.rows()) throw ContractError("group_mean_rows: row out of range");
      for (std::size_t j = 0; j < c; ++j) out(gi, j) += a.data()(r, j);
    }
    const double inv = 1.0 / static_cast<double>(groups[gi].size());
    for (std::size_t j = 0; j < c; ++j) out(gi, j) *= inv;
  }
  return make(std::move(out), {a}, [groups, c](Node& self) {
    Matrix* ga = pgrad(self, 0);
    if (!ga) return;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const double inv = 1.0 / static_cast<double>(groups[gi].size());
      for (std::size_t r : groups[gi])
        for (std::size_t j = 0; j < c; ++j) (*ga)(r, j) += inv * self.grad(gi, j);
    }
  });
}

// ---- row-wise normalizations ---------------------------------------------

Value row_softmax(const Value& a) {
  Matrix out = a.data();
  for (std::size_t i = 0; i < out.rows; ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double& x : r) z += (x = std::exp(x - mx));
    for (double& x : r) x /= z;
  }
  return make(std::move(out), {a}, [](Node& self) {
    Matrix* ga = pgrad(self, 0);
    if (!ga) return;
    const Matrix& y = self.value;
    for (std::size_t i = 0; i < y.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols; ++j) dot += self.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols; ++j) (*ga)(i, j) += y(i, j) * (self.grad(i, j) - dot);
    }
  });
}

Value row_log_softmax(const Value& a) {
  Matrix out = a.data();
  for (std::size_t i = 0; i < out.rows; ++i) {
    auto r = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double x : r) z += std::exp(x - mx);
    const double lse = mx + std::log(z);
    for (double& x : r) x -= lse;
  }
  return make(std::move(out), {a}, [](Node& self) {
    Matrix* ga = pgrad(self, 0);
    if (!ga) return;
    const Matrix& y = self.value;
    for (std::size_t i = 0; i < y.rows; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < y.cols; ++j) gsum += self.grad(i, j);
      for (std::size_t j = 0; j < y.cols; ++j)
        (*ga)(i, j) += self.grad(i, j) - std::exp(y(i, j)) * gsum;
    }
  });
}

Value layer_norm(const Value& a, double eps) {
  const std::size_t r = a.rows(), c = a.cols();
  Matrix out(r, c);
  std::vector<double> rstd(r);
  for (std::size_t i = 0; i < r; ++i) {
    auto x = a.data().row(i);
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= static_cast<double>(c);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) out(i, j) = (x[j] - mu) * rstd[i];
  }
  return make(std::move(out), {a}, [rstd = std::move(rstd)](Node& self) {
    Matrix* ga = pgrad(self, 0);
    if (!ga) return;
    const Matrix& y = self.value;
    const double inv_c = 1.0 / static_cast<double>(y.cols);
    for (std::size_t i = 0; i < y.rows; ++i) {
      double gmean = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < y.cols; ++j) {
        gmean += self.grad(i, j);
        gy += self.grad(i, j) * y(i, j);
      }
      gmean *= inv_c;
      gy *= inv_c;
      for (std::size_t j = 0; j < y.cols; ++j)
        (*ga)(i, j) += rstd[i] * (self.grad(i, j) - gmean - y(i, j) * gy);
    }
  });
}

namespace {

// Unit rows plus their original norms (0 for zero rows).
std::pair<Matrix, std::vector<double>> unit_rows(const Matrix& x) {
  Matrix u = x;
  std::vector<double> norms(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    norms[i] = std::sqrt(s);
    auto r = u.row(i);
    if (norms[i] == 0.0) {
      std::fill(r.begin(), r.end(), 0.0);
    } else {
      for (double& v : r) v /= norms[i];
    }
  }
  return {std::move(u), std::move(norms)};
}

// Pulls a gradient w.r.t. unit rows back to the raw rows.
void unit_rows_backward(const Matrix& u, const std::vector<double>& norms, const Matrix& gu,
                        Matrix& gx) {
  for (std::size_t i = 0; i < u.rows; ++i) {
    if (norms[i] == 0.0) continue;
    double dot = 0.0;
    for (std::size_t j = 0; j < u.cols; ++j) dot += u(i, j) * gu(i, j);
    for (std::size_t j = 0; j < u.cols; ++j) gx(i, j) += (gu(i, j) - u(i, j) * dot) / norms[i];
  }
}

}  // namespace

Value normalize_rows(const Value& a) {
  auto [u, norms] = unit_rows(a.data());
  Matrix out = u;
  return make(std::move(out), {a}, [norms = std::move(norms)](Node& self) {
    if (Matrix* ga = pgrad(self, 0)) unit_rows_backward(self.value, norms, self.grad, *ga);
  });
}

Value cosine_rows(const Value& a, const Value& b) {
  if (a.cols() != b.cols()) shape_error("cosine_rows", a, b);
  auto [ua, na] = unit_rows(a.data());
  auto [ub, nb] = unit_rows(b.data());
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix out(m, n);
  kernels::gemm_nt(ua.data.data(), ub.data.data(), out.data.data(), m, k, n);
  return make(std::move(out), {a, b},
              [ua = std::move(ua), na = std::move(na), ub = std::move(ub), nb = std::move(nb), m, k,
               n](Node& self) {
                const double* g = self.grad.data.data();
                if (Matrix* ga = pgrad(self, 0)) {
                  Matrix gua(m, k);
                  kernels::gemm_nn(g, ub.data.data(), gua.data.data(), m, n, k);
                  unit_rows_backward(ua, na, gua, *ga);
                }
                if (Matrix* gb = pgrad(self, 1)) {
                  Matrix gub(n, k);
                  kernels::gemm_tn(g, ua.data.data(), gub.data.data(), m, n, k);
                  unit_rows_backward(ub, nb, gub, *gb);
                }
              });
}

Value row_logsumexp_masked(const Value& a, const Matrix& mask) {
  if (mask.rows != a.rows() || mask.cols != a.cols()) {
    throw ContractError("row_logsumexp_masked: mask shape does not match " + a.shape_str());
  }
  const std::size_t r = a.rows(), c = a.cols();
  Matrix out(r, 1);
  Matrix weights(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask(i, j) == 0.0) continue;
      any = true;
      const double x = a.data()(i, j);
      mx = std::isnan(x) || std::isnan(mx) ? std::numeric_limits<double>::quiet_NaN() : std::max(mx, x);
    }
    if (!any) throw ContractError("row_logsumexp_masked: row with empty mask");
    if (!std::isfinite(mx)) {
      // NaN or infinite inputs propagate; the caller's finiteness check reports them.
      out(i, 0) = mx;
      continue;
    }
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask(i, j) != 0.0) z += (weights(i, j) = std::exp(a.data()(i, j) - mx));
    }
    for (std::size_t j = 0; j < c; ++j) weights(i, j) /= z;
    out(i, 0) = mx + std::log(z);
  }
  return make(std::move(out), {a}, [weights = std::move(weights)](Node& self) {
    Matrix* ga = pgrad(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < weights.rows; ++i)
      for (std::size_t j = 0; j < weights.cols; ++j)
        (*ga)(i, j) += self.grad(i, 0) * weights(i, j);
  });
}

// ---- attention -----------------------------------------------------------

Value segment_attention(const Value& q, const Value& k, const Value& v,
                        const std::vector<std::vector<std::size_t>>& segments,
                        std::size_t heads) {
  const std::size_t d = q.cols();
  if (k.cols() != d || v.cols() != d) shape_error("segment_attention", q, k);
  if (k.rows() != v.rows()) shape_error("segment_attention", k, v);
  if (segments.size() != q.rows()) {
    throw ContractError("segment_attention: " + std::to_string(segments.size()) +
                        " segments for " + std::to_string(q.rows()) + " query rows");
  }
  if (heads == 0 || d % heads != 0) {
    throw ContractError("segment_attention: width " + std::to_string(d) +
                        " not divisible by heads " + std::to_string(heads));
  }
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // weights[i] holds heads × |segment i| softmax weights.
  std::vector<std::vector<double>> weights(q.rows());
  Matrix out(q.rows(), d);
  const Matrix& Q = q.data();
  const Matrix& K = k.data();
  const Matrix& V = v.data();
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const auto& seg = segments[i];
    if (seg.empty()) throw ContractError("segment_attention: empty key set for row " + std::to_string(i));
    for (std::size_t j : seg) {
      if (j >= K.rows) throw ContractError("segment_attention: key row out of range");
    }
    auto& w = weights[i];
    w.assign(heads * seg.size(), 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      double* wh = w.data() + h * seg.size();
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < seg.size(); ++s) {
        double dot = 0.0;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) dot += Q(i, c) * K(seg[s], c);
        wh[s] = dot * scale;
        mx = std::max(mx, wh[s]);
      }
      double z = 0.0;
      for (std::size_t s = 0; s < seg.size(); ++s) z += (wh[s] = std::exp(wh[s] - mx));
      for (std::size_t s = 0; s < seg.size(); ++s) {
        wh[s] /= z;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) out(i, c) += wh[s] * V(seg[s], c);
      }
    }
  }
  return make(std::move(out), {q, k, v},
              [segments, weights = std::move(weights), heads, dh, scale](Node& self) {
                const Matrix& Q = self.parents[0]->value;
                const Matrix& K = self.parents[1]->value;
                const Matrix& V = self.parents[2]->value;
                Matrix* gq = pgrad(self, 0);
                Matrix* gk = pgrad(self, 1);
                Matrix* gv = pgrad(self, 2);
                const Matrix& go = self.grad;
                std::vector<double> gs;
                for (std::size_t i = 0; i < Q.rows; ++i) {
                  const auto& seg = segments[i];
                  gs.resize(seg.size());
                  for (std::size_t h = 0; h < heads; ++h) {
                    const double* wh = weights[i].data() + h * seg.size();
                    const std::size_t c0 = h * dh, c1 = (h + 1) * dh;
                    double wdot = 0.0;
                    for (std::size_t s = 0; s < seg.size(); ++s) {
                      double gw = 0.0;
                      for (std::size_t c = c0; c < c1; ++c) gw += go(i, c) * V(seg[s], c);
                      gs[s] = gw;
                      wdot += wh[s] * gw;
                      if (gv) {
                        for (std::size_t c = c0; c < c1; ++c) (*gv)(seg[s], c) += wh[s] * go(i, c);
                      }
                    }
                    for (std::size_t s = 0; s < seg.size(); ++s) {
                      const double g = wh[s] * (gs[s] - wdot) * scale;
                      if (gq) {
                        for (std::size_t c = c0; c < c1; ++c) (*gq)(i, c) += g * K(seg[s], c);
                      }
                      if (gk) {
                        for (std::size_t c = c0; c < c1; ++c) (*gk)(seg[s], c) += g * Q(i, c);
                      }
                    }
                  }
                }
              });
}

}  // namespace vision::nd
