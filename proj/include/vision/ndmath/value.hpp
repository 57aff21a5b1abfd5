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

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vision/matrix.hpp"

namespace vision::nd {

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  bool has_grad = false;
  bool requires_grad = false;
  bool backward_ran = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Matrix& grad_buffer() {
    if (!has_grad) {
      grad = Matrix(value.rows, value.cols);
      has_grad = true;
    }
    return grad;
  }
};

}  // namespace detail

/// Handle to a node of a dynamically built computation graph. Copies share
/// the node. All tensors are 2-D; a scalar is 1×1.
class Value {
 public:
  Value() = default;

  /// Leaf that never receives a gradient.
  static Value constant(Matrix m);
  /// Leaf whose gradient is accumulated by backward().
  static Value parameter(Matrix m);
  static Value scalar(double x) { return constant(Matrix(1, 1, x)); }

  std::size_t rows() const { return node_->value.rows; }
  std::size_t cols() const { return node_->value.cols; }
  std::string shape_str() const;

  const Matrix& data() const { return node_->value; }
  /// In-place access for optimizers and finite-difference probes.
  Matrix& mutable_data() { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->has_grad; }
  /// Gradient buffer; a zero matrix of the value's shape when none was
  /// accumulated.
  Matrix grad() const;
  /// Drops the gradient buffer (equivalent to zeroing it).
  void zero_grad();

  /// Reverse sweep from this scalar. Populates grad() of every parameter
  /// reachable from it. A graph can be swept once; a second call throws
  /// ContractError.
  void backward();

  explicit operator bool() const { return static_cast<bool>(node_); }
  const detail::Node* node() const { return node_.get(); }

  // Used by op implementations.
  explicit Value(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  const std::shared_ptr<detail::Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// While alive, ops on this thread record no backward information.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// ---- elementwise and broadcasting ----------------------------------------

/// a + b; b may match a, be a 1×cols row, or a 1×1 scalar.
Value add(const Value& a, const Value& b);
/// a - b with the same broadcasting as add().
Value sub(const Value& a, const Value& b);
/// a ⊙ b; b may match a, be a 1×cols row, a rows×1 column or a 1×1 scalar.
Value mul(const Value& a, const Value& b);
/// alpha·a + beta
Value affine(const Value& a, double alpha, double beta = 0.0);
Value exp(const Value& a);
/// Natural log; the input must be positive.
Value log(const Value& a);
/// Gradient passes only where lo < a < hi.
Value clamp(const Value& a, double lo, double hi);
Value sigmoid(const Value& a);
Value tanh(const Value& a);
/// Exact (erf) GELU.
Value gelu(const Value& a);

// ---- linear algebra ------------------------------------------------------

Value matmul(const Value& a, const Value& b);
/// a · bᵀ
Value matmul_nt(const Value& a, const Value& b);
Value transpose(const Value& a);

// ---- structure -----------------------------------------------------------

Value concat_cols(const Value& a, const Value& b);
Value concat_rows(const std::vector<Value>& parts);
Value gather_rows(const Value& a, const std::vector<std::size_t>& rows);

// ---- reductions ----------------------------------------------------------

Value sum(const Value& a);
Value mean(const Value& a);
/// 1×cols mean over rows.
Value mean_rows(const Value& a);
/// groups.size()×cols; row g is the mean of the listed rows of a.
Value group_mean_rows(const Value& a, const std::vector<std::vector<std::size_t>>& groups);

// ---- row-wise normalizations ---------------------------------------------

Value row_softmax(const Value& a);
Value row_log_softmax(const Value& a);
/// Standardizes each row (no affine part). A constant row maps to zeros.
Value layer_norm(const Value& a, double eps = 1e-5);
/// Scales each row to unit L2 norm; zero rows stay zero with zero gradient.
Value normalize_rows(const Value& a);
/// Pairwise cosine matrix (a.rows × b.rows). A zero-norm row gives cosine 0
/// and no gradient flows through it.
Value cosine_rows(const Value& a, const Value& b);
/// rows×1: log Σ_{j: mask(i,j)≠0} exp(a(i,j)). Every row needs one unmasked
/// entry.
Value row_logsumexp_masked(const Value& a, const Matrix& mask);

// ---- attention -----------------------------------------------------------

/// Multi-head scaled dot-product attention where query row i attends only to
/// the key/value rows listed in segments[i]. q is rows×d, k and v are n×d,
/// d divisible by heads; result is rows×d (heads concatenated).
Value segment_attention(const Value& q, const Value& k, const Value& v,
                        const std::vector<std::vector<std::size_t>>& segments,
                        std::size_t heads);

}  // namespace vision::nd
