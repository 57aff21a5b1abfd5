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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "support.hpp"
#include "vision/error.hpp"
#include "vision/ndmath/value.hpp"

using namespace vision;
using namespace vision::nd;

namespace {

Matrix randm(std::size_t r, std::size_t c, std::uint64_t seed, double shift = 0.0) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(r, c);
  for (double& x : m.data) x = d(rng) + shift;
  return m;
}

struct OpCase {
  const char* name;
  std::function<Value(const Value&, const Value&)> f;
  std::size_t ar, ac, br, bc;
  double shift = 0.0;
};

// Reduces an op output to a scalar with a fixed random weighting so every
// output entry contributes a distinct gradient.
Value weigh(const Value& y) {
  return sum(mul(y, Value::constant(randm(y.rows(), y.cols(), 999))));
}

}  // namespace

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const OpCase& c = GetParam();
  ParamStore ps;
  ps.add("a", randm(c.ar, c.ac, 1, c.shift));
  ps.add("b", randm(c.br, c.bc, 2, c.shift));
  auto loss = [&] { return weigh(c.f(ps.at("a"), ps.at("b"))); };
  std::string worst;
  EXPECT_LT(fixtures::worst_gradient_error(ps, loss, 1e-6, &worst), 1e-6) << c.name << " " << worst;
}

const std::vector<std::vector<std::size_t>> kSegments = {{0, 2}, {1}, {0, 1, 2, 3}};

INSTANTIATE_TEST_SUITE_P(
    AllOps, OpGradient,
    ::testing::Values(
        OpCase{"add_same", [](auto& a, auto& b) { return add(a, b); }, 3, 4, 3, 4},
        OpCase{"add_row", [](auto& a, auto& b) { return add(a, b); }, 3, 4, 1, 4},
        OpCase{"sub_scalar", [](auto& a, auto& b) { return sub(a, b); }, 3, 4, 1, 1},
        OpCase{"mul_col", [](auto& a, auto& b) { return mul(a, b); }, 3, 4, 3, 1},
        OpCase{"mul_row", [](auto& a, auto& b) { return mul(a, b); }, 3, 4, 1, 4},
        OpCase{"affine_exp", [](auto& a, auto&) { return exp(affine(a, 0.5, 0.1)); }, 3, 4, 1, 1},
        OpCase{"log", [](auto& a, auto&) { return log(a); }, 3, 4, 1, 1, 5.0},
        OpCase{"sigmoid_tanh", [](auto& a, auto&) { return tanh(sigmoid(a)); }, 3, 4, 1, 1},
        OpCase{"gelu", [](auto& a, auto&) { return gelu(a); }, 3, 4, 1, 1},
        OpCase{"clamp_inside", [](auto& a, auto&) { return clamp(a, -10.0, 10.0); }, 3, 4, 1, 1},
        OpCase{"matmul", [](auto& a, auto& b) { return matmul(a, b); }, 3, 4, 4, 5},
        OpCase{"matmul_nt", [](auto& a, auto& b) { return matmul_nt(a, b); }, 3, 4, 5, 4},
        OpCase{"transpose", [](auto& a, auto&) { return transpose(a); }, 3, 4, 1, 1},
        OpCase{"concat", [](auto& a, auto& b) { return concat_rows({concat_cols(a, b), concat_cols(b, a)}); }, 3, 2, 3, 2},
        OpCase{"gather", [](auto& a, auto&) { return gather_rows(a, {2, 0, 2}); }, 3, 4, 1, 1},
        OpCase{"means", [](auto& a, auto&) { return concat_rows({mean_rows(a), group_mean_rows(a, {{0, 1}, {2}})}); }, 3, 4, 1, 1},
        OpCase{"mean", [](auto& a, auto&) { return mean(a); }, 3, 4, 1, 1},
        OpCase{"softmax", [](auto& a, auto&) { return row_softmax(a); }, 3, 4, 1, 1},
        OpCase{"log_softmax", [](auto& a, auto&) { return row_log_softmax(a); }, 3, 4, 1, 1},
        OpCase{"layer_norm", [](auto& a, auto&) { return layer_norm(a); }, 3, 6, 1, 1},
        OpCase{"normalize_rows", [](auto& a, auto&) { return normalize_rows(a); }, 3, 4, 1, 1},
        OpCase{"cosine_rows", [](auto& a, auto& b) { return cosine_rows(a, b); }, 3, 4, 2, 4},
        OpCase{"logsumexp_masked",
               [](auto& a, auto&) {
                 Matrix mask(3, 4, 1.0);
                 mask(0, 1) = 0.0;
                 mask(2, 3) = 0.0;
                 return row_logsumexp_masked(a, mask);
               },
               3, 4, 1, 1},
        OpCase{"segment_attention",
               [](auto& a, auto& b) { return segment_attention(a, b, affine(b, 0.7), kSegments, 2); },
               3, 4, 4, 4}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(Value, ForwardValuesOfSimpleOps) {
  Value a = Value::constant(Matrix(1, 2, 0.0));
  Matrix sm = row_softmax(a).data();
  EXPECT_DOUBLE_EQ(sm(0, 0), 0.5);
  Value x = Value::scalar(1.0);
  EXPECT_NEAR(sigmoid(x).item(), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(gelu(x).item(), 0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0))), 1e-15);
  Matrix row(1, 3);
  row(0, 0) = 1; row(0, 1) = 2; row(0, 2) = 3;
  Matrix ln = layer_norm(Value::constant(row)).data();
  EXPECT_NEAR(ln(0, 0) + ln(0, 1) + ln(0, 2), 0.0, 1e-12);
  EXPECT_NEAR(ln(0, 2), std::sqrt(1.5) * (1.0 / std::sqrt(1.0 + 1.5e-5)), 1e-6);
}

TEST(Value, SingleKeyAttentionReturnsThatValue) {
  Value q = Value::constant(randm(2, 4, 3));
  Value k = Value::constant(randm(3, 4, 4));
  Value v = Value::constant(randm(3, 4, 5));
  Matrix out = segment_attention(q, k, v, {{1}, {2}}, 2).data();
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_DOUBLE_EQ(out(0, j), v.data()(1, j));
    EXPECT_DOUBLE_EQ(out(1, j), v.data()(2, j));
  }
}

TEST(Value, ZeroRowsGetZeroCosineAndNoNan) {
  Value a = Value::parameter(Matrix(1, 3, 0.0));
  Value b = Value::parameter(randm(2, 3, 6));
  Value c = cosine_rows(a, b);
  EXPECT_DOUBLE_EQ(c.data()(0, 0), 0.0);
  Value loss = sum(c);
  loss.backward();
  for (double g : a.grad().data) EXPECT_EQ(g, 0.0);
  Value n = normalize_rows(Value::constant(Matrix(2, 3, 0.0)));
  for (double x : n.data().data) EXPECT_EQ(x, 0.0);
}

TEST(Value, SecondBackwardOnSameGraphThrows) {
  Value p = Value::parameter(Matrix(1, 1, 2.0));
  Value loss = mul(p, p);
  loss.backward();
  EXPECT_DOUBLE_EQ(p.grad()(0, 0), 4.0);
  EXPECT_THROW(loss.backward(), ContractError);
}

TEST(Value, GradientsAccumulateAcrossGraphs) {
  Value p = Value::parameter(Matrix(1, 1, 3.0));
  affine(p, 2.0).backward();
  affine(p, 5.0).backward();
  EXPECT_DOUBLE_EQ(p.grad()(0, 0), 7.0);
  p.zero_grad();
  EXPECT_FALSE(p.has_grad());
}

TEST(Value, BackwardNeedsScalar) {
  Value p = Value::parameter(Matrix(2, 2, 1.0));
  EXPECT_THROW(p.backward(), ContractError);
}

TEST(Value, ShapeMismatchesAreContractErrors) {
  Value a = Value::constant(Matrix(2, 3));
  EXPECT_THROW(add(a, Value::constant(Matrix(3, 2))), ContractError);
  EXPECT_THROW(matmul(a, a), ContractError);
  EXPECT_THROW(gather_rows(a, {5}), ContractError);
  EXPECT_THROW(group_mean_rows(a, {{}}), ContractError);
  EXPECT_THROW(log(Value::constant(Matrix(1, 1, -1.0))), ContractError);
  EXPECT_THROW(segment_attention(a, a, a, {{0}, {}}, 1), ContractError);
  EXPECT_THROW(row_logsumexp_masked(a, Matrix(2, 3, 0.0)), ContractError);
}

TEST(Value, NoGradGuardRecordsNothing) {
  Value p = Value::parameter(Matrix(1, 1, 1.0));
  Value y;
  {
    NoGradGuard g;
    EXPECT_FALSE(grad_enabled());
    y = mul(p, p);
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_FALSE(y.requires_grad());
  EXPECT_FALSE(p.has_grad());
}

TEST(Value, ClampBlocksGradientOutsideRange) {
  Value p = Value::parameter(Matrix(1, 2, 0.0));
  p.mutable_data()(0, 0) = 200.0;
  p.mutable_data()(0, 1) = 5.0;
  sum(clamp(p, 0.01, 100.0)).backward();
  EXPECT_EQ(p.grad()(0, 0), 0.0);
  EXPECT_EQ(p.grad()(0, 1), 1.0);
}
