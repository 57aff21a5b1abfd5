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

#include <cmath>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "vision/context_net.hpp"
#include "vision/graph_store.hpp"
#include "vision/matrix.hpp"
#include "vision/ndmath/param_store.hpp"
#include "vision/random.hpp"

namespace vision::fixtures {

/// Erdős–Rényi style graph with Gaussian features and labels in [0, classes).
inline GraphStore random_graph(std::size_t n, double edge_prob, std::size_t dim,
                               std::size_t classes, std::uint64_t seed) {
  Rng rng = make_rng(seed, 77);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix x(n, dim);
  for (double& v : x.data) v = normal(rng);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (unit(rng) < edge_prob) edges.emplace_back(u, v);
    }
  }
  std::vector<ClassId> labels(n);
  for (std::size_t v = 0; v < n; ++v) labels[v] = static_cast<ClassId>(v % classes);
  return GraphStore::make(std::move(x), edges, std::move(labels));
}

/// Dense D̃^{-1/2}(A + I)D̃^{-1/2} X with an explicit n×n matrix.
inline Matrix dense_smooth(const GraphStore& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> a(n * n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    a[v * n + v] = 1.0;
    for (NodeId u : g.neighbors(static_cast<NodeId>(v))) a[v * n + u] = 1.0;
  }
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) deg[i] += a[i * n + j];
  }
  const Matrix& x = g.features();
  Matrix out(n, x.cols);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = a[i * n + j] / std::sqrt(deg[i] * deg[j]);
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < x.cols; ++c) out(i, c) += w * x(j, c);
    }
  }
  return out;
}

/// Small network for fast numerical checks.
inline NetConfig tiny_net(std::size_t in_dim) {
  NetConfig c;
  c.in_dim = in_dim;
  c.hidden_dim = 8;
  c.attn_heads = 2;
  c.num_layers = 2;
  c.ffn_dim = 16;
  c.readout_heads = 2;
  c.readout_dim = 4;
  c.k_neigh = 3;
  c.max_n_way = 4;
  c.init_std = 0.5;
  return c;
}

/// Labeled episode over g using the first nodes of each of n_way classes.
inline Episode labeled_episode(const GraphStore& g, std::size_t n_way, std::size_t k,
                               std::size_t m, std::uint64_t seed) {
  ClassSplit split;
  for (std::size_t c = 0; c < g.num_classes(); ++c) split.test_classes.push_back(static_cast<ClassId>(c));
  Rng rng = make_rng(seed, 5);
  return gen_eval_episode(g, split, Phase::kTest, n_way, k, m, rng);
}

inline double norm(const Matrix& m) {
  double s = 0.0;
  for (double x : m.data) s += x * x;
  return std::sqrt(s);
}

/// Worst per-tensor relative error ‖analytic − numeric‖ / max(‖·‖) of the
/// gradient of loss_fn over every parameter, by central differences.
template <typename LossFn>
double worst_gradient_error(nd::ParamStore& params, LossFn loss_fn, double step,
                            std::string* worst_name = nullptr) {
  nd::Value loss = loss_fn();
  params.zero_grad();
  loss.backward();
  std::map<std::string, Matrix> analytic;
  for (auto& [name, p] : params.entries()) analytic[name] = p.grad();
  params.zero_grad();
  double worst = 0.0;
  for (auto& [name, ignored] : params.entries()) {
    nd::Value& p = params.at(name);
    Matrix numeric(p.rows(), p.cols());
    for (std::size_t i = 0; i < p.data().data.size(); ++i) {
      const double keep = p.data().data[i];
      double f_plus, f_minus;
      {
        nd::NoGradGuard ng;
        p.mutable_data().data[i] = keep + step;
        f_plus = loss_fn().item();
        p.mutable_data().data[i] = keep - step;
        f_minus = loss_fn().item();
      }
      p.mutable_data().data[i] = keep;
      numeric.data[i] = (f_plus - f_minus) / (2.0 * step);
    }
    Matrix diff = numeric;
    for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= analytic[name].data[i];
    const double scale = std::max(norm(numeric), norm(analytic[name]));
    const double err = scale < 1e-10 ? norm(diff) : norm(diff) / scale;
    if (err > worst) {
      worst = err;
      if (worst_name) *worst_name = name;
    }
  }
  return worst;
}

}  // namespace vision::fixtures
