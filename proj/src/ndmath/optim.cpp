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

#include "vision/ndmath/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vision/error.hpp"

namespace vision::nd {

double cosine_lr(const AdamWConfig& cfg, std::size_t step) {
  if (cfg.horizon == 0) return cfg.lr_floor;
  const double t = static_cast<double>(std::min(step, cfg.horizon)) / static_cast<double>(cfg.horizon);
  return cfg.lr_floor + (cfg.lr - cfg.lr_floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void adamw_step(ParamStore& params, OptimizerState& state) {
  if (!params.any_grad()) throw ContractError("adamw_step: no gradients; run backward() first");
  const auto& c = state.config;
  const double lr = cosine_lr(c, state.step);
  ++state.step;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params.entries()) {
    Value param = p;
    Matrix& w = param.mutable_data();
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.data.empty()) {
      m = Matrix(w.rows, w.cols);
      v = Matrix(w.rows, w.cols);
    }
    const Matrix g = param.grad();
    for (std::size_t i = 0; i < w.data.size(); ++i) {
      w.data[i] *= 1.0 - lr * c.weight_decay;
      m.data[i] = c.beta1 * m.data[i] + (1.0 - c.beta1) * g.data[i];
      v.data[i] = c.beta2 * v.data[i] + (1.0 - c.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bias1;
      const double vhat = v.data[i] / bias2;
      w.data[i] -= lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
  params.zero_grad();
}

}  // namespace vision::nd
