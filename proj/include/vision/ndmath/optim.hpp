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
#include <map>
#include <string>

#include "vision/ndmath/param_store.hpp"

namespace vision::nd {

struct AdamWConfig {
  double lr = 2e-4;
  double lr_floor = 1e-6;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Steps over which the learning rate anneals from lr to lr_floor.
  std::size_t horizon = 5000;
};

/// Cosine-annealed learning rate after `step` completed updates; clamps to
/// lr_floor past the horizon.
double cosine_lr(const AdamWConfig& cfg, std::size_t step);

struct OptimizerState {
  AdamWConfig config;
  std::size_t step = 0;
  std::map<std::string, Matrix> first_moment;
  std::map<std::string, Matrix> second_moment;

  explicit OptimizerState(AdamWConfig cfg = {}) : config(cfg) {}
};

/// One AdamW update with decoupled weight decay, then releases all
/// gradients. Throws ContractError when no parameter carries a gradient.
void adamw_step(ParamStore& params, OptimizerState& state);

}  // namespace vision::nd
