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

#include <vector>

#include "vision/context_net.hpp"
#include "vision/ndmath/value.hpp"

namespace vision {

/// Mean label-smoothed cross-entropy over query rows of `logits`. The true
/// class gets 1 - epsilon, the others epsilon / (N - 1).
nd::Value ce_label_smoothing_loss(const nd::Value& logits, const std::vector<RelLabel>& truth,
                                  double epsilon);

/// Supervised contrastive loss between L2-normalized query and support
/// embeddings, averaged over heads and queries. Positives are support nodes
/// sharing the query's label.
nd::Value contrastive_loss(const std::vector<nd::Value>& head_embeddings,
                           const EpisodeBatch& batch, const std::vector<RelLabel>& truth,
                           double temperature);

struct LossWeights {
  double label_smoothing = 0.1;
  double contrastive_weight = 0.5;
  double contrastive_temperature = 0.5;
};

struct LossParts {
  nd::Value total;  ///< ce + weight · contrastive
  nd::Value ce;
  nd::Value contrastive;
};

/// Both terms are always computed, even at weight 0.
LossParts episode_loss(const ForwardResult& fwd, const EpisodeBatch& batch,
                       const std::vector<RelLabel>& truth, const LossWeights& w);

}  // namespace vision
