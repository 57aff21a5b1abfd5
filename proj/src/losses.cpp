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

#include "vision/losses.hpp"

#include "vision/error.hpp"

namespace vision {

using nd::Value;

Value ce_label_smoothing_loss(const Value& logits, const std::vector<RelLabel>& truth,
                              double epsilon) {
  const std::size_t q = logits.rows();
  const std::size_t n = logits.cols();
  if (truth.size() != q) throw ContractError("ce: truth size does not match logits rows");
  if (q == 0) throw ContractError("ce: no query rows");
  if (epsilon < 0.0 || epsilon >= 1.0) throw ContractError("ce: epsilon must be in [0, 1)");
  const double off = n > 1 ? epsilon / static_cast<double>(n - 1) : 0.0;
  const double on = n > 1 ? 1.0 - epsilon : 1.0;
  Matrix target(q, n, off);
  for (std::size_t i = 0; i < q; ++i) {
    if (truth[i] >= n) {
      throw ContractError("ce: label " + std::to_string(truth[i]) + " >= " + std::to_string(n) +
                          " classes");
    }
    target(i, truth[i]) = on;
  }
  Value weighted = nd::mul(nd::row_log_softmax(logits), Value::constant(std::move(target)));
  return nd::affine(nd::sum(weighted), -1.0 / static_cast<double>(q));
}

Value contrastive_loss(const std::vector<Value>& head_embeddings, const EpisodeBatch& batch,
                       const std::vector<RelLabel>& truth, double temperature) {
  if (head_embeddings.empty()) throw ContractError("contrastive: no heads");
  if (temperature <= 0.0) throw ContractError("contrastive: temperature must be positive");
  if (truth.size() != batch.num_query) throw ContractError("contrastive: truth size mismatch");
  const auto srows = batch.support_rows();
  const auto qrows = batch.query_rows();
  Matrix all(qrows.size(), srows.size(), 1.0);
  Matrix pos(qrows.size(), srows.size(), 0.0);
  for (std::size_t i = 0; i < qrows.size(); ++i) {
    bool any = false;
    for (std::size_t j = 0; j < srows.size(); ++j) {
      if (batch.roles[srows[j]] == truth[i]) {
        pos(i, j) = 1.0;
        any = true;
      }
    }
    if (!any) throw ContractError("contrastive: query " + std::to_string(i) + " has no positive");
  }
  Value total;
  for (const Value& e : head_embeddings) {
    Value zn = nd::normalize_rows(e);
    Value sim = nd::affine(nd::matmul_nt(nd::gather_rows(zn, qrows), nd::gather_rows(zn, srows)),
                           1.0 / temperature);
    Value term = nd::sum(nd::sub(nd::row_logsumexp_masked(sim, all),
                                 nd::row_logsumexp_masked(sim, pos)));
    total = total ? nd::add(total, term) : term;
  }
  const double denom = static_cast<double>(head_embeddings.size() * qrows.size());
  return nd::affine(total, 1.0 / denom);
}

LossParts episode_loss(const ForwardResult& fwd, const EpisodeBatch& batch,
                       const std::vector<RelLabel>& truth, const LossWeights& w) {
  if (w.contrastive_weight < 0.0) throw ContractError("contrastive weight must be >= 0");
  LossParts parts;
  parts.ce = ce_label_smoothing_loss(fwd.logits, truth, w.label_smoothing);
  parts.contrastive =
      contrastive_loss(fwd.head_embeddings, batch, truth, w.contrastive_temperature);
  parts.total = w.contrastive_weight == 0.0
                    ? parts.ce
                    : nd::add(parts.ce, nd::affine(parts.contrastive, w.contrastive_weight));
  return parts;
}

}  // namespace vision
