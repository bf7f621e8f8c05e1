// Copyright 2026 The fedlm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedlm/client.h"

#include <algorithm>
#include <numeric>

#include "fedlm/errors.h"
#include "fedlm/rng.h"

namespace fedlm {

void ClientConfig::Validate() const {
  if (local_epochs < 1) throw UsageError("local_epochs must be >= 1");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (!(local_lr >= 0.0)) throw UsageError("local_lr must be non-negative");
}

ClientUpdate ClientTrain(const LanguageModel& model,
                         const ParamVector& global_params,
                         const std::vector<Utterance>& device_utts,
                         const ClientConfig& cfg, DeviceId device_id,
                         int64_t round) {
  cfg.Validate();
  if (device_utts.empty()) throw DataError("no local data");

  ClientUpdate update;
  update.device_id = device_id;
  ParamVector theta = global_params;
  std::vector<size_t> order(device_utts.size());
  std::vector<Utterance> batch;
  double loss_sum = 0.0;

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = MakeRng(cfg.shuffle_seed, "client-shuffle",
                      {static_cast<uint64_t>(device_id),
                       static_cast<uint64_t>(round),
                       static_cast<uint64_t>(epoch)});
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[UniformIndex(rng, i)]);
    }
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (size_t k = start; k < end; ++k) batch.push_back(device_utts[order[k]]);
      BatchLoss loss = ComputeBatchLoss(model, theta, batch, cfg.loss);
      if (loss.skipped) {
        ++update.batches_skipped;
        continue;
      }
      theta.Axpy(-cfg.local_lr, loss.gradient);
      loss_sum += loss.value;
      ++update.batches_run;
      update.tokens_trained += loss.tokens_used;
    }
  }

  update.delta = global_params - theta;
  update.weight = cfg.weight_mode == WeightMode::kAllWords
                      ? CountTokens(device_utts)
                      : update.tokens_trained / cfg.local_epochs;
  if (update.batches_run > 0) {
    update.mean_loss = loss_sum / static_cast<double>(update.batches_run);
  }
  return update;
}

}  // namespace fedlm
