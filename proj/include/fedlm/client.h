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

#ifndef FEDLM_CLIENT_H_
#define FEDLM_CLIENT_H_

#include <cstdint>
#include <vector>

#include "fedlm/corpus.h"
#include "fedlm/loss.h"
#include "fedlm/model.h"
#include "fedlm/param_vector.h"

namespace fedlm {

// How a client's aggregation weight is counted.
enum class WeightMode {
  kAllWords,    // every local word, including thresholded-out utterances
  kUsedTokens,  // only words that contributed to a gradient step
};

struct ClientConfig {
  int local_epochs = 1;
  int batch_size = 8;
  double local_lr = 1.0;
  LossMode loss = LossMode::All();
  WeightMode weight_mode = WeightMode::kAllWords;
  uint64_t shuffle_seed = 0;

  void Validate() const;
};

struct ClientUpdate {
  DeviceId device_id = 0;
  // theta_t - theta_final.
  ParamVector delta;
  int64_t weight = 0;
  int64_t tokens_trained = 0;
  int64_t batches_run = 0;
  int64_t batches_skipped = 0;
  // Mean loss over the batches that were run (0 when none ran).
  double mean_loss = 0.0;
};

// K epochs of mini-batch SGD from `global_params` over one device's data.
// Batch order is reshuffled every epoch from (shuffle_seed, device, round,
// epoch), so results do not depend on which thread runs the client.
ClientUpdate ClientTrain(const LanguageModel& model,
                         const ParamVector& global_params,
                         const std::vector<Utterance>& device_utts,
                         const ClientConfig& cfg, DeviceId device_id = 0,
                         int64_t round = 0);

}  // namespace fedlm

#endif  // FEDLM_CLIENT_H_
