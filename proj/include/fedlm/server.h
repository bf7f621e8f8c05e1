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

#ifndef FEDLM_SERVER_H_
#define FEDLM_SERVER_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedlm/client.h"
#include "fedlm/corpus.h"
#include "fedlm/model.h"
#include "fedlm/param_vector.h"
#include "fedlm/privacy.h"

namespace fedlm {

struct FedAdamConfig {
  double global_lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-7;
  int64_t rounds = 1000;
  int cohort_size = 100;
  // Devices with fewer local words never join a cohort.
  int64_t min_device_words = 1;
  uint64_t sample_seed = 0;

  void Validate() const;
};

struct ServerState {
  ParamVector params;
  ParamVector m;
  ParamVector v;
  // 1-based index of the next FedAdam step.
  int64_t round = 1;

  // Zero moments, round 1.
  static ServerState Initial(ParamVector params);
  bool operator==(const ServerState& other) const = default;
};

// "#server <round> <n>" then params, m and v, one value per line each.
void SaveServerState(const ServerState& state, const std::string& path);
ServerState LoadServerState(const std::string& path);

// Uniform sample of `cohort_size` eligible devices without replacement,
// keyed by (seed, round). Returned ascending.
std::vector<DeviceId> SampleCohort(std::span<const DeviceId> eligible,
                                   int cohort_size, int64_t round,
                                   uint64_t seed);

// Word-count weighted mean of the client deltas, summed in ascending
// device-id order.
ParamVector Aggregate(const std::vector<ClientUpdate>& updates);

// One Adam step on the pseudo-gradient `delta`, with bias correction.
ServerState FedAdamStep(const ServerState& state, const ParamVector& delta,
                        const FedAdamConfig& cfg);

struct RoundMetrics {
  int64_t round = 0;
  int cohort_size = 0;
  int64_t total_weight = 0;
  int64_t tokens_trained = 0;
  double mean_client_loss = 0.0;
  // Largest L2 norm among clipped deltas (DP rounds only).
  double max_clipped_norm = 0.0;
};

// Device shards plus the subset that may be sampled.
struct FederatedData {
  std::map<DeviceId, std::vector<Utterance>> shards;
  std::vector<DeviceId> eligible;

  static FederatedData FromCorpus(const std::vector<Utterance>& utts,
                                  int64_t min_device_words);
};

struct RoundOptions {
  ClientConfig client;
  FedAdamConfig server;
  std::optional<DpConfig> dp;
  int workers = 1;
};

// Samples a cohort, trains each member from state.params, aggregates and
// applies FedAdam. With DP each delta is clipped and the average is
// (sum of clipped deltas + Gaussian noise) / cohort size, without
// word-count weights.
std::pair<ServerState, RoundMetrics> RunRound(const LanguageModel& model,
                                              const ServerState& state,
                                              const FederatedData& data,
                                              const RoundOptions& options);

struct MetricsRow {
  int64_t round = 0;
  std::optional<double> train_loss;
  double heldout_ppl = 0.0;
  std::optional<double> epsilon;
};

struct FederationResult {
  std::vector<MetricsRow> history;
  ServerState final_state;
  double max_clipped_norm = 0.0;
};

// Runs options.server.rounds rounds from `initial`, evaluating held-out
// perplexity at round 0, every `eval_every` rounds and after the last one.
// train_loss is the mean client loss over rounds since the previous row.
FederationResult RunFederation(const LanguageModel& model,
                               const ParamVector& initial,
                               const FederatedData& data,
                               const std::vector<Utterance>& heldout,
                               const RoundOptions& options, int64_t eval_every);

// round<TAB>train_loss<TAB>heldout_ppl<TAB>epsilon, "-" for missing values.
std::string FormatMetricsRow(const MetricsRow& row);
void WriteMetrics(const std::vector<MetricsRow>& history, const std::string& path);
std::vector<MetricsRow> ReadMetrics(const std::string& path);

}  // namespace fedlm

#endif  // FEDLM_SERVER_H_
