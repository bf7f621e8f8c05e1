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

#include "fedlm/server.h"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <limits>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fedlm/errors.h"
#include "fedlm/parallel.h"
#include "fedlm/rng.h"

namespace fedlm {
namespace {

double ParseValue(const std::string& s, const std::string& path, int line_no) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || errno != 0 || *end != '\0') {
    throw DataError(path + ":" + std::to_string(line_no) + ": bad value '" + s + "'");
  }
  return v;
}

}  // namespace

void FedAdamConfig::Validate() const {
  if (!(global_lr >= 0.0)) throw UsageError("server.global_lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw UsageError("server.beta1 must be in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw UsageError("server.beta2 must be in [0,1)");
  if (!(epsilon > 0.0)) throw UsageError("server.epsilon must be > 0");
  if (rounds < 0) throw UsageError("server.rounds must be >= 0");
  if (cohort_size < 1) throw UsageError("server.cohort_size must be >= 1");
  if (min_device_words < 0) throw UsageError("server.min_device_words must be >= 0");
}

ServerState ServerState::Initial(ParamVector params) {
  ServerState s;
  s.m = ParamVector(params.size());
  s.v = ParamVector(params.size());
  s.params = std::move(params);
  s.round = 1;
  return s;
}

void SaveServerState(const ServerState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "#server " << state.round << ' ' << state.params.size() << '\n';
  for (const ParamVector* vec : {&state.params, &state.m, &state.v}) {
    for (double x : vec->values()) out << FormatExact(x) << '\n';
  }
  if (!out) throw DataError("write failed for " + path);
}

ServerState LoadServerState(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::string line;
  std::getline(in, line);
  std::istringstream header(line);
  std::string tag;
  ServerState s;
  size_t n = 0;
  if (!(header >> tag >> s.round >> n) || tag != "#server" || s.round < 1) {
    throw DataError(path + ":1: expected '#server <round> <n>'");
  }
  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) values.push_back(ParseValue(line, path, ++line_no));
  if (values.size() != 3 * n) {
    throw DataError(path + ": expected " + std::to_string(3 * n) + " values");
  }
  s.params = ParamVector(std::vector<double>(values.begin(), values.begin() + n));
  s.m = ParamVector(std::vector<double>(values.begin() + n, values.begin() + 2 * n));
  s.v = ParamVector(std::vector<double>(values.begin() + 2 * n, values.end()));
  return s;
}

std::vector<DeviceId> SampleCohort(std::span<const DeviceId> eligible,
                                   int cohort_size, int64_t round,
                                   uint64_t seed) {
  if (cohort_size < 1) throw UsageError("cohort size must be >= 1");
  if (static_cast<size_t>(cohort_size) > eligible.size()) {
    throw DataError("too few eligible devices: need " + std::to_string(cohort_size) +
                    ", have " + std::to_string(eligible.size()));
  }
  std::vector<DeviceId> pool(eligible.begin(), eligible.end());
  std::sort(pool.begin(), pool.end());
  Rng rng = MakeRng(seed, "cohort", {static_cast<uint64_t>(round)});
  for (int i = 0; i < cohort_size; ++i) {
    const auto j = i + UniformIndex(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(cohort_size);
  std::sort(pool.begin(), pool.end());
  return pool;
}

ParamVector Aggregate(const std::vector<ClientUpdate>& updates) {
  if (updates.empty()) throw DataError("cannot aggregate an empty update set");
  std::vector<const ClientUpdate*> ordered;
  for (const auto& u : updates) ordered.push_back(&u);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const ClientUpdate* a, const ClientUpdate* b) {
                     return a->device_id < b->device_id;
                   });
  const size_t n = ordered.front()->delta.size();
  ParamVector sum(n);
  double total = 0.0;
  for (const ClientUpdate* u : ordered) {
    if (u->delta.size() != n) throw DataError("client deltas differ in length");
    if (u->weight < 0) throw DataError("negative client weight");
    const double w = static_cast<double>(u->weight);
    sum.Axpy(w, u->delta);
    total += w;
  }
  if (total <= 0.0) throw DataError("total aggregation weight is zero");
  for (size_t i = 0; i < n; ++i) sum[i] /= total;
  return sum;
}

ServerState FedAdamStep(const ServerState& state, const ParamVector& delta,
                        const FedAdamConfig& cfg) {
  const size_t n = state.params.size();
  if (delta.size() != n || state.m.size() != n || state.v.size() != n) {
    throw DataError("FedAdam dimension mismatch");
  }
  if (state.round < 1) throw DataError("server round must be >= 1");
  ServerState next = state;
  const double t = static_cast<double>(state.round);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (size_t i = 0; i < n; ++i) {
    const double d = delta[i];
    next.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * d;
    next.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * d * d;
    const double m_hat = next.m[i] / bias1;
    const double v_hat = next.v[i] / bias2;
    next.params[i] = state.params[i] - cfg.global_lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
  next.round = state.round + 1;
  return next;
}

FederatedData FederatedData::FromCorpus(const std::vector<Utterance>& utts,
                                        int64_t min_device_words) {
  FederatedData data;
  data.shards = ShardByDevice(utts);
  for (const auto& [device, shard] : data.shards) {
    if (CountTokens(shard) >= min_device_words && !shard.empty()) {
      data.eligible.push_back(device);
    }
  }
  return data;
}

std::pair<ServerState, RoundMetrics> RunRound(const LanguageModel& model,
                                              const ServerState& state,
                                              const FederatedData& data,
                                              const RoundOptions& options) {
  const auto cohort = SampleCohort(data.eligible, options.server.cohort_size,
                                   state.round, options.server.sample_seed);
  std::vector<ClientUpdate> updates(cohort.size());
  ParallelFor(cohort.size(), options.workers, [&](size_t i) {
    const auto it = data.shards.find(cohort[i]);
    if (it == data.shards.end()) throw DataError("sampled device has no shard");
    updates[i] = ClientTrain(model, state.params, it->second, options.client,
                             cohort[i], state.round);
  });

  RoundMetrics metrics;
  metrics.round = state.round;
  metrics.cohort_size = static_cast<int>(cohort.size());
  int loss_count = 0;
  for (const auto& u : updates) {
    metrics.total_weight += u.weight;
    metrics.tokens_trained += u.tokens_trained;
    if (u.batches_run > 0) {
      metrics.mean_client_loss += u.mean_loss;
      ++loss_count;
    }
  }
  if (loss_count > 0) metrics.mean_client_loss /= loss_count;

  ParamVector pseudo_grad;
  if (options.dp) {
    const DpConfig& dp = *options.dp;
    // `updates` is already in ascending device order.
    ParamVector sum(model.num_params());
    for (const auto& u : updates) {
      const ParamVector clipped = ClipUpdate(u.delta, dp.clip_norm);
      metrics.max_clipped_norm = std::max(metrics.max_clipped_norm, clipped.Norm());
      sum.Axpy(1.0, clipped);
    }
    pseudo_grad = AddNoise(sum, dp.clip_norm, dp.noise_multiplier, dp.noise_seed,
                           state.round);
    const double n = static_cast<double>(updates.size());
    for (size_t i = 0; i < pseudo_grad.size(); ++i) pseudo_grad[i] /= n;
  } else {
    pseudo_grad = Aggregate(updates);
  }
  return {FedAdamStep(state, pseudo_grad, options.server), metrics};
}

FederationResult RunFederation(const LanguageModel& model,
                               const ParamVector& initial,
                               const FederatedData& data,
                               const std::vector<Utterance>& heldout,
                               const RoundOptions& options, int64_t eval_every) {
  options.server.Validate();
  options.client.Validate();
  if (options.dp) options.dp->Validate();
  if (eval_every < 1) throw UsageError("eval cadence must be >= 1");

  FederationResult result;
  result.final_state = ServerState::Initial(initial);
  result.history.push_back({0, std::nullopt, Perplexity(model, initial, heldout),
                            std::nullopt});
  const double q = data.eligible.empty()
                       ? 1.0
                       : std::min(1.0, static_cast<double>(options.server.cohort_size) /
                                           static_cast<double>(data.eligible.size()));
  double loss_sum = 0.0;
  int64_t loss_rounds = 0;
  for (int64_t r = 1; r <= options.server.rounds; ++r) {
    auto [next, metrics] = RunRound(model, result.final_state, data, options);
    result.final_state = std::move(next);
    result.max_clipped_norm = std::max(result.max_clipped_norm, metrics.max_clipped_norm);
    loss_sum += metrics.mean_client_loss;
    ++loss_rounds;
    if (r % eval_every == 0 || r == options.server.rounds) {
      MetricsRow row;
      row.round = r;
      row.train_loss = loss_sum / static_cast<double>(loss_rounds);
      row.heldout_ppl = Perplexity(model, result.final_state.params, heldout);
      if (options.dp) {
        row.epsilon = options.dp->noise_multiplier > 0.0
                          ? Account(q, options.dp->noise_multiplier, r,
                                    options.dp->delta).epsilon
                          : std::numeric_limits<double>::infinity();
      }
      result.history.push_back(row);
      loss_sum = 0.0;
      loss_rounds = 0;
    }
  }
  return result;
}

std::string FormatMetricsRow(const MetricsRow& row) {
  std::string out = std::to_string(row.round);
  out += '\t';
  out += row.train_loss ? FormatExact(*row.train_loss) : "-";
  out += '\t';
  out += FormatExact(row.heldout_ppl);
  out += '\t';
  out += row.epsilon ? FormatExact(*row.epsilon) : "-";
  return out;
}

void WriteMetrics(const std::vector<MetricsRow>& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& row : history) out << FormatMetricsRow(row) << '\n';
  if (!out) throw DataError("write failed for " + path);
}

std::vector<MetricsRow> ReadMetrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() != 4) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 4 fields");
    }
    MetricsRow row;
    row.round = static_cast<int64_t>(ParseValue(f[0], path, line_no));
    if (f[1] != "-") row.train_loss = ParseValue(f[1], path, line_no);
    row.heldout_ppl = ParseValue(f[2], path, line_no);
    if (f[3] != "-") row.epsilon = ParseValue(f[3], path, line_no);
    rows.push_back(row);
  }
  if (rows.empty()) throw DataError(path + ": no metrics rows");
  return rows;
}

}  // namespace fedlm
