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

#ifndef FEDLM_EXPERIMENT_H_
#define FEDLM_EXPERIMENT_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedlm/client.h"
#include "fedlm/corpus.h"
#include "fedlm/model.h"
#include "fedlm/privacy.h"
#include "fedlm/server.h"

namespace fedlm {

struct CorpusConfig {
  int n_utts = 20000;
  int heldout_utts = 2000;
  int min_len = 4;
  int max_len = 12;
  int n_symbols = 20;
  int markov_order = 1;
};

struct PretrainConfig {
  // Checkpoint to start federation from, or "none" for a fresh init. Empty
  // means <data_dir>/pretrained.ckpt.
  std::string source;
  int epochs = 5;
  double lr = 1.0;
  int batch_size = 8;
  int proxy_utts = 5000;
  // Weight of the unrelated chain in the proxy source; 0 means no mismatch.
  double proxy_blend = 0.5;
};

// Everything a run needs, loaded from a flat `section.key = value` file.
struct ExperimentConfig {
  uint64_t master_seed = 1;
  std::string data_dir = "data";
  std::string out_dir = "out";

  CorpusConfig corpus;
  CorruptionConfig corruption;
  ZipfConfig partition;
  ModelConfig model;  // vocab_size comes from the corpus
  double init_scale = 0.1;
  PretrainConfig pretrain;
  ClientConfig client;
  FedAdamConfig server;
  std::optional<DpConfig> dp;
  int64_t eval_every = 100;
  int workers = 1;

  // Derived seeds are set from master_seed by Finalize().
  void Finalize();
  void Validate() const;

  std::string train_clean_path() const { return data_dir + "/train-clean.txt"; }
  std::string train_corrupted_path() const {
    return data_dir + "/train-corrupted.txt";
  }
  std::string heldout_path() const { return data_dir + "/heldout-clean.txt"; }
  std::string pretrained_path() const;
  bool from_scratch() const { return pretrain.source == "none"; }
  std::string metrics_path() const { return out_dir + "/metrics.tsv"; }
  std::string final_checkpoint_path() const { return out_dir + "/final.ckpt"; }
};

// Applies one `key = value` setting; unknown keys are a UsageError.
void ApplySetting(ExperimentConfig& cfg, const std::string& key,
                  const std::string& value);
// Reads a config file on top of `cfg`. '#' starts a comment.
void LoadConfigFile(ExperimentConfig& cfg, const std::string& path);
// Renders every key in the loadable format.
std::string DumpConfig(const ExperimentConfig& cfg);

struct DeskData {
  Vocab vocab;
  std::vector<Utterance> train_clean;
  std::vector<Utterance> train_corrupted;
  std::vector<Utterance> heldout;
};

// In-domain Markov corpus: train split with Zipf device labels (clean and
// corrupted copies) and a clean held-out split. Deterministic in the config.
DeskData MakeDeskData(const ExperimentConfig& cfg);

// Source the in-domain data is drawn from, and the mismatched proxy source
// used for server-side pretraining.
MarkovSource DomainSource(const ExperimentConfig& cfg);
MarkovSource ProxySource(const ExperimentConfig& cfg);

struct PretrainResult {
  ParamVector params;
  std::vector<double> proxy_ppl_per_epoch;  // index 0 is the initial model
};

// Centralized mini-batch SGD (loss "all") on proxy text in `vocab`.
PretrainResult PretrainModel(const ExperimentConfig& cfg, const Vocab& vocab,
                             std::ostream* log = nullptr);

FederationResult FederateModel(const ExperimentConfig& cfg,
                               const LanguageModel& model,
                               const ParamVector& initial,
                               const std::vector<Utterance>& train,
                               const std::vector<Utterance>& heldout);

ModelConfig ResolvedModelConfig(const ExperimentConfig& cfg, const Vocab& vocab);

// File-level commands behind the CLI.
void CmdGenData(const ExperimentConfig& cfg, std::ostream& log);
void CmdPretrain(const ExperimentConfig& cfg, std::ostream& log);
FederationResult CmdFederate(const ExperimentConfig& cfg, std::ostream& log);
PerplexityReport CmdEvaluate(const std::string& checkpoint,
                             const std::string& corpus, bool score_eos = false);

struct TableRow {
  std::string name;
  int64_t final_round = 0;
  double final_ppl = 0.0;
  double relative_pct = 0.0;
  std::optional<double> epsilon;
};

enum class Baseline {
  kInitial,  // round-0 perplexity of the first history (the unadapted model)
  kFirst,    // final perplexity of the first history
};

std::vector<TableRow> BuildTable(const std::vector<std::string>& names,
                                 const std::vector<std::vector<MetricsRow>>& runs,
                                 Baseline baseline);
std::string RenderTableText(const std::vector<TableRow>& rows, double baseline_ppl);
std::string RenderTableCsv(const std::vector<TableRow>& rows);
double BaselinePerplexity(const std::vector<std::vector<MetricsRow>>& runs,
                          Baseline baseline);

}  // namespace fedlm

#endif  // FEDLM_EXPERIMENT_H_
