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

#include "fedlm/experiment.h"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "fedlm/errors.h"
#include "fedlm/loss.h"
#include "fedlm/rng.h"

namespace fedlm {
namespace {

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

long long ToInt(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || errno != 0 || *end != '\0') {
    throw UsageError(key + ": expected an integer, got '" + v + "'");
  }
  return x;
}

uint64_t ToUnsigned(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || errno != 0 || *end != '\0') {
    throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return x;
}

double ToDouble(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || errno != 0 || *end != '\0') {
    throw UsageError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

bool ToBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError(key + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&,
                                  const std::string&)>;

DpConfig& EnableDp(ExperimentConfig& c) {
  if (!c.dp) c.dp = DpConfig{};
  return *c.dp;
}

const std::map<std::string, Setter>& Setters() {
  static const auto* setters = new std::map<std::string, Setter>{
      {"master_seed", [](auto& c, auto& k, auto& v) { c.master_seed = ToUnsigned(k, v); }},
      {"paths.data_dir", [](auto& c, auto&, auto& v) { c.data_dir = v; }},
      {"paths.out_dir", [](auto& c, auto&, auto& v) { c.out_dir = v; }},
      {"pretrain", [](auto& c, auto&, auto& v) { c.pretrain.source = v; }},
      {"corpus.n_utts", [](auto& c, auto& k, auto& v) { c.corpus.n_utts = ToInt(k, v); }},
      {"corpus.heldout_utts", [](auto& c, auto& k, auto& v) { c.corpus.heldout_utts = ToInt(k, v); }},
      {"corpus.min_len", [](auto& c, auto& k, auto& v) { c.corpus.min_len = ToInt(k, v); }},
      {"corpus.max_len", [](auto& c, auto& k, auto& v) { c.corpus.max_len = ToInt(k, v); }},
      {"corpus.n_symbols", [](auto& c, auto& k, auto& v) { c.corpus.n_symbols = ToInt(k, v); }},
      {"corpus.markov_order", [](auto& c, auto& k, auto& v) { c.corpus.markov_order = ToInt(k, v); }},
      {"corruption.error_rate", [](auto& c, auto& k, auto& v) { c.corruption.error_rate = ToDouble(k, v); }},
      {"corruption.correct_a", [](auto& c, auto& k, auto& v) { c.corruption.conf_correct.a = ToDouble(k, v); }},
      {"corruption.correct_b", [](auto& c, auto& k, auto& v) { c.corruption.conf_correct.b = ToDouble(k, v); }},
      {"corruption.wrong_a", [](auto& c, auto& k, auto& v) { c.corruption.conf_wrong.a = ToDouble(k, v); }},
      {"corruption.wrong_b", [](auto& c, auto& k, auto& v) { c.corruption.conf_wrong.b = ToDouble(k, v); }},
      {"partition.n_devices", [](auto& c, auto& k, auto& v) { c.partition.n_devices = ToInt(k, v); }},
      {"partition.exponent", [](auto& c, auto& k, auto& v) { c.partition.exponent = ToDouble(k, v); }},
      {"model.embed_dim", [](auto& c, auto& k, auto& v) { c.model.embed_dim = ToInt(k, v); }},
      {"model.hidden_dim", [](auto& c, auto& k, auto& v) { c.model.hidden_dim = ToInt(k, v); }},
      {"model.n_layers", [](auto& c, auto& k, auto& v) { c.model.n_layers = ToInt(k, v); }},
      {"model.cell", [](auto& c, auto&, auto& v) { c.model.cell = ParseCell(v); }},
      {"model.score_eos", [](auto& c, auto& k, auto& v) { c.model.score_eos = ToBool(k, v); }},
      {"model.init_scale", [](auto& c, auto& k, auto& v) { c.init_scale = ToDouble(k, v); }},
      {"pretrain.epochs", [](auto& c, auto& k, auto& v) { c.pretrain.epochs = ToInt(k, v); }},
      {"pretrain.lr", [](auto& c, auto& k, auto& v) { c.pretrain.lr = ToDouble(k, v); }},
      {"pretrain.batch_size", [](auto& c, auto& k, auto& v) { c.pretrain.batch_size = ToInt(k, v); }},
      {"pretrain.proxy_utts", [](auto& c, auto& k, auto& v) { c.pretrain.proxy_utts = ToInt(k, v); }},
      {"pretrain.proxy_blend", [](auto& c, auto& k, auto& v) { c.pretrain.proxy_blend = ToDouble(k, v); }},
      {"client.local_epochs", [](auto& c, auto& k, auto& v) { c.client.local_epochs = ToInt(k, v); }},
      {"client.batch_size", [](auto& c, auto& k, auto& v) { c.client.batch_size = ToInt(k, v); }},
      {"client.local_lr", [](auto& c, auto& k, auto& v) { c.client.local_lr = ToDouble(k, v); }},
      {"client.loss", [](auto& c, auto&, auto& v) { c.client.loss = LossMode::Parse(v); }},
      {"client.weight",
       [](auto& c, auto& k, auto& v) {
         if (v == "words") {
           c.client.weight_mode = WeightMode::kAllWords;
         } else if (v == "used_tokens") {
           c.client.weight_mode = WeightMode::kUsedTokens;
         } else {
           throw UsageError(k + ": expected words or used_tokens");
         }
       }},
      {"server.global_lr", [](auto& c, auto& k, auto& v) { c.server.global_lr = ToDouble(k, v); }},
      {"server.beta1", [](auto& c, auto& k, auto& v) { c.server.beta1 = ToDouble(k, v); }},
      {"server.beta2", [](auto& c, auto& k, auto& v) { c.server.beta2 = ToDouble(k, v); }},
      {"server.epsilon", [](auto& c, auto& k, auto& v) { c.server.epsilon = ToDouble(k, v); }},
      {"server.rounds", [](auto& c, auto& k, auto& v) { c.server.rounds = ToInt(k, v); }},
      {"server.cohort_size", [](auto& c, auto& k, auto& v) { c.server.cohort_size = ToInt(k, v); }},
      {"server.min_device_words", [](auto& c, auto& k, auto& v) { c.server.min_device_words = ToInt(k, v); }},
      {"dp.enabled",
       [](auto& c, auto& k, auto& v) {
         if (ToBool(k, v)) {
           EnableDp(c);
         } else {
           c.dp.reset();
         }
       }},
      {"dp.clip_norm", [](auto& c, auto& k, auto& v) { EnableDp(c).clip_norm = ToDouble(k, v); }},
      {"dp.noise_multiplier", [](auto& c, auto& k, auto& v) { EnableDp(c).noise_multiplier = ToDouble(k, v); }},
      {"dp.delta", [](auto& c, auto& k, auto& v) { EnableDp(c).delta = ToDouble(k, v); }},
      {"eval.every", [](auto& c, auto& k, auto& v) { c.eval_every = ToInt(k, v); }},
      {"run.workers", [](auto& c, auto& k, auto& v) { c.workers = ToInt(k, v); }},
  };
  return *setters;
}

const std::map<std::string, std::string>& Aliases() {
  static const auto* aliases = new std::map<std::string, std::string>{
      {"local_epochs", "client.local_epochs"},
      {"batch_size", "client.batch_size"},
      {"local_lr", "client.local_lr"},
      {"loss", "client.loss"},
  };
  return *aliases;
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw DataError("cannot create directory " + dir);
  }
}

}  // namespace

void ExperimentConfig::Finalize() {
  corruption.seed = StreamSeed(master_seed, "corruption");
  partition.seed = StreamSeed(master_seed, "partition");
  client.shuffle_seed = StreamSeed(master_seed, "shuffle");
  server.sample_seed = StreamSeed(master_seed, "cohort");
  if (dp) dp->noise_seed = StreamSeed(master_seed, "noise");
}

void ExperimentConfig::Validate() const {
  if (corpus.n_utts < 1 || corpus.heldout_utts < 1) {
    throw UsageError("corpus sizes must be >= 1");
  }
  if (corpus.min_len < 1 || corpus.max_len < corpus.min_len) {
    throw UsageError("corpus lengths must satisfy max_len >= min_len >= 1");
  }
  if (corpus.n_symbols < 2) throw UsageError("corpus.n_symbols must be >= 2");
  if (corpus.markov_order < 1) throw UsageError("corpus.markov_order must be >= 1");
  corruption.Validate();
  partition.Validate();
  if (!(init_scale >= 0.0)) throw UsageError("model.init_scale must be >= 0");
  if (pretrain.epochs < 0 || pretrain.batch_size < 1 || pretrain.proxy_utts < 1 ||
      !(pretrain.lr >= 0.0) ||
      !(pretrain.proxy_blend >= 0.0 && pretrain.proxy_blend <= 1.0)) {
    throw UsageError("invalid pretrain settings");
  }
  client.Validate();
  server.Validate();
  if (dp) dp->Validate();
  if (eval_every < 1) throw UsageError("eval.every must be >= 1");
  if (workers < 1) throw UsageError("run.workers must be >= 1");
}

std::string ExperimentConfig::pretrained_path() const {
  return pretrain.source.empty() || pretrain.source == "none"
             ? data_dir + "/pretrained.ckpt"
             : pretrain.source;
}

void ApplySetting(ExperimentConfig& cfg, const std::string& raw_key,
                  const std::string& value) {
  std::string key = Trim(raw_key);
  if (auto a = Aliases().find(key); a != Aliases().end()) key = a->second;
  auto it = Setters().find(key);
  if (it == Setters().end()) throw UsageError("unknown config key '" + key + "'");
  it->second(cfg, key, Trim(value));
}

void LoadConfigFile(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      ApplySetting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string DumpConfig(const ExperimentConfig& c) {
  std::ostringstream o;
  auto d = [](double v) { return FormatExact(v); };
  o << "master_seed = " << c.master_seed << '\n'
    << "paths.data_dir = " << c.data_dir << '\n'
    << "paths.out_dir = " << c.out_dir << '\n'
    << "pretrain = " << (c.pretrain.source.empty() ? c.pretrained_path() : c.pretrain.source) << '\n'
    << "corpus.n_utts = " << c.corpus.n_utts << '\n'
    << "corpus.heldout_utts = " << c.corpus.heldout_utts << '\n'
    << "corpus.min_len = " << c.corpus.min_len << '\n'
    << "corpus.max_len = " << c.corpus.max_len << '\n'
    << "corpus.n_symbols = " << c.corpus.n_symbols << '\n'
    << "corpus.markov_order = " << c.corpus.markov_order << '\n'
    << "corruption.error_rate = " << d(c.corruption.error_rate) << '\n'
    << "corruption.correct_a = " << d(c.corruption.conf_correct.a) << '\n'
    << "corruption.correct_b = " << d(c.corruption.conf_correct.b) << '\n'
    << "corruption.wrong_a = " << d(c.corruption.conf_wrong.a) << '\n'
    << "corruption.wrong_b = " << d(c.corruption.conf_wrong.b) << '\n'
    << "partition.n_devices = " << c.partition.n_devices << '\n'
    << "partition.exponent = " << d(c.partition.exponent) << '\n'
    << "model.embed_dim = " << c.model.embed_dim << '\n'
    << "model.hidden_dim = " << c.model.hidden_dim << '\n'
    << "model.n_layers = " << c.model.n_layers << '\n'
    << "model.cell = " << CellName(c.model.cell) << '\n'
    << "model.score_eos = " << (c.model.score_eos ? "true" : "false") << '\n'
    << "model.init_scale = " << d(c.init_scale) << '\n'
    << "pretrain.epochs = " << c.pretrain.epochs << '\n'
    << "pretrain.lr = " << d(c.pretrain.lr) << '\n'
    << "pretrain.batch_size = " << c.pretrain.batch_size << '\n'
    << "pretrain.proxy_utts = " << c.pretrain.proxy_utts << '\n'
    << "pretrain.proxy_blend = " << d(c.pretrain.proxy_blend) << '\n'
    << "client.local_epochs = " << c.client.local_epochs << '\n'
    << "client.batch_size = " << c.client.batch_size << '\n'
    << "client.local_lr = " << d(c.client.local_lr) << '\n'
    << "client.loss = " << c.client.loss.ToString() << '\n'
    << "client.weight = "
    << (c.client.weight_mode == WeightMode::kAllWords ? "words" : "used_tokens") << '\n'
    << "server.global_lr = " << d(c.server.global_lr) << '\n'
    << "server.beta1 = " << d(c.server.beta1) << '\n'
    << "server.beta2 = " << d(c.server.beta2) << '\n'
    << "server.epsilon = " << d(c.server.epsilon) << '\n'
    << "server.rounds = " << c.server.rounds << '\n'
    << "server.cohort_size = " << c.server.cohort_size << '\n'
    << "server.min_device_words = " << c.server.min_device_words << '\n'
    << "dp.enabled = " << (c.dp ? "true" : "false") << '\n';
  if (c.dp) {
    o << "dp.clip_norm = " << d(c.dp->clip_norm) << '\n'
      << "dp.noise_multiplier = " << d(c.dp->noise_multiplier) << '\n'
      << "dp.delta = " << d(c.dp->delta) << '\n';
  }
  o << "eval.every = " << c.eval_every << '\n' << "run.workers = " << c.workers << '\n';
  return o.str();
}

// ---------------------------------------------------------------------------
// Data and training

MarkovSource DomainSource(const ExperimentConfig& cfg) {
  return MarkovSource(StreamSeed(cfg.master_seed, "domain-source"),
                      cfg.corpus.n_symbols, cfg.corpus.markov_order);
}

MarkovSource ProxySource(const ExperimentConfig& cfg) {
  const MarkovSource other(StreamSeed(cfg.master_seed, "proxy-source"),
                           cfg.corpus.n_symbols, cfg.corpus.markov_order);
  return MarkovSource::Blend(DomainSource(cfg), other, cfg.pretrain.proxy_blend);
}

DeskData MakeDeskData(const ExperimentConfig& cfg) {
  cfg.Validate();
  const MarkovSource source = DomainSource(cfg);
  const auto train_text =
      source.Sample(cfg.corpus.n_utts, cfg.corpus.min_len, cfg.corpus.max_len,
                    StreamSeed(cfg.master_seed, "train-sample"));
  const auto heldout_text =
      source.Sample(cfg.corpus.heldout_utts, cfg.corpus.min_len, cfg.corpus.max_len,
                    StreamSeed(cfg.master_seed, "heldout-sample"));
  std::vector<std::vector<std::string>> all = train_text;
  all.insert(all.end(), heldout_text.begin(), heldout_text.end());

  DeskData data;
  data.vocab = BuildVocab(all, 1);
  data.train_clean = EncodeTexts(train_text, data.vocab);
  data.heldout = EncodeTexts(heldout_text, data.vocab);
  const auto devices = ZipfPartition(cfg.corpus.n_utts, cfg.partition);
  for (size_t i = 0; i < data.train_clean.size(); ++i) {
    data.train_clean[i].device_id = devices[i];
  }
  data.train_corrupted = Corrupt(data.train_clean, data.vocab.size(), cfg.corruption);
  return data;
}

ModelConfig ResolvedModelConfig(const ExperimentConfig& cfg, const Vocab& vocab) {
  ModelConfig m = cfg.model;
  m.vocab_size = vocab.size();
  return m;
}

PretrainResult PretrainModel(const ExperimentConfig& cfg, const Vocab& vocab,
                             std::ostream* log) {
  const LanguageModel model(ResolvedModelConfig(cfg, vocab));
  const MarkovSource proxy = ProxySource(cfg);
  const auto train = EncodeTexts(
      proxy.Sample(cfg.pretrain.proxy_utts, cfg.corpus.min_len, cfg.corpus.max_len,
                   StreamSeed(cfg.master_seed, "proxy-sample")),
      vocab);
  const auto heldout = EncodeTexts(
      proxy.Sample(std::max(1, cfg.pretrain.proxy_utts / 10), cfg.corpus.min_len,
                   cfg.corpus.max_len, StreamSeed(cfg.master_seed, "proxy-heldout")),
      vocab);

  PretrainResult result;
  result.params = model.Init(StreamSeed(cfg.master_seed, "init"), cfg.init_scale);
  result.proxy_ppl_per_epoch.push_back(Perplexity(model, result.params, heldout));
  if (log) *log << "pretrain epoch 0 proxy_ppl " << result.proxy_ppl_per_epoch.back() << '\n';

  ClientConfig sgd;
  sgd.local_epochs = 1;
  sgd.batch_size = cfg.pretrain.batch_size;
  sgd.local_lr = cfg.pretrain.lr;
  sgd.loss = LossMode::All();
  sgd.shuffle_seed = StreamSeed(cfg.master_seed, "pretrain-shuffle");
  for (int epoch = 1; epoch <= cfg.pretrain.epochs; ++epoch) {
    // One centralized epoch is a single "client" holding all proxy data.
    const ClientUpdate step = ClientTrain(model, result.params, train, sgd, 0, epoch);
    result.params.Axpy(-1.0, step.delta);
    result.proxy_ppl_per_epoch.push_back(Perplexity(model, result.params, heldout));
    if (log) {
      *log << "pretrain epoch " << epoch << " loss " << step.mean_loss << " proxy_ppl "
           << result.proxy_ppl_per_epoch.back() << '\n';
    }
  }
  return result;
}

FederationResult FederateModel(const ExperimentConfig& cfg,
                               const LanguageModel& model,
                               const ParamVector& initial,
                               const std::vector<Utterance>& train,
                               const std::vector<Utterance>& heldout) {
  RoundOptions options;
  options.client = cfg.client;
  options.server = cfg.server;
  options.dp = cfg.dp;
  options.workers = cfg.workers;
  const FederatedData data =
      FederatedData::FromCorpus(train, cfg.server.min_device_words);
  return RunFederation(model, initial, data, heldout, options, cfg.eval_every);
}

// ---------------------------------------------------------------------------
// Commands

void CmdGenData(const ExperimentConfig& cfg, std::ostream& log) {
  const DeskData data = MakeDeskData(cfg);
  EnsureDir(cfg.data_dir);
  SaveCorpus(data.train_clean, data.vocab, cfg.train_clean_path());
  SaveCorpus(data.train_corrupted, data.vocab, cfg.train_corrupted_path());
  SaveCorpus(data.heldout, data.vocab, cfg.heldout_path());
  const auto shards = ShardByDevice(data.train_clean);
  size_t largest = 0;
  for (const auto& [d, s] : shards) largest = std::max(largest, s.size());
  log << "vocab " << data.vocab.size() << " train_utts " << data.train_clean.size()
      << " heldout_utts " << data.heldout.size() << " devices " << shards.size()
      << " largest_device " << largest << '\n';
  log << "wrote " << cfg.train_clean_path() << ", " << cfg.train_corrupted_path()
      << ", " << cfg.heldout_path() << '\n';
}

void CmdPretrain(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.Validate();
  const Vocab vocab = LoadCorpus(cfg.train_clean_path()).second;
  const PretrainResult result = PretrainModel(cfg, vocab, &log);
  const std::string path = cfg.pretrained_path();
  if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
    EnsureDir(parent.string());
  }
  SaveCheckpoint(ResolvedModelConfig(cfg, vocab), result.params, path);
  log << "wrote " << path << '\n';
}

FederationResult CmdFederate(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.Validate();
  auto [train, vocab] = LoadCorpus(cfg.train_corrupted_path());
  auto heldout_file = LoadCorpus(cfg.heldout_path());
  if (!(heldout_file.second == vocab)) {
    throw DataError("held-out corpus uses a different vocabulary");
  }
  const ModelConfig model_cfg = ResolvedModelConfig(cfg, vocab);
  const LanguageModel model(model_cfg);
  ParamVector initial;
  if (cfg.from_scratch()) {
    initial = model.Init(StreamSeed(cfg.master_seed, "init"), cfg.init_scale);
  } else {
    const std::string path = cfg.pretrained_path();
    if (!std::filesystem::exists(path)) {
      throw DataError("pretrained checkpoint " + path +
                      " not found (run pretrain, or set pretrain = none)");
    }
    Checkpoint ck = LoadCheckpoint(path);
    ck.config.score_eos = model_cfg.score_eos;
    if (!(ck.config == model_cfg)) {
      throw DataError("checkpoint " + path + " does not match the model config");
    }
    initial = std::move(ck.params);
  }
  FederationResult result =
      FederateModel(cfg, model, initial, train, heldout_file.first);
  EnsureDir(cfg.out_dir);
  WriteMetrics(result.history, cfg.metrics_path());
  SaveCheckpoint(model_cfg, result.final_state.params, cfg.final_checkpoint_path());
  for (const auto& row : result.history) log << FormatMetricsRow(row) << '\n';
  log << "wrote " << cfg.metrics_path() << " and " << cfg.final_checkpoint_path() << '\n';
  return result;
}

PerplexityReport CmdEvaluate(const std::string& checkpoint, const std::string& corpus,
                             bool score_eos) {
  Checkpoint ck = LoadCheckpoint(checkpoint);
  ck.config.score_eos = score_eos;
  auto [utts, vocab] = LoadCorpus(corpus);
  if (vocab.size() != ck.config.vocab_size) {
    throw DataError("checkpoint vocab size " + std::to_string(ck.config.vocab_size) +
                    " does not match corpus vocab size " + std::to_string(vocab.size()));
  }
  const LanguageModel model(ck.config);
  return EvaluatePerplexity(model, ck.params, utts);
}

// ---------------------------------------------------------------------------
// Tables

double BaselinePerplexity(const std::vector<std::vector<MetricsRow>>& runs,
                          Baseline baseline) {
  if (runs.empty() || runs.front().empty()) throw DataError("no metrics histories");
  return baseline == Baseline::kInitial ? runs.front().front().heldout_ppl
                                        : runs.front().back().heldout_ppl;
}

std::vector<TableRow> BuildTable(const std::vector<std::string>& names,
                                 const std::vector<std::vector<MetricsRow>>& runs,
                                 Baseline baseline) {
  if (names.size() != runs.size()) throw UsageError("one name per history required");
  const double base = BaselinePerplexity(runs, baseline);
  std::vector<TableRow> rows;
  for (size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].empty()) throw DataError("empty history for " + names[i]);
    const MetricsRow& last = runs[i].back();
    TableRow row;
    row.name = names[i];
    row.final_round = last.round;
    row.final_ppl = last.heldout_ppl;
    row.relative_pct = 100.0 * (last.heldout_ppl - base) / base;
    row.epsilon = last.epsilon;
    rows.push_back(row);
  }
  return rows;
}

std::string RenderTableText(const std::vector<TableRow>& rows, double baseline_ppl) {
  size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream o;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s  %7s  %10s  %9s  %10s\n",
                static_cast<int>(width), "run", "round", "PPL", "rel", "epsilon");
  o << buf;
  for (const auto& r : rows) {
    char eps[32] = "-";
    if (r.epsilon) std::snprintf(eps, sizeof(eps), "%.2f", *r.epsilon);
    std::snprintf(buf, sizeof(buf), "%-*s  %7lld  %10.3f  %+8.1f%%  %10s\n",
                  static_cast<int>(width), r.name.c_str(),
                  static_cast<long long>(r.final_round), r.final_ppl, r.relative_pct,
                  eps);
    o << buf;
  }
  std::snprintf(buf, sizeof(buf), "baseline PPL %.3f\n", baseline_ppl);
  o << buf;
  return o.str();
}

std::string RenderTableCsv(const std::vector<TableRow>& rows) {
  std::ostringstream o;
  o << "run,final_round,final_ppl,relative_pct,epsilon\n";
  for (const auto& r : rows) {
    o << r.name << ',' << r.final_round << ',' << FormatExact(r.final_ppl) << ','
      << FormatExact(r.relative_pct) << ',' << (r.epsilon ? FormatExact(*r.epsilon) : "")
      << '\n';
  }
  return o.str();
}

}  // namespace fedlm
