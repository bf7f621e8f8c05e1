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

// Command-line driver: gen-data, pretrain, federate, evaluate, account, table.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedlm/errors.h"
#include "fedlm/experiment.h"
#include "fedlm/loss.h"
#include "fedlm/model.h"
#include "fedlm/privacy.h"
#include "fedlm/server.h"

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> settings;
  std::optional<uint64_t> seed;
  std::optional<std::string> data_dir;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
};

void AddCommon(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "experiment config file");
  cmd->add_option("--set", opts.settings, "override a config key (key=value)");
  cmd->add_option("--seed", opts.seed, "master seed");
  cmd->add_option("--data-dir", opts.data_dir, "corpus directory");
  cmd->add_option("--out-dir", opts.out_dir, "output directory");
  cmd->add_option("--workers", opts.workers, "client worker threads");
}

fedlm::ExperimentConfig BuildConfig(const CommonOptions& opts) {
  fedlm::ExperimentConfig cfg;
  if (!opts.config_path.empty()) fedlm::LoadConfigFile(cfg, opts.config_path);
  for (const auto& kv : opts.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw fedlm::UsageError("--set expects key=value");
    fedlm::ApplySetting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) cfg.master_seed = *opts.seed;
  if (opts.data_dir) cfg.data_dir = *opts.data_dir;
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  if (opts.workers) cfg.workers = *opts.workers;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated language-model adaptation on noisy transcripts"};
  app.require_subcommand(1);

  CommonOptions gen_opts;
  std::optional<int> utts;
  std::optional<int64_t> devices;
  auto* gen = app.add_subcommand("gen-data", "generate train/held-out corpora");
  AddCommon(gen, gen_opts);
  gen->add_option("--utts", utts, "training utterances");
  gen->add_option("--devices", devices, "Zipf device count");

  CommonOptions pre_opts;
  std::optional<int> pre_epochs;
  auto* pre = app.add_subcommand("pretrain", "centralized pretraining on proxy data");
  AddCommon(pre, pre_opts);
  pre->add_option("--epochs", pre_epochs, "pretraining epochs");

  CommonOptions fed_opts;
  std::optional<std::string> loss;
  std::optional<int64_t> rounds;
  std::optional<double> noise;
  std::optional<double> clip;
  bool no_pretrain = false;
  bool use_dp = false;
  auto* fed = app.add_subcommand("federate", "run federated adaptation");
  AddCommon(fed, fed_opts);
  fed->add_option("--loss", loss, "all | hard:<c> | utt | token");
  fed->add_option("--rounds", rounds, "federation rounds");
  fed->add_flag("--no-pretrain", no_pretrain, "start from a fresh initialization");
  fed->add_flag("--dp", use_dp, "clip and noise client updates");
  fed->add_option("--noise-multiplier", noise, "DP noise multiplier (implies --dp)");
  fed->add_option("--clip-norm", clip, "DP L2 clip norm (implies --dp)");

  std::string eval_ckpt, eval_corpus;
  bool eval_eos = false;
  auto* eval = app.add_subcommand("evaluate", "perplexity of a checkpoint on a corpus");
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval->add_option("--corpus", eval_corpus, "corpus file")->required();
  eval->add_flag("--score-eos", eval_eos, "include end-of-sentence predictions");

  double acc_q = 0.0, acc_z = 0.0, acc_delta = 1e-5;
  int64_t acc_rounds = 0;
  auto* acc = app.add_subcommand("account", "(epsilon, delta) of subsampled Gaussian rounds");
  acc->add_option("--q", acc_q, "sampling rate")->required();
  acc->add_option("--z", acc_z, "noise multiplier")->required();
  acc->add_option("--rounds", acc_rounds, "number of rounds")->required();
  acc->add_option("--delta", acc_delta, "target delta");

  std::vector<std::string> table_files;
  std::string csv_path;
  std::string relative_to = "initial";
  auto* table = app.add_subcommand("table", "compare final perplexities of metrics files");
  table->add_option("histories", table_files, "metrics files")->required();
  table->add_option("--csv", csv_path, "also write CSV here");
  table->add_option("--relative-to", relative_to,
                    "initial: round-0 PPL of the first run; first: its final PPL")
      ->check(CLI::IsMember({"initial", "first"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      auto cfg = BuildConfig(gen_opts);
      if (utts) cfg.corpus.n_utts = *utts;
      if (devices) cfg.partition.n_devices = *devices;
      cfg.Finalize();
      fedlm::CmdGenData(cfg, std::cout);
    } else if (*pre) {
      auto cfg = BuildConfig(pre_opts);
      if (pre_epochs) cfg.pretrain.epochs = *pre_epochs;
      cfg.Finalize();
      fedlm::CmdPretrain(cfg, std::cout);
    } else if (*fed) {
      auto cfg = BuildConfig(fed_opts);
      if (loss) cfg.client.loss = fedlm::LossMode::Parse(*loss);
      if (rounds) cfg.server.rounds = *rounds;
      if (no_pretrain) cfg.pretrain.source = "none";
      if (use_dp || noise || clip) {
        if (!cfg.dp) cfg.dp = fedlm::DpConfig{};
        if (noise) cfg.dp->noise_multiplier = *noise;
        if (clip) cfg.dp->clip_norm = *clip;
      }
      cfg.Finalize();
      fedlm::CmdFederate(cfg, std::cout);
    } else if (*eval) {
      const auto report = fedlm::CmdEvaluate(eval_ckpt, eval_corpus, eval_eos);
      std::cout << "tokens " << report.tokens << "\nppl "
                << fedlm::FormatExact(report.perplexity) << '\n';
    } else if (*acc) {
      const auto spent = fedlm::Account(acc_q, acc_z, acc_rounds, acc_delta);
      std::printf("epsilon=%.6g alpha=%g\n", spent.epsilon, spent.order);
    } else if (*table) {
      std::vector<std::string> names;
      std::vector<std::vector<fedlm::MetricsRow>> runs;
      for (const auto& f : table_files) {
        names.push_back(std::filesystem::path(f).stem().string());
        runs.push_back(fedlm::ReadMetrics(f));
      }
      const auto baseline = relative_to == "first" ? fedlm::Baseline::kFirst
                                                   : fedlm::Baseline::kInitial;
      const auto rows = fedlm::BuildTable(names, runs, baseline);
      std::cout << fedlm::RenderTableText(rows, fedlm::BaselinePerplexity(runs, baseline));
      if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw fedlm::DataError("cannot write " + csv_path);
        out << fedlm::RenderTableCsv(rows);
      }
    }
  } catch (const fedlm::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
