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

#ifndef FEDLM_MODEL_H_
#define FEDLM_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedlm/corpus.h"
#include "fedlm/param_vector.h"

namespace fedlm {

enum class CellType { kTanh, kLstm };

std::string CellName(CellType cell);
CellType ParseCell(const std::string& name);

struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 16;
  int hidden_dim = 32;
  int n_layers = 1;
  CellType cell = CellType::kLstm;
  // Also score the end-of-sentence prediction. Off by default: the training
  // objective sums over transcript words only.
  bool score_eos = false;

  void Validate() const;
  bool operator==(const ModelConfig& other) const = default;
};

// Offsets of each parameter block inside a ParamVector. Layout order:
// embedding [V x E], then per layer input weights [G*H x I], recurrent
// weights [G*H x H], bias [G*H], then output weights [V x H] and bias [V].
// G is 1 for the tanh cell and 4 for the LSTM (gate order i, f, g, o).
struct ParamLayout {
  struct Layer {
    size_t w_in = 0;
    size_t w_rec = 0;
    size_t bias = 0;
    int input_dim = 0;
  };
  size_t embedding = 0;
  std::vector<Layer> layers;
  size_t out_w = 0;
  size_t out_b = 0;
  size_t total = 0;

  explicit ParamLayout(const ModelConfig& cfg);
};

// Activations of one utterance, enough to run the backward pass.
struct ForwardTrace {
  std::vector<TokenId> inputs;   // <s>, t_1, ..., per step
  std::vector<TokenId> targets;  // t_1, ..., (</s>) per step
  // log p(target | prefix), one per scored position.
  std::vector<double> log_probs;
  // Per layer, flattened [steps x H]. LSTM also keeps cell states and the
  // activated gates [steps x 4H].
  std::vector<std::vector<double>> hidden;
  std::vector<std::vector<double>> cell;
  std::vector<std::vector<double>> gates;
  // Softmax output, [steps x V].
  std::vector<double> probs;

  int steps() const { return static_cast<int>(targets.size()); }
};

// Embedding -> stacked recurrent cells -> linear -> softmax.
class LanguageModel {
 public:
  explicit LanguageModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  size_t num_params() const { return layout_.total; }

  // Weights uniform in [-scale, scale], biases zero.
  ParamVector Init(uint64_t seed, double scale) const;

  // Position s predicts token s from <s> and tokens before s.
  ForwardTrace Forward(const ParamVector& params,
                       std::span<const TokenId> tokens) const;
  std::vector<ForwardTrace> ForwardBatch(
      const ParamVector& params, const std::vector<Utterance>& batch) const;

  // Accumulates the gradient of sum_s weights[s] * -log p_s into `grad`.
  void Backward(const ParamVector& params, const ForwardTrace& trace,
                std::span<const double> weights, ParamVector& grad) const;
  ParamVector Backward(const ParamVector& params, const ForwardTrace& trace,
                       std::span<const double> weights) const;

  // Number of scored positions for an utterance of `length` words.
  int ScoredPositions(int length) const {
    return length + (cfg_.score_eos ? 1 : 0);
  }

 private:
  void CheckParams(const ParamVector& params) const;

  ModelConfig cfg_;
  ParamLayout layout_;
};

struct PerplexityReport {
  double total_nll = 0.0;
  int64_t tokens = 0;
  double perplexity = 0.0;
};

// exp(total NLL / scored tokens). Order independent up to rounding.
PerplexityReport EvaluatePerplexity(const LanguageModel& model,
                                    const ParamVector& params,
                                    const std::vector<Utterance>& utts);
double Perplexity(const LanguageModel& model, const ParamVector& params,
                  const std::vector<Utterance>& utts);

// "#model <V> <E> <H> <layers> <cell>" then one value per line.
void SaveCheckpoint(const ModelConfig& cfg, const ParamVector& params,
                    const std::string& path);
struct Checkpoint {
  ModelConfig config;
  ParamVector params;
};
Checkpoint LoadCheckpoint(const std::string& path);

// Shared by the checkpoint formats: "%.17g".
std::string FormatExact(double v);

}  // namespace fedlm

#endif  // FEDLM_MODEL_H_
