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

#ifndef FEDLM_CORPUS_H_
#define FEDLM_CORPUS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fedlm/rng.h"

namespace fedlm {

using TokenId = int32_t;
using DeviceId = int64_t;

inline constexpr TokenId kBosId = 0;
inline constexpr TokenId kEosId = 1;
inline constexpr TokenId kUnkId = 2;
inline constexpr int kNumReserved = 3;

// Dense token <-> id mapping. Ids 0..2 are always <s>, </s>, <unk>.
class Vocab {
 public:
  // Vocabulary holding only the reserved tokens.
  Vocab();
  // `tokens` must start with the three reserved tokens and be duplicate free.
  explicit Vocab(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  // Unknown strings map to kUnkId.
  TokenId Lookup(std::string_view token) const;
  const std::string& Token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> Encode(const std::vector<std::string>& words) const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct Utterance {
  std::vector<TokenId> tokens;
  std::vector<double> confidences;
  // Synthetic ground truth. Only evaluation and tests may read this; training
  // code paths consume `confidences` alone.
  std::optional<std::vector<bool>> correct_flags;
  DeviceId device_id = 0;

  int length() const { return static_cast<int>(tokens.size()); }
  bool operator==(const Utterance& other) const = default;
};

// Throws DataError unless the utterance is non-empty, confidences match the
// token count and lie in [0, 1], and flags (when present) match too.
void ValidateUtterance(const Utterance& utt);

// Total word count, sum of T_j.
int64_t CountTokens(const std::vector<Utterance>& utts);

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
  double mean() const { return a / (a + b); }
};

struct CorruptionConfig {
  double error_rate = 0.2;
  BetaParams conf_correct{9.0, 1.0};
  BetaParams conf_wrong{1.0, 9.0};
  uint64_t seed = 0;

  void Validate() const;
};

struct ZipfConfig {
  int64_t n_devices = 8000;
  double exponent = 1.0;
  uint64_t seed = 0;

  void Validate() const;
};

// Counts tokens across `texts` and assigns ids to those seen at least
// `min_count` times, ordered by descending count then lexicographically.
Vocab BuildVocab(const std::vector<std::vector<std::string>>& texts,
                 int min_count);

// A seeded Markov chain over `n_symbols` symbols named "w00", "w01", ...
// Each context has a handful of likely successors plus a small floor mass
// over every symbol, so all transitions have non-zero probability.
class MarkovSource {
 public:
  MarkovSource(uint64_t seed, int n_symbols, int order);

  // Row-wise mixture (1 - weight) * a + weight * b. Both sources must have
  // the same symbol count and order.
  static MarkovSource Blend(const MarkovSource& a, const MarkovSource& b,
                            double weight);

  int n_symbols() const { return n_symbols_; }
  int order() const { return order_; }
  std::string SymbolName(int symbol) const;

  // Index of the context formed by the last `order` symbols of `history`,
  // left-padded with the start marker.
  int ContextIndex(const std::vector<int>& history) const;
  // P(next = symbol | context).
  double Probability(int context, int symbol) const {
    return transitions_[static_cast<size_t>(context) * n_symbols_ + symbol];
  }

  std::vector<int> SampleSequence(Rng& rng, int length) const;

  std::vector<std::vector<std::string>> Sample(int n_utts, int min_len,
                                               int max_len,
                                               uint64_t sample_seed) const;

 private:
  MarkovSource() = default;
  int n_symbols_ = 0;
  int order_ = 1;
  int n_contexts_ = 0;
  std::vector<double> transitions_;
};

// Clean synthetic corpus: `n_utts` sentences from the Markov source keyed by
// `source_seed` (20 symbols), lengths uniform in len_range, vocab built with
// min_count 1. Device ids are left at 0; see ZipfPartition.
std::pair<std::vector<Utterance>, Vocab> GenerateSyntheticCorpus(
    uint64_t source_seed, int n_utts, std::pair<int, int> len_range,
    int markov_order);

// Maps token strings into `vocab`, with confidences 1 and no flags.
std::vector<Utterance> EncodeTexts(
    const std::vector<std::vector<std::string>>& texts, const Vocab& vocab);

// Simulated ASR output: replaces each token with a uniformly drawn different
// non-reserved token with probability cfg.error_rate, records ground-truth
// flags and draws confidences from the matching Beta distribution.
std::vector<Utterance> Corrupt(const std::vector<Utterance>& utts,
                               int vocab_size, const CorruptionConfig& cfg);

// I.i.d. Zipf device labels, P(rank r) proportional to (r + 1)^-s. The label
// of utterance k depends only on (k, seed).
std::vector<DeviceId> ZipfPartition(int64_t n_utts, const ZipfConfig& cfg);

// Groups utterances by device id (ascending).
std::map<DeviceId, std::vector<Utterance>> ShardByDevice(
    const std::vector<Utterance>& utts);

// Line-oriented text format:
//   #vocab <n>
//   <token>            (n lines)
//   device<TAB>ids<TAB>confidences<TAB>flags-or-dash
void SaveCorpus(const std::vector<Utterance>& utts, const Vocab& vocab,
                const std::string& path);
std::pair<std::vector<Utterance>, Vocab> LoadCorpus(const std::string& path);

}  // namespace fedlm

#endif  // FEDLM_CORPUS_H_
