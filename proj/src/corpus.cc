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

#include "fedlm/corpus.h"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedlm/errors.h"

namespace fedlm {
namespace {

constexpr int kSuccessorsPerContext = 4;
constexpr double kFloorMass = 0.05;
constexpr int kDefaultSymbols = 20;

const char* const kReservedTokens[kNumReserved] = {"<s>", "</s>", "<unk>"};

std::vector<std::string> SplitOn(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void FailAt(const std::string& path, int line,
                         const std::string& why) {
  throw DataError(path + ":" + std::to_string(line) + ": " + why);
}

long long ParseInt(const std::string& s, const std::string& path, int line) {
  if (s.empty()) FailAt(path, line, "empty integer field");
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || *end != '\0') FailAt(path, line, "bad integer '" + s + "'");
  return v;
}

double ParseDouble(const std::string& s, const std::string& path, int line) {
  if (s.empty()) FailAt(path, line, "empty number field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || *end != '\0') FailAt(path, line, "bad number '" + s + "'");
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() : Vocab(std::vector<std::string>(kReservedTokens,
                                                kReservedTokens + kNumReserved)) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumReserved) {
    throw DataError("vocab must contain the reserved tokens");
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (tokens_[i] != kReservedTokens[i]) {
      throw DataError("vocab id " + std::to_string(i) + " must be " +
                      kReservedTokens[i]);
    }
  }
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate vocab token '" + tokens_[i] + "'");
    }
  }
}

TokenId Vocab::Lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::Token(TokenId id) const {
  if (id < 0 || id >= size()) {
    throw DataError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

std::vector<TokenId> Vocab::Encode(const std::vector<std::string>& words) const {
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(Lookup(w));
  return ids;
}

Vocab BuildVocab(const std::vector<std::vector<std::string>>& texts,
                 int min_count) {
  if (texts.empty()) throw DataError("empty corpus");
  std::map<std::string, int64_t> counts;
  for (const auto& text : texts) {
    for (const auto& w : text) ++counts[w];
  }
  std::vector<std::pair<std::string, int64_t>> kept;
  for (const auto& [w, c] : counts) {
    bool reserved = false;
    for (const char* r : kReservedTokens) reserved |= (w == r);
    if (!reserved && c >= min_count) kept.emplace_back(w, c);
  }
  // `counts` is already lexicographic, so a stable sort on count suffices.
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  std::vector<std::string> tokens(kReservedTokens, kReservedTokens + kNumReserved);
  for (auto& [w, c] : kept) tokens.push_back(w);
  return Vocab(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Utterances

void ValidateUtterance(const Utterance& utt) {
  if (utt.tokens.empty()) throw DataError("empty utterance");
  if (utt.confidences.size() != utt.tokens.size()) {
    throw DataError("confidence count does not match token count");
  }
  for (double c : utt.confidences) {
    if (!(c >= 0.0 && c <= 1.0)) throw DataError("confidence outside [0,1]");
  }
  if (utt.correct_flags && utt.correct_flags->size() != utt.tokens.size()) {
    throw DataError("flag count does not match token count");
  }
  if (utt.device_id < 0) throw DataError("negative device id");
}

int64_t CountTokens(const std::vector<Utterance>& utts) {
  int64_t n = 0;
  for (const auto& u : utts) n += u.length();
  return n;
}

void CorruptionConfig::Validate() const {
  if (!(error_rate >= 0.0 && error_rate < 1.0)) {
    throw UsageError("error_rate must be in [0,1)");
  }
  if (conf_correct.a <= 0 || conf_correct.b <= 0 || conf_wrong.a <= 0 ||
      conf_wrong.b <= 0) {
    throw UsageError("Beta parameters must be positive");
  }
  if (!(conf_correct.mean() > conf_wrong.mean())) {
    throw UsageError("confidence of correct tokens must exceed that of wrong ones");
  }
}

void ZipfConfig::Validate() const {
  if (n_devices < 1) throw UsageError("n_devices must be >= 1");
  if (!(exponent > 0.0)) throw UsageError("Zipf exponent must be > 0");
}

// ---------------------------------------------------------------------------
// Markov source

MarkovSource::MarkovSource(uint64_t seed, int n_symbols, int order)
    : n_symbols_(n_symbols), order_(order) {
  if (n_symbols < 2) throw UsageError("Markov source needs >= 2 symbols");
  if (order < 1) throw UsageError("markov_order must be >= 1");
  n_contexts_ = 1;
  for (int i = 0; i < order; ++i) n_contexts_ *= (n_symbols + 1);
  transitions_.assign(static_cast<size_t>(n_contexts_) * n_symbols, 0.0);

  Rng rng = MakeRng(seed, "markov-source");
  std::gamma_distribution<double> weight_dist(1.0, 1.0);
  const int k = std::min(kSuccessorsPerContext, n_symbols);
  std::vector<int> symbols(n_symbols);
  for (int c = 0; c < n_contexts_; ++c) {
    double* row = &transitions_[static_cast<size_t>(c) * n_symbols];
    std::iota(symbols.begin(), symbols.end(), 0);
    std::vector<double> w(k);
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
      const auto j = i + UniformIndex(rng, n_symbols - i);
      std::swap(symbols[i], symbols[j]);
      w[i] = weight_dist(rng) + 1e-3;
      total += w[i];
    }
    for (int s = 0; s < n_symbols; ++s) row[s] = kFloorMass / n_symbols;
    for (int i = 0; i < k; ++i) row[symbols[i]] += (1.0 - kFloorMass) * w[i] / total;
  }
}

MarkovSource MarkovSource::Blend(const MarkovSource& a, const MarkovSource& b,
                                 double weight) {
  if (a.n_symbols_ != b.n_symbols_ || a.order_ != b.order_) {
    throw UsageError("cannot blend Markov sources of different shapes");
  }
  MarkovSource out;
  out.n_symbols_ = a.n_symbols_;
  out.order_ = a.order_;
  out.n_contexts_ = a.n_contexts_;
  out.transitions_.resize(a.transitions_.size());
  for (size_t i = 0; i < a.transitions_.size(); ++i) {
    out.transitions_[i] =
        (1.0 - weight) * a.transitions_[i] + weight * b.transitions_[i];
  }
  return out;
}

std::string MarkovSource::SymbolName(int symbol) const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%02d", symbol);
  return buf;
}

int MarkovSource::ContextIndex(const std::vector<int>& history) const {
  int index = 0;
  const int n = static_cast<int>(history.size());
  for (int i = n - order_; i < n; ++i) {
    const int digit = i < 0 ? n_symbols_ : history[i];
    index = index * (n_symbols_ + 1) + digit;
  }
  return index;
}

std::vector<int> MarkovSource::SampleSequence(Rng& rng, int length) const {
  std::vector<int> seq;
  seq.reserve(length);
  for (int pos = 0; pos < length; ++pos) {
    const int ctx = ContextIndex(seq);
    const double u = UniformUnit(rng);
    double acc = 0.0;
    int next = n_symbols_ - 1;
    for (int s = 0; s < n_symbols_; ++s) {
      acc += Probability(ctx, s);
      if (u < acc) {
        next = s;
        break;
      }
    }
    seq.push_back(next);
  }
  return seq;
}

std::vector<std::vector<std::string>> MarkovSource::Sample(
    int n_utts, int min_len, int max_len, uint64_t sample_seed) const {
  if (n_utts <= 0) throw UsageError("n_utts must be positive");
  if (min_len < 1 || max_len < min_len) {
    throw UsageError("length range must satisfy max >= min >= 1");
  }
  Rng rng = MakeRng(sample_seed, "markov-sample");
  std::vector<std::vector<std::string>> texts;
  texts.reserve(n_utts);
  for (int i = 0; i < n_utts; ++i) {
    const int len =
        min_len + static_cast<int>(UniformIndex(rng, max_len - min_len + 1));
    std::vector<std::string> words;
    for (int s : SampleSequence(rng, len)) words.push_back(SymbolName(s));
    texts.push_back(std::move(words));
  }
  return texts;
}

std::pair<std::vector<Utterance>, Vocab> GenerateSyntheticCorpus(
    uint64_t source_seed, int n_utts, std::pair<int, int> len_range,
    int markov_order) {
  if (n_utts <= 0) throw UsageError("n_utts must be positive");
  MarkovSource source(source_seed, kDefaultSymbols, markov_order);
  auto texts = source.Sample(n_utts, len_range.first, len_range.second,
                             source_seed);
  Vocab vocab = BuildVocab(texts, 1);
  return {EncodeTexts(texts, vocab), std::move(vocab)};
}

std::vector<Utterance> EncodeTexts(
    const std::vector<std::vector<std::string>>& texts, const Vocab& vocab) {
  std::vector<Utterance> utts;
  utts.reserve(texts.size());
  for (const auto& text : texts) {
    Utterance u;
    u.tokens = vocab.Encode(text);
    u.confidences.assign(u.tokens.size(), 1.0);
    utts.push_back(std::move(u));
  }
  return utts;
}

// ---------------------------------------------------------------------------
// Corruption and partitioning

std::vector<Utterance> Corrupt(const std::vector<Utterance>& utts,
                               int vocab_size, const CorruptionConfig& cfg) {
  cfg.Validate();
  const int n_regular = vocab_size - kNumReserved;
  if (cfg.error_rate > 0.0 && n_regular < 2) {
    throw UsageError("corruption needs at least two regular tokens");
  }
  Rng rng = MakeRng(cfg.seed, "corrupt");
  std::vector<Utterance> out;
  out.reserve(utts.size());
  for (const auto& in : utts) {
    Utterance u;
    u.device_id = in.device_id;
    u.tokens.resize(in.tokens.size());
    u.confidences.resize(in.tokens.size());
    std::vector<bool> flags(in.tokens.size(), true);
    for (size_t s = 0; s < in.tokens.size(); ++s) {
      TokenId tok = in.tokens[s];
      if (UniformUnit(rng) < cfg.error_rate) {
        // Uniform over the other regular tokens.
        const bool regular = tok >= kNumReserved;
        auto r = static_cast<TokenId>(
            kNumReserved + UniformIndex(rng, regular ? n_regular - 1 : n_regular));
        if (regular && r >= tok) ++r;
        tok = r;
        flags[s] = false;
      }
      const BetaParams& beta = flags[s] ? cfg.conf_correct : cfg.conf_wrong;
      u.tokens[s] = tok;
      u.confidences[s] = SampleBeta(rng, beta.a, beta.b);
    }
    u.correct_flags = std::move(flags);
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<DeviceId> ZipfPartition(int64_t n_utts, const ZipfConfig& cfg) {
  cfg.Validate();
  if (n_utts < 1) throw UsageError("n_utts must be >= 1");
  std::vector<double> cdf(cfg.n_devices);
  double total = 0.0;
  for (int64_t r = 0; r < cfg.n_devices; ++r) {
    total += std::pow(static_cast<double>(r + 1), -cfg.exponent);
    cdf[r] = total;
  }
  std::vector<DeviceId> ids(n_utts);
  for (int64_t k = 0; k < n_utts; ++k) {
    const uint64_t bits = StreamSeed(cfg.seed, "zipf", {static_cast<uint64_t>(k)});
    const double u = static_cast<double>(bits >> 11) * 0x1.0p-53 * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    ids[k] = std::min<int64_t>(it - cdf.begin(), cfg.n_devices - 1);
  }
  return ids;
}

std::map<DeviceId, std::vector<Utterance>> ShardByDevice(
    const std::vector<Utterance>& utts) {
  std::map<DeviceId, std::vector<Utterance>> shards;
  for (const auto& u : utts) shards[u.device_id].push_back(u);
  return shards;
}

// ---------------------------------------------------------------------------
// Serialization

void SaveCorpus(const std::vector<Utterance>& utts, const Vocab& vocab,
                const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "#vocab " << vocab.size() << '\n';
  for (const auto& t : vocab.tokens()) out << t << '\n';
  char buf[32];
  for (const auto& u : utts) {
    out << u.device_id << '\t';
    for (size_t s = 0; s < u.tokens.size(); ++s) {
      if (s) out << ',';
      out << u.tokens[s];
    }
    out << '\t';
    for (size_t s = 0; s < u.confidences.size(); ++s) {
      if (s) out << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", u.confidences[s]);
      out << buf;
    }
    out << '\t';
    if (u.correct_flags) {
      for (size_t s = 0; s < u.correct_flags->size(); ++s) {
        if (s) out << ',';
        out << ((*u.correct_flags)[s] ? '1' : '0');
      }
    } else {
      out << '-';
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path);
}

std::pair<std::vector<Utterance>, Vocab> LoadCorpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || line.rfind("#vocab ", 0) != 0) {
    FailAt(path, line_no, "expected '#vocab <n>' header");
  }
  const long long n_vocab = ParseInt(line.substr(7), path, line_no);
  if (n_vocab < kNumReserved) FailAt(path, line_no, "vocab too small");
  std::vector<std::string> tokens;
  for (long long i = 0; i < n_vocab; ++i) {
    ++line_no;
    if (!std::getline(in, line)) FailAt(path, line_no, "truncated vocab");
    tokens.push_back(line);
  }
  Vocab vocab = [&] {
    try {
      return Vocab(std::move(tokens));
    } catch (const DataError& e) {
      FailAt(path, line_no, e.what());
    }
  }();

  std::vector<Utterance> utts;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = SplitOn(line, '\t');
    if (fields.size() != 4) FailAt(path, line_no, "expected 4 tab-separated fields");
    Utterance u;
    u.device_id = ParseInt(fields[0], path, line_no);
    if (u.device_id < 0) FailAt(path, line_no, "negative device id");
    for (const auto& t : SplitOn(fields[1], ',')) {
      const long long id = ParseInt(t, path, line_no);
      if (id < 0 || id >= vocab.size()) FailAt(path, line_no, "token id out of range");
      u.tokens.push_back(static_cast<TokenId>(id));
    }
    for (const auto& c : SplitOn(fields[2], ',')) {
      const double v = ParseDouble(c, path, line_no);
      if (!(v >= 0.0 && v <= 1.0)) {
        FailAt(path, line_no, "confidence " + c + " outside [0,1]");
      }
      u.confidences.push_back(v);
    }
    if (fields[3] != "-") {
      std::vector<bool> flags;
      for (const auto& f : SplitOn(fields[3], ',')) {
        if (f != "0" && f != "1") FailAt(path, line_no, "flag must be 0 or 1");
        flags.push_back(f == "1");
      }
      u.correct_flags = std::move(flags);
    }
    if (u.confidences.size() != u.tokens.size() ||
        (u.correct_flags && u.correct_flags->size() != u.tokens.size())) {
      FailAt(path, line_no, "field lengths disagree");
    }
    utts.push_back(std::move(u));
  }
  return {std::move(utts), std::move(vocab)};
}

}  // namespace fedlm
