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

#ifndef FEDLM_LOSS_H_
#define FEDLM_LOSS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "fedlm/corpus.h"
#include "fedlm/model.h"
#include "fedlm/param_vector.h"

namespace fedlm {

// Client training objective.
//   kAll            plain per-utterance-normalized cross entropy
//   kHardThreshold  the same, over utterances with confidence >= threshold
//   kUttWeight      each utterance scaled by its mean token confidence
//   kTokenWeight    each token scaled by its own confidence
struct LossMode {
  enum class Kind { kAll, kHardThreshold, kUttWeight, kTokenWeight };

  Kind kind = Kind::kAll;
  double threshold = 0.5;

  static LossMode All() { return {Kind::kAll, 0.0}; }
  static LossMode HardThreshold(double c);
  static LossMode UttWeight() { return {Kind::kUttWeight, 0.0}; }
  static LossMode TokenWeight() { return {Kind::kTokenWeight, 0.0}; }

  // "all" | "hard:<c>" | "hard" (c = 0.5) | "utt" | "token"
  static LossMode Parse(const std::string& text);
  std::string ToString() const;

  bool operator==(const LossMode& other) const = default;
};

// Mean token confidence of one utterance.
double UtteranceConfidence(const Utterance& utt);

struct BatchLoss {
  double value = 0.0;
  ParamVector gradient;
  int64_t tokens_used = 0;
  int64_t utts_used = 0;
  // Every utterance fell below the threshold; callers skip the SGD step.
  bool skipped = false;
};

// Loss value and exact gradient for one mini-batch. Reads only the
// confidences of each utterance, never its ground-truth flags.
BatchLoss ComputeBatchLoss(const LanguageModel& model, const ParamVector& params,
                           const std::vector<Utterance>& batch,
                           const LossMode& mode);

}  // namespace fedlm

#endif  // FEDLM_LOSS_H_
