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

#include "fedlm/loss.h"

#include <cerrno>
#include <cstdlib>

#include "fedlm/errors.h"

namespace fedlm {

LossMode LossMode::HardThreshold(double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw UsageError("threshold must be in [0,1]");
  return {Kind::kHardThreshold, c};
}

LossMode LossMode::Parse(const std::string& text) {
  if (text == "all") return All();
  if (text == "utt") return UttWeight();
  if (text == "token") return TokenWeight();
  if (text == "hard") return HardThreshold(0.5);
  if (text.rfind("hard:", 0) == 0) {
    const std::string num = text.substr(5);
    errno = 0;
    char* end = nullptr;
    const double c = std::strtod(num.c_str(), &end);
    if (num.empty() || errno != 0 || *end != '\0') {
      throw UsageError("bad threshold in loss '" + text + "'");
    }
    return HardThreshold(c);
  }
  throw UsageError("unknown loss '" + text + "' (expected all, hard:<c>, utt, token)");
}

std::string LossMode::ToString() const {
  switch (kind) {
    case Kind::kAll:
      return "all";
    case Kind::kHardThreshold:
      return "hard:" + FormatExact(threshold);
    case Kind::kUttWeight:
      return "utt";
    case Kind::kTokenWeight:
      return "token";
  }
  return "all";
}

double UtteranceConfidence(const Utterance& utt) {
  if (utt.confidences.empty()) throw DataError("empty utterance has no confidence");
  double sum = 0.0;
  for (double c : utt.confidences) sum += c;
  return sum / static_cast<double>(utt.confidences.size());
}

BatchLoss ComputeBatchLoss(const LanguageModel& model, const ParamVector& params,
                           const std::vector<Utterance>& batch,
                           const LossMode& mode) {
  if (batch.empty()) throw DataError("empty batch");
  BatchLoss out;
  out.gradient = ParamVector(model.num_params());

  std::vector<const Utterance*> kept;
  kept.reserve(batch.size());
  for (const auto& u : batch) {
    if (u.tokens.empty()) throw DataError("empty utterance in batch");
    if (mode.kind == LossMode::Kind::kHardThreshold &&
        UtteranceConfidence(u) < mode.threshold) {
      continue;
    }
    kept.push_back(&u);
  }
  if (kept.empty()) {
    out.skipped = true;
    return out;
  }

  const double n_b = static_cast<double>(kept.size());
  std::vector<double> weights;
  for (const Utterance* u : kept) {
    const ForwardTrace tr = model.Forward(params, u->tokens);
    const int n = tr.steps();
    const double utt_conf = mode.kind == LossMode::Kind::kUttWeight ||
                                    mode.kind == LossMode::Kind::kTokenWeight
                                ? UtteranceConfidence(*u)
                                : 1.0;
    weights.assign(n, 0.0);
    for (int s = 0; s < n; ++s) {
      double mult = 1.0;
      if (mode.kind == LossMode::Kind::kUttWeight) {
        mult = utt_conf;
      } else if (mode.kind == LossMode::Kind::kTokenWeight) {
        // The end-of-sentence position (when scored) has no token confidence
        // of its own and takes the utterance mean.
        mult = s < u->length() ? u->confidences[s] : utt_conf;
      }
      weights[s] = mult / n / n_b;
      out.value -= weights[s] * tr.log_probs[s];
    }
    model.Backward(params, tr, weights, out.gradient);
    out.tokens_used += u->length();
  }
  out.utts_used = static_cast<int64_t>(kept.size());
  return out;
}

}  // namespace fedlm
