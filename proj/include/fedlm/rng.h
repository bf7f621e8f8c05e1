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

#ifndef FEDLM_RNG_H_
#define FEDLM_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace fedlm {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a root seed, a purpose string and a
// list of integer ids (device, round, epoch, ...). Distinct purposes give
// unrelated streams, so enabling one consumer never shifts another.
uint64_t StreamSeed(uint64_t root, std::string_view purpose,
                    std::initializer_list<uint64_t> ids = {});

inline Rng MakeRng(uint64_t root, std::string_view purpose,
                   std::initializer_list<uint64_t> ids = {}) {
  return Rng(StreamSeed(root, purpose, ids));
}

// Beta(a, b) via the ratio of two gamma variates.
double SampleBeta(Rng& rng, double a, double b);

// Uniform double in [0, 1) built from the top 53 bits.
inline double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
uint64_t UniformIndex(Rng& rng, uint64_t n);

}  // namespace fedlm

#endif  // FEDLM_RNG_H_
