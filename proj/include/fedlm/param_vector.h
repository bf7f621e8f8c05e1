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

#ifndef FEDLM_PARAM_VECTOR_H_
#define FEDLM_PARAM_VECTOR_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fedlm {

// Flat view of every model parameter; the unit exchanged between clients and
// the server. Element-wise helpers assume equal lengths.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  size_t size() const { return values_.size(); }
  double& operator[](size_t i) { return values_[i]; }
  double operator[](size_t i) const { return values_[i]; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }
  const std::vector<double>& values() const { return values_; }

  // this += alpha * x
  void Axpy(double alpha, const ParamVector& x) {
    for (size_t i = 0; i < values_.size(); ++i) values_[i] += alpha * x.values_[i];
  }
  void Scale(double alpha) {
    for (double& v : values_) v *= alpha;
  }
  void SetZero() { std::fill(values_.begin(), values_.end(), 0.0); }

  double SquaredNorm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return s;
  }
  double Norm() const { return std::sqrt(SquaredNorm()); }

  bool operator==(const ParamVector& other) const = default;

 private:
  std::vector<double> values_;
};

inline ParamVector operator-(const ParamVector& a, const ParamVector& b) {
  ParamVector out = a;
  out.Axpy(-1.0, b);
  return out;
}

}  // namespace fedlm

#endif  // FEDLM_PARAM_VECTOR_H_
