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

#include "fedlm/model.h"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fedlm/errors.h"
#include "fedlm/rng.h"

namespace fedlm {
namespace {

int GateCount(CellType cell) { return cell == CellType::kLstm ? 4 : 1; }

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y += W x, W is [rows x cols] row-major.
void MatVecAdd(const double* w, const double* x, int rows, int cols, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w + static_cast<size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// y += W^T x
void MatTVecAdd(const double* w, const double* x, int rows, int cols, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* row = w + static_cast<size_t>(r) * cols;
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (int c = 0; c < cols; ++c) y[c] += row[c] * xr;
  }
}

// W += a b^T
void OuterAdd(const double* a, const double* b, int rows, int cols, double* w) {
  for (int r = 0; r < rows; ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* row = w + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) row[c] += ar * b[c];
  }
}

}  // namespace

std::string CellName(CellType cell) {
  return cell == CellType::kLstm ? "lstm" : "tanh";
}

CellType ParseCell(const std::string& name) {
  if (name == "lstm") return CellType::kLstm;
  if (name == "tanh" || name == "rnn") return CellType::kTanh;
  throw UsageError("unknown cell type '" + name + "' (expected lstm or tanh)");
}

void ModelConfig::Validate() const {
  if (vocab_size < 1 || embed_dim < 1 || hidden_dim < 1 || n_layers < 1) {
    throw UsageError("model dimensions must all be >= 1");
  }
}

ParamLayout::ParamLayout(const ModelConfig& cfg) {
  cfg.Validate();
  const size_t gh = static_cast<size_t>(GateCount(cfg.cell)) * cfg.hidden_dim;
  size_t off = 0;
  embedding = off;
  off += static_cast<size_t>(cfg.vocab_size) * cfg.embed_dim;
  for (int l = 0; l < cfg.n_layers; ++l) {
    Layer layer;
    layer.input_dim = l == 0 ? cfg.embed_dim : cfg.hidden_dim;
    layer.w_in = off;
    off += gh * layer.input_dim;
    layer.w_rec = off;
    off += gh * cfg.hidden_dim;
    layer.bias = off;
    off += gh;
    layers.push_back(layer);
  }
  out_w = off;
  off += static_cast<size_t>(cfg.vocab_size) * cfg.hidden_dim;
  out_b = off;
  off += cfg.vocab_size;
  total = off;
}

LanguageModel::LanguageModel(ModelConfig cfg)
    : cfg_(std::move(cfg)), layout_(cfg_) {}

void LanguageModel::CheckParams(const ParamVector& params) const {
  if (params.size() != layout_.total) {
    throw DataError("parameter vector has length " +
                    std::to_string(params.size()) + ", model expects " +
                    std::to_string(layout_.total));
  }
}

ParamVector LanguageModel::Init(uint64_t seed, double scale) const {
  ParamVector p(layout_.total);
  if (scale == 0.0) return p;
  Rng rng = MakeRng(seed, "model-init");
  auto fill = [&](size_t begin, size_t count) {
    for (size_t i = begin; i < begin + count; ++i) {
      p[i] = scale * (2.0 * UniformUnit(rng) - 1.0);
    }
  };
  const size_t gh = static_cast<size_t>(GateCount(cfg_.cell)) * cfg_.hidden_dim;
  fill(layout_.embedding, static_cast<size_t>(cfg_.vocab_size) * cfg_.embed_dim);
  for (const auto& layer : layout_.layers) {
    fill(layer.w_in, gh * layer.input_dim);
    fill(layer.w_rec, gh * cfg_.hidden_dim);
  }
  fill(layout_.out_w, static_cast<size_t>(cfg_.vocab_size) * cfg_.hidden_dim);
  return p;
}

ForwardTrace LanguageModel::Forward(const ParamVector& params,
                                    std::span<const TokenId> tokens) const {
  CheckParams(params);
  const int V = cfg_.vocab_size;
  const int E = cfg_.embed_dim;
  const int H = cfg_.hidden_dim;
  const int G = GateCount(cfg_.cell);
  const bool lstm = cfg_.cell == CellType::kLstm;

  ForwardTrace tr;
  tr.inputs.push_back(kBosId);
  for (size_t s = 0; s < tokens.size(); ++s) {
    const TokenId t = tokens[s];
    if (t < 0 || t >= V) {
      throw DataError("token id " + std::to_string(t) + " outside vocab of size " +
                      std::to_string(V));
    }
    tr.targets.push_back(t);
    if (s + 1 < tokens.size() || cfg_.score_eos) tr.inputs.push_back(t);
  }
  if (cfg_.score_eos) tr.targets.push_back(kEosId);
  const int n = tr.steps();

  const double* p = params.data();
  tr.hidden.assign(cfg_.n_layers, std::vector<double>(static_cast<size_t>(n) * H));
  if (lstm) {
    tr.cell.assign(cfg_.n_layers, std::vector<double>(static_cast<size_t>(n) * H));
    tr.gates.assign(cfg_.n_layers,
                    std::vector<double>(static_cast<size_t>(n) * G * H));
  }
  std::vector<double> pre(static_cast<size_t>(G) * H);
  const std::vector<double> zeros(H, 0.0);

  for (int l = 0; l < cfg_.n_layers; ++l) {
    const auto& layer = layout_.layers[l];
    for (int t = 0; t < n; ++t) {
      const double* input =
          l == 0 ? p + layout_.embedding + static_cast<size_t>(tr.inputs[t]) * E
                 : &tr.hidden[l - 1][static_cast<size_t>(t) * H];
      const double* h_prev =
          t == 0 ? zeros.data() : &tr.hidden[l][static_cast<size_t>(t - 1) * H];
      std::copy(p + layer.bias, p + layer.bias + G * H, pre.begin());
      MatVecAdd(p + layer.w_in, input, G * H, layer.input_dim, pre.data());
      MatVecAdd(p + layer.w_rec, h_prev, G * H, H, pre.data());
      double* h = &tr.hidden[l][static_cast<size_t>(t) * H];
      if (!lstm) {
        for (int k = 0; k < H; ++k) h[k] = std::tanh(pre[k]);
        continue;
      }
      const double* c_prev =
          t == 0 ? zeros.data() : &tr.cell[l][static_cast<size_t>(t - 1) * H];
      double* c = &tr.cell[l][static_cast<size_t>(t) * H];
      double* gate = &tr.gates[l][static_cast<size_t>(t) * G * H];
      for (int k = 0; k < H; ++k) {
        const double ig = Sigmoid(pre[k]);
        const double fg = Sigmoid(pre[H + k]);
        const double gg = std::tanh(pre[2 * H + k]);
        const double og = Sigmoid(pre[3 * H + k]);
        gate[k] = ig;
        gate[H + k] = fg;
        gate[2 * H + k] = gg;
        gate[3 * H + k] = og;
        c[k] = fg * c_prev[k] + ig * gg;
        h[k] = og * std::tanh(c[k]);
      }
    }
  }

  tr.probs.resize(static_cast<size_t>(n) * V);
  tr.log_probs.resize(n);
  const auto& top = tr.hidden.back();
  for (int t = 0; t < n; ++t) {
    double* logits = &tr.probs[static_cast<size_t>(t) * V];
    std::copy(p + layout_.out_b, p + layout_.out_b + V, logits);
    MatVecAdd(p + layout_.out_w, &top[static_cast<size_t>(t) * H], V, H, logits);
    const double mx = *std::max_element(logits, logits + V);
    double sum = 0.0;
    for (int v = 0; v < V; ++v) sum += std::exp(logits[v] - mx);
    const double log_z = mx + std::log(sum);
    tr.log_probs[t] = logits[tr.targets[t]] - log_z;
    for (int v = 0; v < V; ++v) logits[v] = std::exp(logits[v] - log_z);
  }
  return tr;
}

std::vector<ForwardTrace> LanguageModel::ForwardBatch(
    const ParamVector& params, const std::vector<Utterance>& batch) const {
  std::vector<ForwardTrace> out;
  out.reserve(batch.size());
  for (const auto& u : batch) out.push_back(Forward(params, u.tokens));
  return out;
}

void LanguageModel::Backward(const ParamVector& params, const ForwardTrace& tr,
                             std::span<const double> weights,
                             ParamVector& grad) const {
  CheckParams(params);
  CheckParams(grad);
  const int n = tr.steps();
  if (static_cast<int>(weights.size()) != n) {
    throw DataError("loss weights have length " + std::to_string(weights.size()) +
                    ", trace has " + std::to_string(n) + " scored positions");
  }
  const int V = cfg_.vocab_size;
  const int E = cfg_.embed_dim;
  const int H = cfg_.hidden_dim;
  const int G = GateCount(cfg_.cell);
  const bool lstm = cfg_.cell == CellType::kLstm;
  const double* p = params.data();
  double* g = grad.data();

  // Output layer. d(-w log p_y)/d logits = w (p - e_y).
  std::vector<double> d_above(static_cast<size_t>(n) * H, 0.0);
  std::vector<double> d_logits(V);
  const auto& top = tr.hidden.back();
  for (int t = 0; t < n; ++t) {
    const double w = weights[t];
    if (w == 0.0) continue;
    const double* prob = &tr.probs[static_cast<size_t>(t) * V];
    for (int v = 0; v < V; ++v) d_logits[v] = w * prob[v];
    d_logits[tr.targets[t]] -= w;
    const double* h = &top[static_cast<size_t>(t) * H];
    OuterAdd(d_logits.data(), h, V, H, g + layout_.out_w);
    for (int v = 0; v < V; ++v) g[layout_.out_b + v] += d_logits[v];
    MatTVecAdd(p + layout_.out_w, d_logits.data(), V, H,
               &d_above[static_cast<size_t>(t) * H]);
  }

  std::vector<double> d_pre(static_cast<size_t>(G) * H);
  std::vector<double> dh_next(H), dc_next(H);
  const std::vector<double> zeros(H, 0.0);
  for (int l = cfg_.n_layers - 1; l >= 0; --l) {
    const auto& layer = layout_.layers[l];
    std::vector<double> d_below(static_cast<size_t>(n) * layer.input_dim, 0.0);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    std::fill(dc_next.begin(), dc_next.end(), 0.0);
    for (int t = n - 1; t >= 0; --t) {
      const double* h = &tr.hidden[l][static_cast<size_t>(t) * H];
      const double* h_prev =
          t == 0 ? zeros.data() : &tr.hidden[l][static_cast<size_t>(t - 1) * H];
      const double* input =
          l == 0 ? p + layout_.embedding + static_cast<size_t>(tr.inputs[t]) * E
                 : &tr.hidden[l - 1][static_cast<size_t>(t) * H];
      const double* dh_up = &d_above[static_cast<size_t>(t) * H];
      if (!lstm) {
        for (int k = 0; k < H; ++k) {
          d_pre[k] = (dh_up[k] + dh_next[k]) * (1.0 - h[k] * h[k]);
        }
      } else {
        const double* c = &tr.cell[l][static_cast<size_t>(t) * H];
        const double* c_prev =
            t == 0 ? zeros.data() : &tr.cell[l][static_cast<size_t>(t - 1) * H];
        const double* gate = &tr.gates[l][static_cast<size_t>(t) * G * H];
        for (int k = 0; k < H; ++k) {
          const double ig = gate[k], fg = gate[H + k], gg = gate[2 * H + k],
                       og = gate[3 * H + k];
          const double dh = dh_up[k] + dh_next[k];
          const double tc = std::tanh(c[k]);
          const double dc = dc_next[k] + dh * og * (1.0 - tc * tc);
          d_pre[k] = dc * gg * ig * (1.0 - ig);
          d_pre[H + k] = dc * c_prev[k] * fg * (1.0 - fg);
          d_pre[2 * H + k] = dc * ig * (1.0 - gg * gg);
          d_pre[3 * H + k] = dh * tc * og * (1.0 - og);
          dc_next[k] = dc * fg;
        }
      }
      OuterAdd(d_pre.data(), input, G * H, layer.input_dim, g + layer.w_in);
      OuterAdd(d_pre.data(), h_prev, G * H, H, g + layer.w_rec);
      for (int k = 0; k < G * H; ++k) g[layer.bias + k] += d_pre[k];
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      MatTVecAdd(p + layer.w_rec, d_pre.data(), G * H, H, dh_next.data());
      MatTVecAdd(p + layer.w_in, d_pre.data(), G * H, layer.input_dim,
                 &d_below[static_cast<size_t>(t) * layer.input_dim]);
    }
    if (l > 0) {
      d_above = std::move(d_below);
    } else {
      for (int t = 0; t < n; ++t) {
        double* row = g + layout_.embedding + static_cast<size_t>(tr.inputs[t]) * E;
        const double* d = &d_below[static_cast<size_t>(t) * E];
        for (int k = 0; k < E; ++k) row[k] += d[k];
      }
    }
  }
}

ParamVector LanguageModel::Backward(const ParamVector& params,
                                    const ForwardTrace& trace,
                                    std::span<const double> weights) const {
  ParamVector grad(layout_.total);
  Backward(params, trace, weights, grad);
  return grad;
}

PerplexityReport EvaluatePerplexity(const LanguageModel& model,
                                    const ParamVector& params,
                                    const std::vector<Utterance>& utts) {
  if (utts.empty()) throw DataError("cannot evaluate perplexity on an empty corpus");
  PerplexityReport r;
  for (const auto& u : utts) {
    const ForwardTrace tr = model.Forward(params, u.tokens);
    for (double lp : tr.log_probs) r.total_nll -= lp;
    r.tokens += tr.steps();
  }
  r.perplexity = std::exp(r.total_nll / static_cast<double>(r.tokens));
  return r;
}

double Perplexity(const LanguageModel& model, const ParamVector& params,
                  const std::vector<Utterance>& utts) {
  return EvaluatePerplexity(model, params, utts).perplexity;
}

std::string FormatExact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void SaveCheckpoint(const ModelConfig& cfg, const ParamVector& params,
                    const std::string& path) {
  if (params.size() != ParamLayout(cfg).total) {
    throw DataError("checkpoint parameters do not match the model config");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "#model " << cfg.vocab_size << ' ' << cfg.embed_dim << ' '
      << cfg.hidden_dim << ' ' << cfg.n_layers << ' ' << CellName(cfg.cell)
      << '\n';
  for (double v : params.values()) out << FormatExact(v) << '\n';
  if (!out) throw DataError("write failed for " + path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ":1: empty checkpoint");
  std::istringstream header(line);
  std::string tag, cell;
  Checkpoint ck;
  if (!(header >> tag >> ck.config.vocab_size >> ck.config.embed_dim >>
        ck.config.hidden_dim >> ck.config.n_layers >> cell) ||
      tag != "#model") {
    throw DataError(path + ":1: expected '#model <V> <E> <H> <layers> <cell>'");
  }
  try {
    ck.config.cell = ParseCell(cell);
    ck.config.Validate();
  } catch (const UsageError& e) {
    throw DataError(path + ":1: " + e.what());
  }
  const size_t expected = ParamLayout(ck.config).total;
  std::vector<double> values;
  values.reserve(expected);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (line.empty() || errno != 0 || *end != '\0') {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad value '" +
                      line + "'");
    }
    values.push_back(v);
  }
  if (values.size() != expected) {
    throw DataError(path + ": expected " + std::to_string(expected) +
                    " values, found " + std::to_string(values.size()));
  }
  ck.params = ParamVector(std::move(values));
  return ck;
}

}  // namespace fedlm
