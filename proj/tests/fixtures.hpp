// Copyright 2026 The ssb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ssb/encoder.hpp"
#include "ssb/rng.hpp"
#include "ssb/tokenizer.hpp"
#include "ssb/trainer.hpp"

namespace ssb::testing {

inline EncoderConfig tiny_config(std::size_t vocab = 20) {
  EncoderConfig c;
  c.vocab_size = vocab;
  c.hidden = 8;
  c.layers = 1;
  c.heads = 1;
  c.ffn = 16;
  c.adapter = 4;
  c.languages = {"de", "fr"};
  c.max_positions = 16;
  c.dropout = 0.0;
  return c;
}

// Random sequences with CLS/SEP framing and variable padding.
inline TokenBatch random_batch(Rng& rng, std::size_t n, std::size_t max_len, std::size_t vocab) {
  std::vector<TokenSequence> seqs;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t words = 1 + rng.below(max_len - 2);
    std::vector<TokenId> ids;
    for (std::size_t k = 0; k < words; ++k) {
      ids.push_back(static_cast<TokenId>(kReservedTokens + rng.below(vocab - kReservedTokens)));
    }
    std::vector<TokenId> framed{kClsId};
    framed.insert(framed.end(), ids.begin(), ids.end());
    framed.push_back(kSepId);
    seqs.push_back(pad_truncate(framed, max_len));
  }
  return make_batch(seqs);
}

template <typename T>
Tensor<T> pipeline_loss(Tape<T>& tape, const EncoderModel<T>& model, const TokenBatch& anchors,
                        const TokenBatch& positives, const std::string& language, double temperature) {
  const Tensor<T> a = model.embed(tape, anchors, language);
  const Tensor<T> p = model.embed(tape, positives, language);
  return contrastive_loss(tape, a, p, temperature);
}

// Literal per-anchor evaluation: -log(e^{cos(a_i,p_i)/t} / sum_j e^{cos(a_i,p_j)/t}), averaged.
inline double loop_loss(const std::vector<std::vector<double>>& anchors,
                        const std::vector<std::vector<double>>& positives, double temperature) {
  auto cos = [](const std::vector<double>& x, const std::vector<double>& y) {
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      dot += x[k] * y[k];
      nx += x[k] * x[k];
      ny += y[k] * y[k];
    }
    return dot / (std::sqrt(nx) * std::sqrt(ny));
  };
  double total = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double num = std::exp(cos(anchors[i], positives[i]) / temperature);
    double den = 0.0;
    for (std::size_t j = 0; j < positives.size(); ++j) den += std::exp(cos(anchors[i], positives[j]) / temperature);
    total += -std::log(num / den);
  }
  return total / static_cast<double>(anchors.size());
}

inline Tensor<double> to_tensor(const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor<double>::from_data({rows.size(), rows.front().size()}, std::move(flat));
}

}  // namespace ssb::testing
