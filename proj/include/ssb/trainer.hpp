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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ssb/encoder.hpp"
#include "ssb/rng.hpp"
#include "ssb/tensor.hpp"
#include "ssb/tokenizer.hpp"

namespace ssb {

struct TrainConfig {
  double temperature = 0.05;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 1;
  // 0 means no cap beyond the epoch count.
  std::size_t max_steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  bool freeze_adapters = true;
  std::uint64_t seed = 0;

  // lr 1e-5, batch 512, temperature 0.05, one epoch, adapters frozen
  static TrainConfig paper();

  std::vector<std::string> problems() const;
  void validate() const;
};

struct EmbeddingBatch {
  Tensor<double> anchors;
  Tensor<double> positives;
  std::string language;
};

// Mean over anchors i of
//   -log( exp(cos(a_i, p_i)/tau) / sum_j exp(cos(a_i, p_j)/tau) ),
// the softmax cross-entropy of the [N x N] cosine matrix over tau with the
// diagonal as labels. The positives of the other rows are the negatives.
template <typename T>
Tensor<T> contrastive_loss(Tape<T>& tape, const Tensor<T>& anchors, const Tensor<T>& positives,
                           double temperature);

double contrastive_loss(const EmbeddingBatch& batch, double temperature);

template <typename T>
struct OptState {
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  std::vector<bool> frozen;
  std::size_t step = 0;

  // Moment buffers for every non-frozen parameter; frozen ones get none.
  static OptState create(const std::vector<Parameter<T>>& params, bool freeze_adapters);
};

// One decoupled-weight-decay Adam update over the parameters selected by
// `active` (all when empty). Frozen parameters are never touched. A selected,
// unfrozen parameter without a gradient is a ContractError.
template <typename T>
void adamw_step(std::vector<Parameter<T>>& params, OptState<T>& state, const TrainConfig& cfg,
                const std::vector<bool>& active = {});

// Marks adapters as not requiring gradients when freezing, everything
// else as trainable.
template <typename T>
void configure_trainable(EncoderModel<T>& model, bool freeze_adapters);

// Encodes both sides with dropout active (independent masks), pools,
// computes the contrastive loss, backpropagates and applies AdamW to the
// unfrozen parameters routed for `language`. Returns the loss before the
// update.
template <typename T>
double train_step(EncoderModel<T>& model, const TokenBatch& anchors, const TokenBatch& positives,
                  std::string_view language, const TrainConfig& cfg, OptState<T>& state, Rng& rng);

struct TokenizedPair {
  TokenSequence anchor;
  TokenSequence positive;
  std::string language;
};

// Packs a language-homogeneous slice of pairs; mixed languages are a
// ContractError.
struct PairBatch {
  TokenBatch anchors;
  TokenBatch positives;
  std::string language;
};
PairBatch collate(std::span<const TokenizedPair> pairs);

struct LossRecord {
  std::size_t step = 0;
  std::string language;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> history;
  std::size_t steps = 0;
};

using StepCallback = std::function<void(const LossRecord&)>;

// Runs the configured number of epochs over language-homogeneous batches.
// Each epoch shuffles pairs within each language, cuts batches of
// batch_size (a final batch of fewer than two pairs is dropped) and
// shuffles the batch order.
template <typename T>
TrainResult train(EncoderModel<T>& model, std::span<const TokenizedPair> corpus,
                  const TrainConfig& cfg, const StepCallback& on_step = {});

// CSV with header "step,language,loss".
void write_loss_history(const std::vector<LossRecord>& history, const std::filesystem::path& path);

}  // namespace ssb
