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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssb/rng.hpp"
#include "ssb/tensor.hpp"
#include "ssb/tokenizer.hpp"

namespace ssb {

enum class Pooling { mean, cls, max };

std::string_view pooling_name(Pooling p);
Pooling parse_pooling(std::string_view name);

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn = 128;
  std::size_t adapter = 16;
  std::vector<std::string> languages{"de", "fr", "it", "rm"};
  std::size_t max_positions = 64;
  double dropout = 0.1;
  double layer_norm_eps = 1e-5;
  Pooling pooling = Pooling::mean;

  // Empty when valid, otherwise one message per violated constraint.
  std::vector<std::string> problems() const;
  void validate() const;  // throws ConfigError listing every problem
  std::optional<std::size_t> language_index(std::string_view code) const;
  bool operator==(const EncoderConfig&) const = default;
};

// Closed-form trainable parameter count for a configuration.
std::size_t parameter_count(const EncoderConfig& config);

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  bool adapter = false;
  // Index into EncoderConfig::languages for adapter parameters.
  std::size_t language = 0;
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
};

// Post-layer-norm transformer encoder with one bottleneck adapter per
// (layer, language). After each layer's FFN block the routed adapter
// computes LN(h + up(gelu(down(h)))).
template <typename T>
class EncoderModel {
 public:
  static EncoderModel init(const EncoderConfig& config, std::uint64_t seed);

  EncoderModel(EncoderModel&&) noexcept = default;
  EncoderModel& operator=(EncoderModel&&) noexcept = default;
  EncoderModel(const EncoderModel&) = delete;
  EncoderModel& operator=(const EncoderModel&) = delete;

  EncoderModel clone() const;

  const EncoderConfig& config() const noexcept { return config_; }

  // Hidden states [N x L x d] of the last layer.
  Tensor<T> encode(Tape<T>& tape, const TokenBatch& batch, std::string_view language,
                   const ForwardOptions& options = {}) const;

  // encode() followed by the configured pooling: [N x d].
  Tensor<T> embed(Tape<T>& tape, const TokenBatch& batch, std::string_view language,
                  const ForwardOptions& options = {}) const;

  // Every trainable tensor in a fixed, documented order.
  std::vector<Parameter<T>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<T>>& parameters() const noexcept { return params_; }
  const Parameter<T>& parameter(std::string_view name) const;
  std::size_t parameter_count() const;

 private:
  struct Linear {
    Tensor<T> weight;  // [in x out]
    Tensor<T> bias;    // may be undefined
  };
  struct Norm {
    Tensor<T> gamma;
    Tensor<T> beta;
  };
  struct Adapter {
    Linear down;
    Linear up;
    Norm norm;
  };
  struct Layer {
    Linear query, key, value, output;
    Norm attention_norm;
    Linear ffn_in, ffn_out;
    Norm ffn_norm;
    std::vector<Adapter> adapters;
  };

  EncoderModel() = default;
  void build_registry();
  Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Linear& l) const;
  Tensor<T> norm(Tape<T>& tape, const Tensor<T>& x, const Norm& n) const;

  EncoderConfig config_;
  Tensor<T> token_embedding_;
  Tensor<T> position_embedding_;
  Norm embedding_norm_;
  std::vector<Layer> layers_;
  std::vector<Parameter<T>> params_;
};

// Pools hidden states [N x L x d] over positions with mask 1.
template <typename T>
Tensor<T> pool(Tape<T>& tape, const Tensor<T>& hidden, std::span<const std::uint8_t> mask,
               Pooling strategy);

struct SentenceEmbedding {
  std::vector<double> values;
  std::string language;

  // Throws DegenerateInputError on non-finite entries or zero norm.
  void validate() const;
};

extern template class EncoderModel<float>;
extern template class EncoderModel<double>;

}  // namespace ssb
