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

#include "ssb/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ssb/error.hpp"
#include "ssb/ops.hpp"

namespace ssb {

std::string_view pooling_name(Pooling p) {
  switch (p) {
    case Pooling::mean: return "mean";
    case Pooling::cls: return "cls";
    case Pooling::max: return "max";
  }
  return "mean";
}

Pooling parse_pooling(std::string_view name) {
  if (name == "mean" || name == "MEAN") return Pooling::mean;
  if (name == "cls" || name == "CLS") return Pooling::cls;
  if (name == "max" || name == "MAX") return Pooling::max;
  throw ConfigError("unknown pooling strategy '" + std::string(name) + "' (mean, cls, max)");
}

std::vector<std::string> EncoderConfig::problems() const {
  std::vector<std::string> out;
  if (vocab_size <= kReservedTokens) out.push_back("vocab_size must exceed the 4 reserved ids");
  if (hidden == 0) out.push_back("hidden must be positive");
  if (heads == 0) out.push_back("heads must be positive");
  if (heads != 0 && hidden % heads != 0) out.push_back("hidden must be divisible by heads");
  if (layers == 0) out.push_back("layers must be positive");
  if (ffn == 0) out.push_back("ffn must be positive");
  if (adapter == 0 || adapter >= hidden) out.push_back("adapter size must lie in (0, hidden)");
  if (languages.empty()) out.push_back("languages must be nonempty");
  std::set<std::string> unique(languages.begin(), languages.end());
  if (unique.size() != languages.size()) out.push_back("languages must be unique");
  for (const std::string& l : languages) {
    if (l.empty()) out.push_back("language codes must be nonempty");
  }
  if (max_positions < 2) out.push_back("max_positions must be at least 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) out.push_back("dropout must lie in [0, 1)");
  if (!(layer_norm_eps > 0.0)) out.push_back("layer_norm_eps must be positive");
  return out;
}

void EncoderConfig::validate() const {
  const auto issues = problems();
  if (issues.empty()) return;
  std::string message = "invalid encoder config:";
  for (const auto& p : issues) message += "\n  - " + p;
  throw ConfigError(message);
}

std::optional<std::size_t> EncoderConfig::language_index(std::string_view code) const {
  for (std::size_t i = 0; i < languages.size(); ++i) {
    if (languages[i] == code) return i;
  }
  return std::nullopt;
}

std::size_t parameter_count(const EncoderConfig& c) {
  const std::size_t d = c.hidden;
  const std::size_t embeddings = c.vocab_size * d + c.max_positions * d + 2 * d;
  // query/value/output carry a bias, key does not
  const std::size_t attention = 4 * d * d + 3 * d;
  const std::size_t ffn = d * c.ffn + c.ffn + c.ffn * d + d;
  const std::size_t adapter = d * c.adapter + c.adapter + c.adapter * d + d + 2 * d;
  const std::size_t layer = attention + 2 * d + ffn + 2 * d + c.languages.size() * adapter;
  return embeddings + c.layers * layer;
}

void SentenceEmbedding::validate() const {
  double sq = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw DegenerateInputError("sentence embedding has non-finite entries");
    sq += v * v;
  }
  if (!(sq > 0.0)) throw DegenerateInputError("sentence embedding has zero norm");
}

template <typename T>
EncoderModel<T> EncoderModel<T>::init(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  EncoderModel m;
  m.config_ = config;
  const std::size_t d = config.hidden;
  auto zeros = [](Shape s) { return Tensor<T>::zeros(std::move(s), true); };
  auto ones = [](Shape s) { return Tensor<T>::full(std::move(s), T(1), true); };
  auto norm = [&]() { return Norm{ones({d}), zeros({d})}; };

  m.token_embedding_ = zeros({config.vocab_size, d});
  m.position_embedding_ = zeros({config.max_positions, d});
  m.embedding_norm_ = norm();
  m.layers_.resize(config.layers);
  for (Layer& layer : m.layers_) {
    layer.query = {zeros({d, d}), zeros({d})};
    layer.key = {zeros({d, d}), Tensor<T>()};
    layer.value = {zeros({d, d}), zeros({d})};
    layer.output = {zeros({d, d}), zeros({d})};
    layer.attention_norm = norm();
    layer.ffn_in = {zeros({d, config.ffn}), zeros({config.ffn})};
    layer.ffn_out = {zeros({config.ffn, d}), zeros({d})};
    layer.ffn_norm = norm();
    layer.adapters.resize(config.languages.size());
    for (Adapter& a : layer.adapters) {
      a.down = {zeros({d, config.adapter}), zeros({config.adapter})};
      a.up = {zeros({config.adapter, d}), zeros({d})};
      a.norm = norm();
    }
  }
  m.build_registry();

  // Weight matrices and embeddings ~ N(0, 0.02^2); biases and adapter
  // up-projections stay zero, so a fresh adapter is an identity residual.
  Rng rng(seed);
  for (Parameter<T>& p : m.params_) {
    const std::string& n = p.name;
    const bool is_matrix = p.value.rank() == 2;
    const bool is_up = n.find(".up.") != std::string::npos;
    if (!is_matrix || is_up) continue;
    for (T& v : p.value.mutable_data()) v = static_cast<T>(0.02 * rng.normal());
  }
  return m;
}

template <typename T>
void EncoderModel<T>::build_registry() {
  params_.clear();
  auto add = [&](std::string name, const Tensor<T>& t, bool adapter = false,
                 std::size_t language = 0) {
    if (t.defined()) params_.push_back({std::move(name), t, adapter, language});
  };
  auto add_linear = [&](const std::string& prefix, const Linear& l, bool adapter = false,
                        std::size_t language = 0) {
    add(prefix + ".weight", l.weight, adapter, language);
    add(prefix + ".bias", l.bias, adapter, language);
  };
  auto add_norm = [&](const std::string& prefix, const Norm& n, bool adapter = false,
                      std::size_t language = 0) {
    add(prefix + ".gamma", n.gamma, adapter, language);
    add(prefix + ".beta", n.beta, adapter, language);
  };
  add("embeddings.token", token_embedding_);
  add("embeddings.position", position_embedding_);
  add_norm("embeddings.norm", embedding_norm_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const std::string p = "layers." + std::to_string(i);
    add_linear(p + ".attention.query", l.query);
    add_linear(p + ".attention.key", l.key);
    add_linear(p + ".attention.value", l.value);
    add_linear(p + ".attention.output", l.output);
    add_norm(p + ".attention_norm", l.attention_norm);
    add_linear(p + ".ffn.in", l.ffn_in);
    add_linear(p + ".ffn.out", l.ffn_out);
    add_norm(p + ".ffn_norm", l.ffn_norm);
    for (std::size_t k = 0; k < l.adapters.size(); ++k) {
      const Adapter& a = l.adapters[k];
      const std::string ap = p + ".adapters." + config_.languages[k];
      add_linear(ap + ".down", a.down, true, k);
      add_linear(ap + ".up", a.up, true, k);
      add_norm(ap + ".norm", a.norm, true, k);
    }
  }
}

template <typename T>
EncoderModel<T> EncoderModel<T>::clone() const {
  EncoderModel m;
  m.config_ = config_;
  auto copy_linear = [](const Linear& l) {
    return Linear{l.weight.clone(), l.bias.defined() ? l.bias.clone() : Tensor<T>()};
  };
  auto copy_norm = [](const Norm& n) { return Norm{n.gamma.clone(), n.beta.clone()}; };
  m.token_embedding_ = token_embedding_.clone();
  m.position_embedding_ = position_embedding_.clone();
  m.embedding_norm_ = copy_norm(embedding_norm_);
  for (const Layer& l : layers_) {
    Layer c;
    c.query = copy_linear(l.query);
    c.key = copy_linear(l.key);
    c.value = copy_linear(l.value);
    c.output = copy_linear(l.output);
    c.attention_norm = copy_norm(l.attention_norm);
    c.ffn_in = copy_linear(l.ffn_in);
    c.ffn_out = copy_linear(l.ffn_out);
    c.ffn_norm = copy_norm(l.ffn_norm);
    for (const Adapter& a : l.adapters) {
      c.adapters.push_back({copy_linear(a.down), copy_linear(a.up), copy_norm(a.norm)});
    }
    m.layers_.push_back(std::move(c));
  }
  m.build_registry();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m.params_[i].value.set_requires_grad(params_[i].value.requires_grad());
  }
  return m;
}

template <typename T>
const Parameter<T>& EncoderModel<T>::parameter(std::string_view name) const {
  for (const Parameter<T>& p : params_) {
    if (p.name == name) return p;
  }
  throw IndexError("no parameter named '" + std::string(name) + "'");
}

template <typename T>
std::size_t EncoderModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter<T>& p : params_) n += p.value.numel();
  return n;
}

template <typename T>
Tensor<T> EncoderModel<T>::linear(Tape<T>& tape, const Tensor<T>& x, const Linear& l) const {
  Tensor<T> y = ops::matmul(tape, x, l.weight);
  return l.bias.defined() ? ops::add_bias(tape, y, l.bias) : y;
}

template <typename T>
Tensor<T> EncoderModel<T>::norm(Tape<T>& tape, const Tensor<T>& x, const Norm& n) const {
  return ops::layer_norm(tape, x, n.gamma, n.beta, config_.layer_norm_eps);
}

template <typename T>
Tensor<T> EncoderModel<T>::encode(Tape<T>& tape, const TokenBatch& batch,
                                  std::string_view language,
                                  const ForwardOptions& options) const {
  const auto lang = config_.language_index(language);
  if (!lang) {
    std::string known;
    for (const auto& l : config_.languages) known += (known.empty() ? "" : ",") + l;
    throw RoutingError("no adapter for language '" + std::string(language) + "' (model has " +
                       known + ")");
  }
  const std::size_t n = batch.batch, len = batch.length, d = config_.hidden;
  const std::size_t heads = config_.heads, head_dim = d / heads;
  if (n == 0 || len == 0) throw DegenerateInputError("encode on an empty batch");
  if (batch.ids.size() != n * len || batch.mask.size() != n * len) {
    throw DimensionError("token batch buffers do not match " + std::to_string(n) + "x" +
                         std::to_string(len));
  }
  if (len > config_.max_positions) {
    throw DimensionError("sequence length " + std::to_string(len) + " exceeds max_positions " +
                         std::to_string(config_.max_positions));
  }
  const bool dropping = options.training && config_.dropout > 0.0;
  if (dropping && options.rng == nullptr) {
    throw ContractError("training-mode encode needs a random generator for dropout");
  }
  Rng unused(0);
  Rng& rng = options.rng ? *options.rng : unused;
  auto drop = [&](const Tensor<T>& x) {
    return ops::dropout(tape, x, config_.dropout, options.training, rng);
  };

  std::vector<TokenId> positions(n * len);
  for (std::size_t i = 0; i < n * len; ++i) positions[i] = static_cast<TokenId>(i % len);
  Tensor<T> h = ops::add(tape, ops::embedding(tape, token_embedding_, batch.ids),
                         ops::embedding(tape, position_embedding_, positions));
  h = drop(norm(tape, h, embedding_norm_));

  const double score_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  auto split_heads = [&](const Tensor<T>& x) {
    Tensor<T> r = ops::reshape(tape, x, {n, len, heads, head_dim});
    return ops::reshape(tape, ops::permute(tape, r, {0, 2, 1, 3}), {n * heads, len, head_dim});
  };

  for (const Layer& layer : layers_) {
    Tensor<T> q = split_heads(linear(tape, h, layer.query));
    Tensor<T> k = split_heads(linear(tape, h, layer.key));
    Tensor<T> v = split_heads(linear(tape, h, layer.value));
    Tensor<T> scores = ops::scale(tape, ops::bmm(tape, q, ops::transpose(tape, k)), score_scale);
    scores = ops::mask_keys(tape, scores, batch.mask, n, heads);
    Tensor<T> probs = drop(ops::softmax(tape, scores, 2));
    Tensor<T> context = ops::bmm(tape, probs, v);
    context = ops::reshape(tape, context, {n, heads, len, head_dim});
    context = ops::reshape(tape, ops::permute(tape, context, {0, 2, 1, 3}), {n * len, d});
    Tensor<T> attended = drop(linear(tape, context, layer.output));
    h = norm(tape, ops::add(tape, h, attended), layer.attention_norm);

    Tensor<T> inner = ops::gelu(tape, linear(tape, h, layer.ffn_in));
    Tensor<T> ff = drop(linear(tape, inner, layer.ffn_out));
    h = norm(tape, ops::add(tape, h, ff), layer.ffn_norm);

    const Adapter& adapter = layer.adapters[*lang];
    Tensor<T> bottleneck = ops::gelu(tape, linear(tape, h, adapter.down));
    Tensor<T> adapted = linear(tape, bottleneck, adapter.up);
    h = norm(tape, ops::add(tape, h, adapted), adapter.norm);
  }
  return ops::reshape(tape, h, {n, len, d});
}

template <typename T>
Tensor<T> EncoderModel<T>::embed(Tape<T>& tape, const TokenBatch& batch,
                                 std::string_view language,
                                 const ForwardOptions& options) const {
  Tensor<T> hidden = encode(tape, batch, language, options);
  return pool(tape, hidden, batch.mask, config_.pooling);
}

template <typename T>
Tensor<T> pool(Tape<T>& tape, const Tensor<T>& hidden, std::span<const std::uint8_t> mask,
               Pooling strategy) {
  switch (strategy) {
    case Pooling::mean: return ops::masked_mean(tape, hidden, mask);
    case Pooling::max: return ops::masked_max(tape, hidden, mask);
    case Pooling::cls: {
      if (hidden.rank() != 3 || mask.size() != hidden.dim(0) * hidden.dim(1)) {
        throw DimensionError("cls pooling: hidden " + shape_string(hidden.shape()) +
                             " vs mask of " + std::to_string(mask.size()) + " entries");
      }
      for (std::size_t i = 0; i < hidden.dim(0); ++i) {
        if (!mask[i * hidden.dim(1)]) {
          throw DegenerateInputError("cls pooling: position 0 of row " + std::to_string(i) +
                                     " is masked");
        }
      }
      return ops::select_position(tape, hidden, 0);
    }
  }
  throw ConfigError("unknown pooling strategy");
}

template class EncoderModel<float>;
template class EncoderModel<double>;
template Tensor<float> pool(Tape<float>&, const Tensor<float>&, std::span<const std::uint8_t>,
                            Pooling);
template Tensor<double> pool(Tape<double>&, const Tensor<double>&, std::span<const std::uint8_t>,
                             Pooling);

}  // namespace ssb
