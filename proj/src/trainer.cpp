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

#include "ssb/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "ssb/error.hpp"
#include "ssb/ops.hpp"

namespace ssb {

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.temperature = 0.05;
  c.learning_rate = 1e-5;
  c.batch_size = 512;
  c.epochs = 1;
  c.freeze_adapters = true;
  return c;
}

std::vector<std::string> TrainConfig::problems() const {
  std::vector<std::string> out;
  if (!(temperature > 0.0)) out.push_back("temperature must be positive");
  if (!(learning_rate > 0.0)) out.push_back("learning_rate must be positive");
  if (batch_size < 2) out.push_back("batch_size must be at least 2 (one in-batch negative)");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) out.push_back("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) out.push_back("beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) out.push_back("adam eps must be positive");
  if (!(weight_decay >= 0.0)) out.push_back("weight_decay must be nonnegative");
  return out;
}

void TrainConfig::validate() const {
  const auto issues = problems();
  if (issues.empty()) return;
  std::string message = "invalid training config:";
  for (const auto& p : issues) message += "\n  - " + p;
  throw ConfigError(message);
}

template <typename T>
Tensor<T> contrastive_loss(Tape<T>& tape, const Tensor<T>& anchors, const Tensor<T>& positives,
                           double temperature) {
  if (!(temperature > 0.0)) throw ContractError("temperature must be positive");
  if (anchors.rank() != 2 || anchors.shape() != positives.shape()) {
    throw DimensionError("contrastive_loss needs matching [N x d] batches, got " +
                         shape_string(anchors.shape()) + " and " +
                         shape_string(positives.shape()));
  }
  const std::size_t n = anchors.dim(0);
  Tensor<T> logits = ops::scale(tape, ops::cosine_matrix(tape, anchors, positives), 1.0 / temperature);
  std::vector<std::size_t> diagonal(n);
  for (std::size_t i = 0; i < n; ++i) diagonal[i] = i;
  return ops::softmax_cross_entropy(tape, logits, diagonal);
}

double contrastive_loss(const EmbeddingBatch& batch, double temperature) {
  Tape<double> tape(false);
  return contrastive_loss(tape, batch.anchors, batch.positives, temperature).item();
}

template <typename T>
OptState<T> OptState<T>::create(const std::vector<Parameter<T>>& params, bool freeze_adapters) {
  OptState s;
  s.first_moment.resize(params.size());
  s.second_moment.resize(params.size());
  s.frozen.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.frozen[i] = freeze_adapters && params[i].adapter;
    if (!s.frozen[i]) {
      s.first_moment[i].assign(params[i].value.numel(), T(0));
      s.second_moment[i].assign(params[i].value.numel(), T(0));
    }
  }
  return s;
}

template <typename T>
void adamw_step(std::vector<Parameter<T>>& params, OptState<T>& state, const TrainConfig& cfg,
                const std::vector<bool>& active) {
  if (state.frozen.size() != params.size() || (!active.empty() && active.size() != params.size())) {
    throw ContractError("optimizer state does not match the parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.frozen[i] || (!active.empty() && !active[i])) continue;
    if (!params[i].value.has_grad()) {
      throw ContractError("parameter '" + params[i].name + "' has no gradient");
    }
    if (state.first_moment[i].size() != params[i].value.numel()) {
      throw ContractError("moment buffers of '" + params[i].name + "' do not match its shape");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.frozen[i] || (!active.empty() && !active[i])) continue;
    auto theta = params[i].value.mutable_data();
    auto grad = params[i].value.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const T g = grad[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      const double m_hat = static_cast<double>(m[j]) / correction1;
      const double v_hat = static_cast<double>(v[j]) / correction2;
      const double old = static_cast<double>(theta[j]);
      theta[j] = static_cast<T>(old - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps) -
                                cfg.learning_rate * cfg.weight_decay * old);
    }
  }
}

template <typename T>
void configure_trainable(EncoderModel<T>& model, bool freeze_adapters) {
  for (Parameter<T>& p : model.parameters()) {
    p.value.set_requires_grad(!(freeze_adapters && p.adapter));
  }
}

template <typename T>
double train_step(EncoderModel<T>& model, const TokenBatch& anchors, const TokenBatch& positives,
                  std::string_view language, const TrainConfig& cfg, OptState<T>& state, Rng& rng) {
  if (anchors.batch != positives.batch) {
    throw ContractError("anchor and positive batches differ in size");
  }
  const auto lang = model.config().language_index(language);
  if (!lang) throw RoutingError("no adapter for language '" + std::string(language) + "'");
  auto& params = model.parameters();
  std::vector<bool> active(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].value.clear_grad();
    active[i] = !params[i].adapter || params[i].language == *lang;
  }
  Tape<T> tape;
  const ForwardOptions forward{true, &rng};
  Tensor<T> a = model.embed(tape, anchors, language, forward);
  Tensor<T> p = model.embed(tape, positives, language, forward);
  Tensor<T> loss = contrastive_loss(tape, a, p, cfg.temperature);
  const double value = static_cast<double>(loss.item());
  tape.backward(loss);
  adamw_step(params, state, cfg, active);
  return value;
}

PairBatch collate(std::span<const TokenizedPair> pairs) {
  if (pairs.empty()) throw DegenerateInputError("empty pair batch");
  PairBatch out;
  out.language = pairs.front().language;
  std::vector<TokenSequence> anchors, positives;
  for (const TokenizedPair& p : pairs) {
    if (p.language != out.language) {
      throw ContractError("mixed-language batch (" + out.language + " and " + p.language +
                          "); batches must be language-homogeneous");
    }
    anchors.push_back(p.anchor);
    positives.push_back(p.positive);
  }
  out.anchors = trim_padding(make_batch(anchors));
  out.positives = trim_padding(make_batch(positives));
  return out;
}

template <typename T>
TrainResult train(EncoderModel<T>& model, std::span<const TokenizedPair> corpus,
                  const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (corpus.empty()) throw DegenerateInputError("training corpus is empty");
  std::map<std::size_t, std::vector<std::size_t>> by_language;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto lang = model.config().language_index(corpus[i].language);
    if (!lang) {
      throw RoutingError("training pair in language '" + corpus[i].language +
                         "' has no adapter in the model");
    }
    by_language[*lang].push_back(i);
  }

  TrainResult result;
  if (cfg.epochs == 0) return result;

  configure_trainable(model, cfg.freeze_adapters);
  OptState<T> state = OptState<T>::create(model.parameters(), cfg.freeze_adapters);
  Rng rng(cfg.seed);
  Rng dropout_rng = rng.fork();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::vector<std::size_t>> batches;
    for (auto& [lang, indices] : by_language) {
      std::vector<std::size_t> order = indices;
      rng.shuffle(order);
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        if (end - start < 2) continue;
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
      }
    }
    rng.shuffle(batches);
    for (const auto& indices : batches) {
      if (cfg.max_steps != 0 && result.steps >= cfg.max_steps) return result;
      std::vector<TokenizedPair> slice;
      slice.reserve(indices.size());
      for (std::size_t i : indices) slice.push_back(corpus[i]);
      const PairBatch batch = collate(slice);
      const double loss = train_step(model, batch.anchors, batch.positives, batch.language, cfg,
                                     state, dropout_rng);
      LossRecord record{result.steps, batch.language, loss};
      result.history.push_back(record);
      ++result.steps;
      if (on_step) on_step(record);
    }
  }
  return result;
}

void write_loss_history(const std::vector<LossRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write loss history " + path.string());
  out << "step,language,loss\n";
  char buf[64];
  for (const LossRecord& r : history) {
    std::snprintf(buf, sizeof buf, "%.9g", r.loss);
    out << r.step << ',' << r.language << ',' << buf << '\n';
  }
  if (!out) throw IoError("failed writing loss history " + path.string());
}

#define SSB_INSTANTIATE_TRAINER(T)                                                              \
  template Tensor<T> contrastive_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&, double);    \
  template struct OptState<T>;                                                                  \
  template void adamw_step(std::vector<Parameter<T>>&, OptState<T>&, const TrainConfig&,        \
                           const std::vector<bool>&);                                           \
  template void configure_trainable(EncoderModel<T>&, bool);                                    \
  template double train_step(EncoderModel<T>&, const TokenBatch&, const TokenBatch&,            \
                             std::string_view, const TrainConfig&, OptState<T>&, Rng&);         \
  template TrainResult train(EncoderModel<T>&, std::span<const TokenizedPair>,                  \
                             const TrainConfig&, const StepCallback&);

SSB_INSTANTIATE_TRAINER(float)
SSB_INSTANTIATE_TRAINER(double)

#undef SSB_INSTANTIATE_TRAINER

}  // namespace ssb
