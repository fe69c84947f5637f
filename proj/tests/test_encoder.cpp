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

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "ssb/encoder.hpp"
#include "ssb/error.hpp"
#include "ssb/ops.hpp"

using namespace ssb;

namespace {

using Mat = std::vector<std::vector<double>>;

// Scalar-loop forward pass of the same architecture, read from named parameters.
struct Reference {
  const EncoderModel<double>& model;

  std::span<const double> p(const std::string& name) const { return model.parameter(name).value.data(); }

  Mat linear(const Mat& x, const std::string& prefix, std::size_t out, bool bias = true) const {
    const auto w = p(prefix + ".weight");
    const std::size_t in = x.front().size();
    Mat y(x.size(), std::vector<double>(out, 0.0));
    for (std::size_t r = 0; r < x.size(); ++r) {
      for (std::size_t j = 0; j < out; ++j) {
        double acc = bias ? p(prefix + ".bias")[j] : 0.0;
        for (std::size_t i = 0; i < in; ++i) acc += x[r][i] * w[i * out + j];
        y[r][j] = acc;
      }
    }
    return y;
  }

  Mat norm(const Mat& x, const std::string& prefix) const {
    const auto g = p(prefix + ".gamma"), b = p(prefix + ".beta");
    Mat y = x;
    for (auto& row : y) {
      double m = 0.0, v = 0.0;
      for (double e : row) m += e / static_cast<double>(row.size());
      for (double e : row) v += (e - m) * (e - m) / static_cast<double>(row.size());
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] = (row[j] - m) / std::sqrt(v + model.config().layer_norm_eps) * g[j] + b[j];
      }
    }
    return y;
  }

  static Mat add(Mat a, const Mat& b) {
    for (std::size_t r = 0; r < a.size(); ++r) {
      for (std::size_t j = 0; j < a[r].size(); ++j) a[r][j] += b[r][j];
    }
    return a;
  }

  static Mat gelu(Mat a) {
    for (auto& row : a) {
      for (double& e : row) e = 0.5 * e * (1.0 + std::erf(e / std::sqrt(2.0)));
    }
    return a;
  }

  // One sequence; returns [L][d].
  Mat encode(const std::vector<TokenId>& ids, const std::vector<std::uint8_t>& mask, const std::string& lang,
             bool adapters = true) const {
    const auto& c = model.config();
    const std::size_t d = c.hidden, L = ids.size(), dh = d / c.heads;
    const auto tok = p("embeddings.token"), pos = p("embeddings.position");
    Mat h(L, std::vector<double>(d));
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t j = 0; j < d; ++j) h[t][j] = tok[static_cast<std::size_t>(ids[t]) * d + j] + pos[t * d + j];
    }
    h = norm(h, "embeddings.norm");
    for (std::size_t layer = 0; layer < c.layers; ++layer) {
      const std::string pre = "layers." + std::to_string(layer);
      const Mat q = linear(h, pre + ".attention.query", d);
      const Mat k = linear(h, pre + ".attention.key", d, false);
      const Mat v = linear(h, pre + ".attention.value", d);
      Mat ctx(L, std::vector<double>(d, 0.0));
      for (std::size_t head = 0; head < c.heads; ++head) {
        for (std::size_t i = 0; i < L; ++i) {
          std::vector<double> s(L, -std::numeric_limits<double>::infinity());
          double mx = -std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < L; ++j) {
            if (!mask[j]) continue;
            double acc = 0.0;
            for (std::size_t e = 0; e < dh; ++e) acc += q[i][head * dh + e] * k[j][head * dh + e];
            s[j] = acc / std::sqrt(static_cast<double>(dh));
            mx = std::max(mx, s[j]);
          }
          double z = 0.0;
          for (std::size_t j = 0; j < L; ++j) z += mask[j] ? std::exp(s[j] - mx) : 0.0;
          for (std::size_t j = 0; j < L; ++j) {
            if (!mask[j]) continue;
            const double a = std::exp(s[j] - mx) / z;
            for (std::size_t e = 0; e < dh; ++e) ctx[i][head * dh + e] += a * v[j][head * dh + e];
          }
        }
      }
      h = norm(add(h, linear(ctx, pre + ".attention.output", d)), pre + ".attention_norm");
      const Mat ff = linear(gelu(linear(h, pre + ".ffn.in", c.ffn)), pre + ".ffn.out", d);
      h = norm(add(h, ff), pre + ".ffn_norm");
      if (adapters) {
        const std::string ap = pre + ".adapters." + lang;
        const Mat up = linear(gelu(linear(h, ap + ".down", c.adapter)), ap + ".up", d);
        h = norm(add(h, up), ap + ".norm");
      }
    }
    return h;
  }
};

EncoderModel<double> perturbed_model(const EncoderConfig& cfg, std::uint64_t seed, double spread) {
  auto model = EncoderModel<double>::init(cfg, seed);
  Rng rng(seed + 100);
  for (auto& p : model.parameters()) {
    for (double& v : p.value.mutable_data()) v += spread * rng.normal();
  }
  return model;
}

EncoderConfig small_config() {
  EncoderConfig c;
  c.vocab_size = 30;
  c.hidden = 12;
  c.layers = 2;
  c.heads = 3;
  c.ffn = 20;
  c.adapter = 5;
  c.languages = {"de", "fr", "it"};
  c.max_positions = 10;
  c.dropout = 0.0;
  return c;
}

}  // namespace

TEST_CASE("parameter count closed form") {
  EncoderConfig c;
  c.vocab_size = 100;
  c.hidden = 16;
  c.layers = 2;
  c.heads = 2;
  c.ffn = 32;
  c.adapter = 8;
  c.languages = {"de", "fr"};
  c.max_positions = 64;
  CHECK(parameter_count(c) == 8320);
  const auto model = EncoderModel<float>::init(c, 0);
  CHECK(model.parameter_count() == 8320);
  std::size_t counted = 0;
  for (const auto& p : model.parameters()) counted += p.value.numel();
  CHECK(counted == 8320);
}

TEST_CASE("config validation lists every problem") {
  EncoderConfig c;
  c.vocab_size = 10;
  c.hidden = 10;
  c.heads = 3;
  c.adapter = 10;
  c.languages = {"de", "de"};
  const auto problems = c.problems();
  CHECK(problems.size() == 3);
  CHECK_THROWS_AS(EncoderModel<float>::init(c, 0), ConfigError);
}

TEST_CASE("initialization is deterministic") {
  const auto cfg = small_config();
  const auto a = EncoderModel<float>::init(cfg, 5);
  const auto b = EncoderModel<float>::init(cfg, 5);
  const auto c = EncoderModel<float>::init(cfg, 6);
  bool differs = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto x = a.parameters()[i].value.data(), y = b.parameters()[i].value.data(),
               z = c.parameters()[i].value.data();
    CHECK(std::equal(x.begin(), x.end(), y.begin()));
    differs |= !std::equal(x.begin(), x.end(), z.begin());
  }
  CHECK(differs);
  for (const auto& p : a.parameters()) {
    if (p.name.find(".up.") != std::string::npos) {
      for (float v : p.value.data()) CHECK(v == 0.0f);
    }
  }
}

TEST_CASE("encode matches the scalar reference") {
  const auto cfg = small_config();
  const auto model = perturbed_model(cfg, 1, 0.3);
  const Reference ref{model};
  Rng rng(4);
  const TokenBatch batch = testing::random_batch(rng, 3, 9, cfg.vocab_size);
  for (const std::string lang : {"de", "it"}) {
    Tape<double> tape(false);
    const Tensor<double> h = model.encode(tape, batch, lang);
    REQUIRE(h.shape() == Shape{3, 9, 12});
    for (std::size_t s = 0; s < 3; ++s) {
      const std::vector<TokenId> ids(batch.ids.begin() + s * 9, batch.ids.begin() + (s + 1) * 9);
      const std::vector<std::uint8_t> mask(batch.mask.begin() + s * 9, batch.mask.begin() + (s + 1) * 9);
      const Mat expected = ref.encode(ids, mask, lang);
      for (std::size_t t = 0; t < 9; ++t) {
        if (!mask[t]) continue;
        for (std::size_t j = 0; j < 12; ++j) {
          CHECK(h.value((s * 9 + t) * 12 + j) == doctest::Approx(expected[t][j]).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("with a zero up-projection the adapter is its layer norm alone") {
  const auto cfg = small_config();
  auto model = EncoderModel<double>::init(cfg, 2);
  Rng rng(9);
  for (auto& p : model.parameters()) {
    if (p.name.find(".up.") != std::string::npos) continue;
    for (double& v : p.value.mutable_data()) v += 0.3 * rng.normal();
  }
  const TokenBatch batch = testing::random_batch(rng, 1, 7, cfg.vocab_size);
  Tape<double> tape(false);
  const Tensor<double> before = model.encode(tape, batch, "fr");
  for (auto& p : model.parameters()) {
    if (p.name.find(".down.") == std::string::npos) continue;
    for (double& v : p.value.mutable_data()) v += rng.normal();
  }
  const Tensor<double> after = model.encode(tape, batch, "fr");
  for (std::size_t i = 0; i < before.numel(); ++i) {
    if (batch.mask[i / 12]) CHECK(before.value(i) == after.value(i));
  }
  const Reference ref{model};
  const Mat expected = ref.encode(batch.ids, batch.mask, "fr");
  for (std::size_t t = 0; t < 7; ++t) {
    if (!batch.mask[t]) continue;
    for (std::size_t j = 0; j < 12; ++j) CHECK(after.value(t * 12 + j) == doctest::Approx(expected[t][j]).epsilon(1e-9));
  }
}

TEST_CASE("fresh model: every language gives the same output") {
  const auto cfg = small_config();
  const auto model = EncoderModel<float>::init(cfg, 3);
  Rng rng(1);
  const TokenBatch batch = testing::random_batch(rng, 2, 8, cfg.vocab_size);
  Tape<float> tape(false);
  const auto de = model.embed(tape, batch, "de");
  const auto fr = model.embed(tape, batch, "fr");
  CHECK(std::equal(de.data().begin(), de.data().end(), fr.data().begin()));
}

TEST_CASE("routing isolation") {
  const auto cfg = small_config();
  auto model = perturbed_model(cfg, 3, 0.1);
  Rng rng(2);
  const TokenBatch batch = testing::random_batch(rng, 2, 8, cfg.vocab_size);
  Tape<double> tape(false);
  const auto before = model.embed(tape, batch, "de");
  for (auto& p : model.parameters()) {
    if (p.adapter && cfg.languages[p.language] == "fr") {
      for (double& v : p.value.mutable_data()) v += rng.normal();
    }
  }
  const auto after = model.embed(tape, batch, "de");
  CHECK(std::equal(before.data().begin(), before.data().end(), after.data().begin()));
  const auto fr = model.embed(tape, batch, "fr");
  CHECK_FALSE(std::equal(before.data().begin(), before.data().end(), fr.data().begin()));
  CHECK_THROWS_AS(model.embed(tape, batch, "rm"), RoutingError);
}

TEST_CASE("other-language adapters get zero gradient") {
  auto model = perturbed_model(small_config(), 4, 0.1);
  Rng rng(3);
  const TokenBatch a = testing::random_batch(rng, 3, 8, 30), b = testing::random_batch(rng, 3, 8, 30);
  Tape<double> tape;
  tape.backward(testing::pipeline_loss(tape, model, a, b, "it", 0.05));
  for (const auto& p : model.parameters()) {
    if (!p.adapter) continue;
    const bool own = model.config().languages[p.language] == "it";
    double norm = 0.0;
    if (p.value.has_grad()) {
      for (double g : p.value.grad()) norm += g * g;
    }
    CAPTURE(p.name);
    if (own) CHECK(norm > 0.0);
    else CHECK(norm == 0.0);
  }
}

TEST_CASE("padding never changes pooled output") {
  const auto cfg = small_config();
  const auto model = perturbed_model(cfg, 5, 0.2);
  for (Pooling pooling : {Pooling::mean, Pooling::max, Pooling::cls}) {
    auto c = cfg;
    c.pooling = pooling;
    auto m = EncoderModel<double>::init(c, 5);
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
      const auto src = model.parameters()[i].value.data();
      std::copy(src.begin(), src.end(), m.parameters()[i].value.mutable_data().begin());
    }
    const std::vector<TokenId> ids{kClsId, 7, 9, 11, kSepId};
    const std::vector<TokenSequence> short_seq{pad_truncate(ids, 5)};
    const std::vector<TokenSequence> long_seq{pad_truncate(ids, 10)};
    Tape<double> tape(false);
    const auto a = m.embed(tape, make_batch(short_seq), "de");
    const auto b = m.embed(tape, make_batch(long_seq), "de");
    for (std::size_t j = 0; j < 12; ++j) CHECK(a.value(j) == doctest::Approx(b.value(j)).epsilon(1e-12));
  }
}

TEST_CASE("pooling by hand") {
  Tape<double> tape(false);
  const Tensor<double> h = Tensor<double>::from_data({1, 3, 2}, {1.0, 0.0, 0.0, 1.0, 9.0, 9.0});
  const std::vector<std::uint8_t> mask{1, 1, 0};
  const auto mean = pool(tape, h, mask, Pooling::mean);
  const auto max = pool(tape, h, mask, Pooling::max);
  const auto cls = pool(tape, h, mask, Pooling::cls);
  CHECK(mean.value(0) == 0.5);
  CHECK(mean.value(1) == 0.5);
  CHECK(max.value(0) == 1.0);
  CHECK(max.value(1) == 1.0);
  CHECK(cls.value(0) == 1.0);
  CHECK(cls.value(1) == 0.0);
  const std::vector<std::uint8_t> one{1, 0, 0};
  const auto single = pool(tape, h, one, Pooling::mean);
  CHECK(single.value(0) == cls.value(0));
  CHECK(single.value(1) == cls.value(1));
  const std::vector<std::uint8_t> none{0, 0, 0};
  CHECK_THROWS_AS(pool(tape, h, none, Pooling::mean), DegenerateInputError);
  CHECK_THROWS_AS(pool(tape, h, none, Pooling::cls), DegenerateInputError);
}

TEST_CASE("single-token sequence keeps its shape") {
  const auto cfg = small_config();
  const auto model = EncoderModel<float>::init(cfg, 1);
  const std::vector<TokenId> ids{kClsId};
  const std::vector<TokenSequence> seq{pad_truncate(ids, 6)};
  Tape<float> tape(false);
  const auto h = model.encode(tape, make_batch(seq), "de");
  CHECK(h.shape() == Shape{1, 6, 12});
  const std::vector<TokenSequence> too_long{pad_truncate(ids, 11)};
  CHECK_THROWS_AS(model.encode(tape, make_batch(too_long), "de"), DimensionError);
}

TEST_CASE("dropout requires a generator in training mode and is deterministic when off") {
  auto cfg = small_config();
  cfg.dropout = 0.1;
  const auto model = EncoderModel<float>::init(cfg, 1);
  Rng rng(3);
  const TokenBatch batch = testing::random_batch(rng, 2, 8, cfg.vocab_size);
  Tape<float> tape(false);
  CHECK_THROWS_AS(model.encode(tape, batch, "de", {true, nullptr}), ContractError);
  const auto a = model.embed(tape, batch, "de");
  const auto b = model.embed(tape, batch, "de");
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  Rng r1(8), r2(8);
  const auto c = model.embed(tape, batch, "de", {true, &r1});
  const auto d = model.embed(tape, batch, "de", {true, &r2});
  CHECK(std::equal(c.data().begin(), c.data().end(), d.data().begin()));
  CHECK_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

TEST_CASE("clone is deep") {
  const auto cfg = small_config();
  auto a = EncoderModel<float>::init(cfg, 1);
  auto b = a.clone();
  b.parameters()[0].value.mutable_data()[0] += 1.0f;
  CHECK(a.parameters()[0].value.value(0) != b.parameters()[0].value.value(0));
}
