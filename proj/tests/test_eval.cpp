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
#include <map>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "ssb/error.hpp"
#include "ssb/eval.hpp"
#include "ssb/rng.hpp"

using namespace ssb;
using testing::Rows;

namespace {

Rows random_rows(Rng& rng, std::size_t n, std::size_t d) {
  Rows r(n, std::vector<double>(d));
  for (auto& row : r) {
    for (double& v : row) v = rng.normal();
  }
  return r;
}

std::vector<std::string> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(rng.below(classes)));
  return out;
}

std::vector<std::string> label_set(const std::vector<std::string>& a, const std::vector<std::string>& b = {}) {
  std::set<std::string> s(a.begin(), a.end());
  s.insert(b.begin(), b.end());
  return {s.begin(), s.end()};
}

// One-hot per id, identical across languages.
Embedder one_hot_embedder(const std::vector<std::string>& ids) {
  return [ids](const std::vector<DocumentText>& docs) {
    EmbeddingMatrix m;
    m.rows = docs.size();
    m.dim = ids.size();
    m.values.assign(m.rows * m.dim, 0.0);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const auto it = std::find(ids.begin(), ids.end(), docs[i].id);
      m.values[i * m.dim + static_cast<std::size_t>(it - ids.begin())] = 1.0;
    }
    return m;
  };
}

std::vector<Article> labeled_corpus(const std::vector<std::string>& langs, std::size_t per_topic, std::size_t topics) {
  std::vector<Article> out;
  for (const auto& lang : langs) {
    for (std::size_t t = 0; t < topics; ++t) {
      for (std::size_t k = 0; k < per_topic; ++k) {
        Article a;
        a.id = "t" + std::to_string(t) + "-" + std::to_string(k);
        a.language = lang;
        a.title = "title";
        a.body = "body " + a.id;
        a.summary = "summary " + a.id;
        a.topics = std::vector<std::string>{"topic" + std::to_string(t)};
        out.push_back(a);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("retrieval hand example") {
  const double r = 1.0 / std::sqrt(2.0);
  RetrievalTask task;
  task.summaries = EmbeddingMatrix::from_rows({{1, 0}, {0, 1}, {r, r}});
  task.bodies = EmbeddingMatrix::from_rows({{0, 1}, {1, 0}, {r, r}});
  const auto result = retrieve(task);
  CHECK(result.matches == std::vector<std::size_t>{1, 0, 2});
  CHECK(result.accuracy == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("retrieval self-match and ties") {
  Rng rng(1);
  const Rows rows = random_rows(rng, 10, 6);
  RetrievalTask task{EmbeddingMatrix::from_rows(rows), EmbeddingMatrix::from_rows(rows), "de", "de"};
  CHECK(retrieve(task).accuracy == 1.0);
  RetrievalTask ties{EmbeddingMatrix::from_rows({{1, 0}, {1, 0}}), EmbeddingMatrix::from_rows({{1, 0}, {2, 0}}), "", ""};
  CHECK(retrieve(ties).matches == std::vector<std::size_t>{0, 0});
  RetrievalTask zero{EmbeddingMatrix::from_rows({{0, 0}}), EmbeddingMatrix::from_rows({{1, 0}}), "", ""};
  CHECK_THROWS_AS(retrieve(zero), DegenerateInputError);
  RetrievalTask uneven{EmbeddingMatrix::from_rows({{1, 0}}), EmbeddingMatrix::from_rows({{1, 0}, {0, 1}}), "", ""};
  CHECK_THROWS_AS(retrieve(uneven), DimensionError);
}

TEST_CASE("retrieval and 1-NN agree with brute-force oracles") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(20), d = 2 + rng.below(8);
    const Rows s = random_rows(rng, m, d), b = random_rows(rng, m, d);
    RetrievalTask task{EmbeddingMatrix::from_rows(s), EmbeddingMatrix::from_rows(b), "", ""};
    CHECK(retrieve(task).accuracy == testing::brute_retrieval(s, b));

    const std::size_t t = 1 + rng.below(20), e = 1 + rng.below(20);
    const Rows train = random_rows(rng, t, d), test = random_rows(rng, e, d);
    const auto train_labels = random_labels(rng, t, 4), test_labels = random_labels(rng, e, 4);
    ClassificationTask ct{EmbeddingMatrix::from_rows(train), train_labels, EmbeddingMatrix::from_rows(test),
                          test_labels, label_set(train_labels, test_labels)};
    const auto pred = knn_classify(ct);
    CHECK(pred == testing::brute_1nn(train, train_labels, test));
    CHECK(weighted_f1(pred, test_labels, ct.classes).weighted_f1 ==
          doctest::Approx(testing::brute_weighted_f1(pred, test_labels)).epsilon(1e-12));
  }
}

TEST_CASE("scale and permutation invariance") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + rng.below(15);
    Rows s = random_rows(rng, m, 5), b = random_rows(rng, m, 5);
    const auto base = retrieve({EmbeddingMatrix::from_rows(s), EmbeddingMatrix::from_rows(b), "", ""});
    const std::size_t row = rng.below(m);
    for (double& v : s[row]) v *= 3.7;
    for (double& v : b[(row + 1) % m]) v *= 0.2;
    const auto scaled = retrieve({EmbeddingMatrix::from_rows(s), EmbeddingMatrix::from_rows(b), "", ""});
    CHECK(scaled.matches == base.matches);

    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    rng.shuffle(perm);
    Rows ps(m), pb(m);
    for (std::size_t i = 0; i < m; ++i) {
      ps[i] = s[perm[i]];
      pb[i] = b[perm[i]];
    }
    CHECK(retrieve({EmbeddingMatrix::from_rows(ps), EmbeddingMatrix::from_rows(pb), "", ""}).accuracy ==
          doctest::Approx(scaled.accuracy));
  }
}

TEST_CASE("knn edge cases") {
  Rng rng(4);
  const Rows train = random_rows(rng, 6, 4);
  const std::vector<std::string> labels{"a", "b", "c", "a", "b", "c"};
  ClassificationTask self{EmbeddingMatrix::from_rows(train), labels, EmbeddingMatrix::from_rows(train), labels,
                          {"a", "b", "c"}};
  CHECK(knn_classify(self) == labels);
  ClassificationTask single{EmbeddingMatrix::from_rows({{1, 2, 3, 4}}), {"z"}, EmbeddingMatrix::from_rows(train),
                            labels, {"a", "b", "c", "z"}};
  for (const auto& p : knn_classify(single)) CHECK(p == "z");
  CHECK_THROWS_AS(knn_classify(single, 2), ConfigError);
  CHECK_THROWS_AS(knn_classify(single, 0), ConfigError);

  // k = 3: neighbors a (nearest), b, b -> b wins the vote.
  ClassificationTask vote{EmbeddingMatrix::from_rows({{1, 0}, {0.9, 0.2}, {0.8, 0.3}, {-1, 0}}), {"a", "b", "b", "a"},
                          EmbeddingMatrix::from_rows({{1, 0}}), {"a"}, {"a", "b"}};
  CHECK(knn_classify(vote, 3) == std::vector<std::string>{"b"});
  // k = 2: a and b tie, nearest member a wins.
  CHECK(knn_classify(vote, 2) == std::vector<std::string>{"a"});
}

TEST_CASE("weighted F1") {
  const std::vector<std::string> classes{"a", "b"};
  const std::vector<std::string> gold{"a", "a", "b", "b"}, pred{"a", "b", "b", "b"};
  const auto r = weighted_f1(pred, gold, classes);
  CHECK(r.weighted_f1 == doctest::Approx(11.0 / 15.0).epsilon(1e-12));
  CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class[1].f1 == doctest::Approx(4.0 / 5.0));
  CHECK(r.per_class[0].precision == 1.0);
  CHECK(r.per_class[0].recall == 0.5);
  CHECK(r.accuracy == 0.75);
  CHECK(weighted_f1(gold, gold, classes).weighted_f1 == 1.0);

  const std::vector<std::string> with_empty{"a", "b", "c"};
  const auto z = weighted_f1(pred, gold, with_empty);
  CHECK(z.per_class[2].support == 0);
  CHECK(z.weighted_f1 == doctest::Approx(11.0 / 15.0));

  const std::vector<std::string> none;
  CHECK_THROWS_AS(weighted_f1(none, none, classes), DegenerateInputError);
  CHECK_THROWS_AS(weighted_f1(pred, none, classes), DimensionError);

  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.below(30);
    const auto g = random_labels(rng, n, 5), p = random_labels(rng, n, 5);
    const double f = weighted_f1(p, g, label_set(g, p)).weighted_f1;
    CHECK((f >= 0.0 && f <= 1.0));
  }
}

TEST_CASE("stratified split") {
  std::map<std::string, std::string> labels;
  for (int i = 0; i < 304; ++i) labels["own" + std::to_string(i)] = "own";
  for (int i = 0; i < 308; ++i) labels["int" + std::to_string(i)] = "international";
  for (int i = 0; i < 1835; ++i) labels["sch" + std::to_string(i)] = "switzerland";
  const auto split = stratified_split(labels, 0.2, 1);
  std::map<std::string, std::size_t> test_counts;
  for (const auto& id : split.test_ids) ++test_counts[labels[id]];
  CHECK(test_counts["own"] == 60);
  CHECK(test_counts["international"] == 61);
  CHECK(test_counts["switzerland"] == 367);
  CHECK(split.train_ids.size() + split.test_ids.size() == labels.size());
  std::set<std::string> seen(split.train_ids.begin(), split.train_ids.end());
  for (const auto& id : split.test_ids) CHECK(seen.insert(id).second);
  CHECK(stratified_split(labels, 0.2, 1).test_ids == split.test_ids);
  CHECK(stratified_split(labels, 0.2, 2).test_ids != split.test_ids);
}

TEST_CASE("eval suite shape and the perfect-embedding ceiling") {
  const std::vector<std::string> langs{"de", "fr", "it", "rm"};
  const auto corpus = labeled_corpus(langs, 10, 3);
  std::vector<std::string> ids;
  for (const auto& a : corpus) {
    if (a.language == "de") ids.push_back(a.id);
  }
  EvalOptions opts;
  opts.pivot_language = "de";
  const EvalReport report = run_eval_suite(one_hot_embedder(ids), corpus, opts);
  CHECK(report.languages == langs);
  CHECK(report.retrieval.size() == 4);
  for (const auto& [s, row] : report.retrieval) {
    CHECK(row.size() == 4);
    for (const auto& [b, acc] : row) CHECK(acc == 1.0);
  }
  CHECK(report.classification.size() == 4);
  CHECK(report.train_documents == 24);
  CHECK(report.test_documents == 6);
  // One-hot vectors are mutually orthogonal, so 1-NN falls back to the first training row.
  const double expected = report.classification.at("de").weighted_f1;
  for (const auto& [lang, cell] : report.classification) CHECK(cell.weighted_f1 == expected);

  const auto json = report.to_json();
  CHECK(json.find("\"retrieval\"") != std::string::npos);
  CHECK(report.render_table().find("Summary language") != std::string::npos);
  CHECK(run_eval_suite(one_hot_embedder(ids), corpus, opts).to_json() == json);
}

TEST_CASE("topic-aligned embeddings classify perfectly") {
  const std::vector<std::string> langs{"de", "fr"};
  const auto corpus = labeled_corpus(langs, 10, 4);
  Embedder by_topic = [](const std::vector<DocumentText>& docs) {
    EmbeddingMatrix m;
    m.rows = docs.size();
    m.dim = 4;
    m.values.assign(m.rows * 4, 0.0);
    for (std::size_t i = 0; i < docs.size(); ++i) m.values[i * 4 + static_cast<std::size_t>(docs[i].id[1] - '0')] = 1.0;
    return m;
  };
  EvalOptions opts;
  opts.retrieval = false;
  const auto report = run_eval_suite(by_topic, corpus, opts);
  CHECK_FALSE(report.has_retrieval);
  for (const auto& [lang, cell] : report.classification) CHECK(cell.weighted_f1 == 1.0);
}

TEST_CASE("missing parallel versions are listed") {
  auto corpus = labeled_corpus({"de", "fr"}, 3, 2);
  corpus.erase(std::remove_if(corpus.begin(), corpus.end(),
                              [](const Article& a) { return a.language == "fr" && a.id == "t1-2"; }),
               corpus.end());
  try {
    run_eval_suite(one_hot_embedder({}), corpus, {});
    FAIL("expected an error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("fr: t1-2") != std::string::npos);
  }
}

TEST_CASE("random embeddings retrieve near chance") {
  Rng rng(6);
  double total = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    const Rows s = random_rows(rng, 100, 16), b = random_rows(rng, 100, 16);
    total += retrieve({EmbeddingMatrix::from_rows(s), EmbeddingMatrix::from_rows(b), "", ""}).accuracy;
  }
  const double mean = total / 20.0;
  const double sigma = std::sqrt(0.01 * 0.99 / 100.0 / 20.0);
  CHECK(std::abs(mean - 0.01) < 3.0 * sigma);
}
