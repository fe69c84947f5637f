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
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ssb/corpus.hpp"
#include "ssb/encoder.hpp"
#include "ssb/tensor.hpp"
#include "ssb/tokenizer.hpp"

namespace ssb {

// Row-major [rows x dim] embedding matrix.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  static EmbeddingMatrix from_rows(const std::vector<std::vector<double>>& rows);
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }
};

// Cosine similarity of two vectors; a zero vector is a DegenerateInputError.
double cosine(std::span<const double> a, std::span<const double> b);

struct RetrievalTask {
  EmbeddingMatrix summaries;
  EmbeddingMatrix bodies;
  std::string summary_language;
  std::string body_language;
};

struct RetrievalResult {
  std::vector<std::size_t> matches;  // matches[i] = argmax_j cos(summary_i, body_j)
  double accuracy = 0.0;
};

// Ties resolve to the lowest body index.
RetrievalResult retrieve(const RetrievalTask& task);

struct ClassificationTask {
  EmbeddingMatrix train;
  std::vector<std::string> train_labels;
  EmbeddingMatrix test;
  std::vector<std::string> test_labels;
  std::vector<std::string> classes;
};

// Labels of the k most similar training rows (ties to the lowest index).
// For k > 1 the majority label wins; a vote tie goes to the label of the
// nearest tied member.
std::vector<std::string> knn_classify(const ClassificationTask& task, std::size_t k = 1);

struct ClassScore {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct F1Report {
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<ClassScore> per_class;
};

// Undefined precision/recall/F1 count as 0; weights are gold supports.
F1Report weighted_f1(std::span<const std::string> predicted, std::span<const std::string> gold,
                     std::span<const std::string> classes);

struct DocumentText {
  std::string id;
  std::string language;
  std::string text;
};

// Maps documents to embeddings, one row per document in order.
using Embedder = std::function<EmbeddingMatrix(const std::vector<DocumentText>&)>;

// Embeds with an encoder in inference mode (dropout off), in chunks of
// batch_size.
Embedder make_encoder_embedder(const EncoderModel<float>& model, const Vocab& vocab,
                               std::size_t max_len, std::size_t batch_size = 32);

struct EvalOptions {
  std::uint64_t split_seed = 0;
  double test_fraction = 0.2;
  // Classification training language; the first evaluated language if empty.
  std::string pivot_language;
  // Languages to evaluate; all languages in the corpus (sorted) if empty.
  std::vector<std::string> languages;
  bool retrieval = true;
  bool classification = true;
};

struct ClassificationCell {
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<ClassScore> per_class;
};

struct EvalReport {
  std::vector<std::string> languages;
  bool has_retrieval = false;
  std::size_t retrieval_documents = 0;
  // retrieval[summary_language][article_language]
  std::map<std::string, std::map<std::string, double>> retrieval;
  bool has_classification = false;
  std::string train_language;
  std::size_t train_documents = 0;
  std::size_t test_documents = 0;
  std::size_t disregarded_documents = 0;
  std::vector<std::string> classes;
  std::map<std::string, ClassificationCell> classification;  // by test language

  std::string to_json() const;
  // Aligned tables: summary x article language accuracy, then the
  // training-language x test-language weighted F1 row.
  std::string render_table() const;
};

struct SplitResult {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

// Per-category shuffle with the seed (categories and ids sorted first);
// floor(test_fraction * n) ids of each category go to the test side, keeping
// at least one for training.
SplitResult stratified_split(const std::map<std::string, std::string>& label_by_id, double test_fraction,
                             std::uint64_t seed);

// Both tasks over a parallel corpus. Retrieval uses every id that has a
// summary, for every (summary language, article language) pair.
// Classification uses documents with exactly one topic tag; training bodies
// stay in the pivot language, test bodies are taken in each language. A
// document missing from some evaluated language is a ParseError listing the
// absent ids.
EvalReport run_eval_suite(const Embedder& embedder, std::span<const Article> corpus,
                          const EvalOptions& options);

}  // namespace ssb
