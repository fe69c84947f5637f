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

#include "ssb/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ssb/error.hpp"
#include "ssb/rng.hpp"

namespace ssb {

EmbeddingMatrix EmbeddingMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  EmbeddingMatrix m;
  m.rows = rows.size();
  m.dim = rows.empty() ? 0 : rows.front().size();
  m.values.reserve(m.rows * m.dim);
  for (const auto& r : rows) {
    if (r.size() != m.dim) throw DimensionError("embedding rows differ in dimension");
    m.values.insert(m.values.end(), r.begin(), r.end());
  }
  return m;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine of vectors with " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " entries");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw DegenerateInputError("cosine similarity with a zero-norm vector");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

RetrievalResult retrieve(const RetrievalTask& task) {
  const EmbeddingMatrix& s = task.summaries;
  const EmbeddingMatrix& b = task.bodies;
  if (s.rows != b.rows) {
    throw DimensionError("retrieval needs as many summaries as bodies (" + std::to_string(s.rows) +
                         " vs " + std::to_string(b.rows) + ")");
  }
  if (s.rows == 0) throw DegenerateInputError("retrieval over zero documents");
  if (s.dim != b.dim) throw DimensionError("summary and body embeddings differ in dimension");
  RetrievalResult result;
  result.matches.resize(s.rows);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < s.rows; ++i) {
    std::size_t best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double sim = cosine(s.row(i), b.row(j));
      if (sim > best_sim) {
        best_sim = sim;
        best = j;
      }
    }
    result.matches[i] = best;
    if (best == i) ++correct;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(s.rows);
  return result;
}

std::vector<std::string> knn_classify(const ClassificationTask& task, std::size_t k) {
  const EmbeddingMatrix& train = task.train;
  if (train.rows == 0) throw DegenerateInputError("nearest-neighbor classification without training rows");
  if (train.rows != task.train_labels.size()) {
    throw DimensionError("training labels do not match training rows");
  }
  if (k == 0 || k > train.rows) {
    throw ConfigError("k must lie in [1, " + std::to_string(train.rows) + "]");
  }
  if (task.test.rows > 0 && task.test.dim != train.dim) {
    throw DimensionError("train and test embeddings differ in dimension");
  }
  std::vector<std::string> predictions;
  predictions.reserve(task.test.rows);
  std::vector<double> sims(train.rows);
  std::vector<std::size_t> order(train.rows);
  for (std::size_t i = 0; i < task.test.rows; ++i) {
    for (std::size_t j = 0; j < train.rows; ++j) sims[j] = cosine(task.test.row(i), train.row(j));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
                      });
    if (k == 1) {
      predictions.push_back(task.train_labels[order[0]]);
      continue;
    }
    std::map<std::string, std::size_t> votes;
    for (std::size_t r = 0; r < k; ++r) ++votes[task.train_labels[order[r]]];
    std::size_t top = 0;
    for (const auto& [label, count] : votes) top = std::max(top, count);
    for (std::size_t r = 0; r < k; ++r) {
      const std::string& label = task.train_labels[order[r]];
      if (votes[label] == top) {
        predictions.push_back(label);
        break;
      }
    }
  }
  return predictions;
}

F1Report weighted_f1(std::span<const std::string> predicted, std::span<const std::string> gold,
                     std::span<const std::string> classes) {
  if (predicted.size() != gold.size()) {
    throw DimensionError("weighted_f1: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(gold.size()) + " gold labels");
  }
  if (gold.empty()) throw DegenerateInputError("weighted_f1 over zero examples");
  const std::set<std::string> class_set(classes.begin(), classes.end());
  for (const std::string& g : gold) {
    if (!class_set.contains(g)) throw ContractError("gold label '" + g + "' not in the label set");
  }
  F1Report report;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += predicted[i] == gold[i] ? 1 : 0;
  report.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  for (const std::string& c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool p = predicted[i] == c, g = gold[i] == c;
      if (p && g) ++tp;
      else if (p) ++fp;
      else if (g) ++fn;
    }
    ClassScore s;
    s.label = c;
    s.support = tp + fn;
    s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    report.weighted_f1 +=
        static_cast<double>(s.support) / static_cast<double>(gold.size()) * s.f1;
    report.per_class.push_back(std::move(s));
  }
  return report;
}

Embedder make_encoder_embedder(const EncoderModel<float>& model, const Vocab& vocab,
                               std::size_t max_len, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("embedding batch size must be positive");
  return [&model, &vocab, max_len, batch_size](const std::vector<DocumentText>& docs) {
    EmbeddingMatrix out;
    out.rows = docs.size();
    out.dim = model.config().hidden;
    out.values.assign(out.rows * out.dim, 0.0);
    std::map<std::string, std::vector<std::size_t>> by_language;
    for (std::size_t i = 0; i < docs.size(); ++i) by_language[docs[i].language].push_back(i);
    for (const auto& [language, indices] : by_language) {
      for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t end = std::min(indices.size(), start + batch_size);
        std::vector<TokenSequence> seqs;
        for (std::size_t r = start; r < end; ++r) {
          seqs.push_back(pad_truncate(tokenize(docs[indices[r]].text, vocab), max_len));
        }
        Tape<float> tape(false);
        const Tensor<float> pooled = model.embed(tape, trim_padding(make_batch(seqs)), language);
        auto data = pooled.data();
        for (std::size_t r = start; r < end; ++r) {
          auto dst = out.row(indices[r]);
          for (std::size_t j = 0; j < out.dim; ++j) {
            dst[j] = static_cast<double>(data[(r - start) * out.dim + j]);
          }
        }
      }
    }
    return out;
  };
}

SplitResult stratified_split(const std::map<std::string, std::string>& label_by_id, double test_fraction,
                             std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> by_label;
  for (const auto& [id, label] : label_by_id) by_label[label].push_back(id);
  Rng rng(seed);
  SplitResult split;
  for (auto& [label, ids] : by_label) {
    rng.shuffle(ids);
    std::size_t n_test = static_cast<std::size_t>(std::floor(test_fraction * ids.size()));
    if (n_test >= ids.size()) n_test = ids.size() - 1;
    split.test_ids.insert(split.test_ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train_ids.insert(split.train_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  }
  return split;
}

namespace {

EmbeddingMatrix select_rows(const EmbeddingMatrix& m, const std::vector<std::size_t>& rows) {
  EmbeddingMatrix out;
  out.rows = rows.size();
  out.dim = m.dim;
  out.values.reserve(out.rows * out.dim);
  for (std::size_t r : rows) {
    auto src = m.row(r);
    out.values.insert(out.values.end(), src.begin(), src.end());
  }
  return out;
}

}  // namespace

EvalReport run_eval_suite(const Embedder& embedder, std::span<const Article> corpus,
                          const EvalOptions& options) {
  std::map<std::string, std::map<std::string, const Article*>> by_language;
  for (const Article& a : corpus) by_language[a.language][a.id] = &a;

  EvalReport report;
  if (options.languages.empty()) {
    for (const auto& [lang, docs] : by_language) report.languages.push_back(lang);
  } else {
    report.languages = options.languages;
  }
  if (report.languages.empty()) throw DegenerateInputError("evaluation corpus is empty");

  std::set<std::string> all_ids;
  for (const std::string& lang : report.languages) {
    for (const auto& [id, a] : by_language[lang]) all_ids.insert(id);
  }
  std::string missing;
  for (const std::string& lang : report.languages) {
    const auto& docs = by_language[lang];
    std::string absent;
    for (const std::string& id : all_ids) {
      if (!docs.contains(id)) absent += (absent.empty() ? "" : ", ") + id;
    }
    if (!absent.empty()) missing += "\n  " + lang + ": " + absent;
  }
  if (!missing.empty()) throw ParseError("missing parallel versions:" + missing);
  const std::vector<std::string> ids(all_ids.begin(), all_ids.end());

  // Body embeddings are shared by both tasks.
  std::map<std::string, EmbeddingMatrix> bodies;
  for (const std::string& lang : report.languages) {
    std::vector<DocumentText> docs;
    for (const std::string& id : ids) docs.push_back({id, lang, by_language[lang][id]->body});
    bodies[lang] = embedder(docs);
  }

  if (options.retrieval) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const bool all = std::all_of(report.languages.begin(), report.languages.end(),
                                   [&](const std::string& lang) {
                                     const Article* a = by_language[lang][ids[i]];
                                     return a->summary && !a->summary->empty();
                                   });
      if (all) rows.push_back(i);
    }
    if (rows.empty()) throw DegenerateInputError("no documents with summaries for retrieval");
    report.has_retrieval = true;
    report.retrieval_documents = rows.size();
    std::map<std::string, EmbeddingMatrix> summaries;
    for (const std::string& lang : report.languages) {
      std::vector<DocumentText> docs;
      for (std::size_t r : rows) docs.push_back({ids[r], lang, *by_language[lang][ids[r]]->summary});
      summaries[lang] = embedder(docs);
    }
    for (const std::string& s : report.languages) {
      for (const std::string& b : report.languages) {
        RetrievalTask task{summaries[s], select_rows(bodies[b], rows), s, b};
        report.retrieval[s][b] = retrieve(task).accuracy;
      }
    }
  }

  if (options.classification) {
    report.train_language =
        options.pivot_language.empty() ? report.languages.front() : options.pivot_language;
    if (std::find(report.languages.begin(), report.languages.end(), report.train_language) ==
        report.languages.end()) {
      throw RoutingError("pivot language '" + report.train_language + "' is not evaluated");
    }
    std::map<std::string, std::string> label_by_id;
    for (const std::string& id : ids) {
      const Article* a = by_language[report.train_language][id];
      if (a->topics && a->topics->size() == 1) {
        label_by_id[id] = a->topics->front();
      } else {
        ++report.disregarded_documents;
      }
    }
    if (label_by_id.empty()) throw DegenerateInputError("no single-topic documents to classify");
    const SplitResult split = stratified_split(label_by_id, options.test_fraction, options.split_seed);
    if (split.test_ids.empty()) throw DegenerateInputError("classification test split is empty");
    std::set<std::string> classes;
    for (const auto& [id, label] : label_by_id) classes.insert(label);
    report.classes.assign(classes.begin(), classes.end());
    report.has_classification = true;
    report.train_documents = split.train_ids.size();
    report.test_documents = split.test_ids.size();

    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < ids.size(); ++i) row_of[ids[i]] = i;
    auto rows_for = [&](const std::vector<std::string>& subset) {
      std::vector<std::size_t> rows;
      for (const std::string& id : subset) rows.push_back(row_of.at(id));
      return rows;
    };
    auto labels_for = [&](const std::vector<std::string>& subset) {
      std::vector<std::string> labels;
      for (const std::string& id : subset) labels.push_back(label_by_id.at(id));
      return labels;
    };
    const auto train_rows = rows_for(split.train_ids);
    const auto test_rows = rows_for(split.test_ids);
    ClassificationTask task;
    task.train = select_rows(bodies[report.train_language], train_rows);
    task.train_labels = labels_for(split.train_ids);
    task.test_labels = labels_for(split.test_ids);
    task.classes = report.classes;
    for (const std::string& lang : report.languages) {
      task.test = select_rows(bodies[lang], test_rows);
      const auto predicted = knn_classify(task, 1);
      const F1Report f1 = weighted_f1(predicted, task.test_labels, task.classes);
      report.classification[lang] = {f1.weighted_f1, f1.accuracy, f1.per_class};
    }
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["languages"] = languages;
  if (has_retrieval) {
    nlohmann::ordered_json r;
    r["documents"] = retrieval_documents;
    nlohmann::ordered_json grid;
    for (const std::string& s : languages) {
      nlohmann::ordered_json row;
      for (const std::string& b : languages) row[b] = retrieval.at(s).at(b);
      grid[s] = row;
    }
    r["accuracy"] = grid;
    j["retrieval"] = r;
  }
  if (has_classification) {
    nlohmann::ordered_json c;
    c["train_language"] = train_language;
    c["train_documents"] = train_documents;
    c["test_documents"] = test_documents;
    c["disregarded_documents"] = disregarded_documents;
    c["classes"] = classes;
    nlohmann::ordered_json f1, acc, per_class;
    for (const std::string& lang : languages) {
      const ClassificationCell& cell = classification.at(lang);
      f1[lang] = cell.weighted_f1;
      acc[lang] = cell.accuracy;
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (const ClassScore& s : cell.per_class) {
        rows.push_back({{"label", s.label},
                        {"precision", s.precision},
                        {"recall", s.recall},
                        {"f1", s.f1},
                        {"support", s.support}});
      }
      per_class[lang] = rows;
    }
    c["weighted_f1"] = f1;
    c["accuracy"] = acc;
    c["per_class"] = per_class;
    j["classification"] = c;
  }
  return j.dump(2) + "\n";
}

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%8.2f", 100.0 * v);
  return buf;
}

std::string column(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string label(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string EvalReport::render_table() const {
  std::ostringstream out;
  constexpr std::size_t kLabel = 20;
  if (has_retrieval) {
    out << "Document retrieval: accuracy (%), " << retrieval_documents << " documents\n";
    out << label("", kLabel) << "Article language\n";
    out << label("Summary language", kLabel);
    for (const std::string& b : languages) out << column(b, 8);
    out << '\n';
    for (const std::string& s : languages) {
      out << label(s, kLabel);
      for (const std::string& b : languages) out << percent(retrieval.at(s).at(b));
      out << '\n';
    }
  }
  if (has_classification) {
    if (has_retrieval) out << '\n';
    out << "Nearest-neighbor classification: weighted F1 (%), " << train_documents << " train / "
        << test_documents << " test documents\n";
    out << label("", kLabel) << "Test language\n";
    out << label("Training language", kLabel);
    for (const std::string& t : languages) out << column(t, 8);
    out << '\n';
    out << label(train_language, kLabel);
    for (const std::string& t : languages) out << percent(classification.at(t).weighted_f1);
    out << '\n';
  }
  return out.str();
}

}  // namespace ssb
