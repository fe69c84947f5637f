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
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace ssb {

struct Article {
  std::string id;
  std::string language;
  std::string title;
  std::optional<std::string> lead;
  std::string body;
  std::optional<std::string> summary;
  std::optional<std::vector<std::string>> topics;

  bool operator==(const Article&) const = default;
};

struct RecordError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct LoadResult {
  std::vector<Article> articles;
  std::vector<RecordError> errors;
};

// Reads JSON Lines. Malformed or invalid records are collected in `errors`
// with their line number and skipped. Blank lines are ignored. An
// unreadable file is an IoError. When `languages` is nonempty, articles in
// any other language are rejected.
LoadResult load_articles(const std::filesystem::path& path,
                         const std::set<std::string>& languages = {});

// Parses one JSONL record; throws ParseError on a malformed or invalid one.
Article parse_article(const std::string& line);
std::string article_to_json(const Article& article);
void write_articles(std::span<const Article> articles, const std::filesystem::path& path);

// Collapses whitespace runs to single spaces and trims both ends.
std::string normalize_whitespace(const std::string& text);

struct TrainPair {
  std::string anchor_text;    // title, then " " + lead when present
  std::string positive_text;  // body
  std::string language;
  std::string article_id;
};

struct PairResult {
  std::vector<TrainPair> pairs;
  std::size_t skipped = 0;  // articles with an empty title
};

PairResult make_pairs(std::span<const Article> articles);

struct OverlapResult {
  std::vector<Article> articles;
  std::size_t removed = 0;
};

OverlapResult remove_overlap(std::span<const Article> train, const std::set<std::string>& eval_ids);

struct LanguageStats {
  std::size_t documents = 0;
  std::size_t tokens = 0;
};

struct CorpusStats {
  std::map<std::string, LanguageStats> by_language;

  LanguageStats total() const;
  // Language / Documents / Tokens table with a Total row.
  std::string render() const;
};

// Tokens are the words of title, lead and body.
CorpusStats compute_stats(std::span<const Article> articles);

struct SynthOptions {
  std::string id_prefix = "doc";
  std::size_t filler_words = 30;
  std::size_t content_words_per_topic = 100;
  std::size_t name_words_per_topic = 100;
  std::size_t content_keywords = 3;
  std::size_t name_keywords = 5;
  std::size_t title_length = 6;
  std::size_t lead_length = 10;
  std::size_t body_length = 56;
  std::size_t summary_length = 16;
  double keyword_rate = 0.4;
  double topic_rate = 0.05;
  // When nonzero, document k of a topic covers story k mod stories_per_topic:
  // a fixed keyword set drawn once per lexicon, independent of the seed.
  // Zero draws fresh keywords for every document.
  std::size_t stories_per_topic = 20;
};

// Topic labels used by the generator: ten news categories, then "topic-N".
std::string synth_topic_label(std::size_t topic);

// Parallel synthetic corpus. Each topic owns content words and name words;
// every document draws its own keywords from its topic and fills title,
// lead, body and summary with keywords, other topic words and shared filler.
// A language renders a pivot word through a per-language bijection: content
// and filler words get the suffix "x<code>", name words are left unchanged.
// The vocabulary depends only on the options and topic count, so corpora
// generated with different seeds share it. Output is grouped by language in
// the given order, documents ordered by topic then index.
std::vector<Article> synth_corpus(std::size_t n_topics, std::size_t docs_per_topic,
                                  const std::vector<std::string>& languages, std::uint64_t seed,
                                  const SynthOptions& options = {});

std::string render_word(const std::string& pivot_word, const std::string& language);
// Inverse of the per-language rendering applied to whitespace-separated text.
std::string decode_to_pivot(const std::string& text, const std::string& language);

}  // namespace ssb
