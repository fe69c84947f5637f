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

#include "ssb/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ssb/error.hpp"
#include "ssb/rng.hpp"
#include "ssb/tokenizer.hpp"

namespace ssb {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string required_string(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing required field \"") + key + "\"");
  if (!it->is_string()) throw ParseError(std::string("field \"") + key + "\" must be a string");
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ParseError(std::string("field \"") + key + "\" must be a string");
  return it->get<std::string>();
}

}  // namespace

Article parse_article(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object");
  Article a;
  a.id = required_string(j, "id");
  a.language = required_string(j, "language");
  a.title = required_string(j, "title");
  a.body = required_string(j, "body");
  a.lead = optional_string(j, "lead");
  a.summary = optional_string(j, "summary");
  if (auto it = j.find("topics"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseError("field \"topics\" must be an array of strings");
    std::vector<std::string> topics;
    for (const auto& t : *it) {
      if (!t.is_string()) throw ParseError("field \"topics\" must be an array of strings");
      topics.push_back(t.get<std::string>());
    }
    a.topics = std::move(topics);
  }
  if (a.id.empty()) throw ParseError("field \"id\" is empty");
  if (a.language.empty()) throw ParseError("field \"language\" is empty");
  if (a.body.empty()) throw ParseError("field \"body\" is empty");
  return a;
}

std::string article_to_json(const Article& a) {
  ordered_json j;
  j["id"] = a.id;
  j["language"] = a.language;
  j["title"] = a.title;
  if (a.lead) j["lead"] = *a.lead;
  j["body"] = a.body;
  if (a.summary) j["summary"] = *a.summary;
  if (a.topics) j["topics"] = *a.topics;
  return j.dump();
}

void write_articles(std::span<const Article> articles, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const Article& a : articles) out << article_to_json(a) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

LoadResult load_articles(const std::filesystem::path& path, const std::set<std::string>& languages) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus " + path.string());
  LoadResult result;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c) != 0; })) {
      continue;
    }
    try {
      Article a = parse_article(line);
      if (!languages.empty() && !languages.contains(a.language)) {
        throw ParseError("unsupported language \"" + a.language + "\"");
      }
      if (!seen.emplace(a.id, a.language).second) {
        throw ParseError("duplicate id \"" + a.id + "\" for language " + a.language);
      }
      result.articles.push_back(std::move(a));
    } catch (const ParseError& e) {
      result.errors.push_back({number, e.what()});
    }
  }
  if (in.bad()) throw IoError("error while reading " + path.string());
  return result;
}

std::string normalize_whitespace(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(ch);
    }
  }
  return out;
}

PairResult make_pairs(std::span<const Article> articles) {
  PairResult result;
  for (const Article& a : articles) {
    std::string anchor = normalize_whitespace(a.title);
    if (anchor.empty()) {
      ++result.skipped;
      continue;
    }
    if (a.lead) {
      const std::string lead = normalize_whitespace(*a.lead);
      if (!lead.empty()) anchor += " " + lead;
    }
    result.pairs.push_back({std::move(anchor), normalize_whitespace(a.body), a.language, a.id});
  }
  return result;
}

OverlapResult remove_overlap(std::span<const Article> train, const std::set<std::string>& eval_ids) {
  OverlapResult result;
  for (const Article& a : train) {
    if (eval_ids.contains(a.id)) {
      ++result.removed;
    } else {
      result.articles.push_back(a);
    }
  }
  return result;
}

LanguageStats CorpusStats::total() const {
  LanguageStats t;
  for (const auto& [lang, s] : by_language) {
    t.documents += s.documents;
    t.tokens += s.tokens;
  }
  return t;
}

namespace {

std::string group_thousands(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out.push_back(' ');
    out.push_back(digits[i]);
  }
  return out;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string CorpusStats::render() const {
  std::ostringstream out;
  const std::string rule(40, '-');
  out << pad_right("Language", 12) << pad_left("Documents", 12) << pad_left("Tokens", 16) << '\n';
  out << rule << '\n';
  for (const auto& [lang, s] : by_language) {
    out << pad_right(lang, 12) << pad_left(group_thousands(s.documents), 12)
        << pad_left(group_thousands(s.tokens), 16) << '\n';
  }
  out << rule << '\n';
  const LanguageStats t = total();
  out << pad_right("Total", 12) << pad_left(group_thousands(t.documents), 12)
      << pad_left(group_thousands(t.tokens), 16) << '\n';
  return out.str();
}

CorpusStats compute_stats(std::span<const Article> articles) {
  CorpusStats stats;
  for (const Article& a : articles) {
    LanguageStats& s = stats.by_language[a.language];
    s.documents += 1;
    s.tokens += split_words(a.title).size() + split_words(a.body).size();
    if (a.lead) s.tokens += split_words(*a.lead).size();
  }
  return stats;
}

std::string synth_topic_label(std::size_t topic) {
  static const char* const kLabels[] = {"accident", "corona",       "economy",     "film",
                                        "football", "germany",      "social media", "switzerland",
                                        "ukraine war", "usa"};
  if (topic < std::size(kLabels)) return kLabels[topic];
  return "topic-" + std::to_string(topic);
}

namespace {

// Consonant-vowel syllables; 'x' never occurs so rendered suffixes stay
// unambiguous.
std::string syllable_word(std::size_t index) {
  static const char kConsonants[] = "bdfgklmnprstvz";
  static const char kVowels[] = "aeiou";
  constexpr std::size_t kC = sizeof(kConsonants) - 1;
  constexpr std::size_t kV = sizeof(kVowels) - 1;
  constexpr std::size_t kSyllables = kC * kV;
  std::string word;
  std::size_t n = index;
  std::size_t count = 0;
  do {
    const std::size_t s = n % kSyllables;
    word.push_back(kConsonants[s / kV]);
    word.push_back(kVowels[s % kV]);
    n /= kSyllables;
    ++count;
  } while (n > 0 || count < 2);
  return word;
}

struct PivotLexicon {
  std::vector<std::string> filler;
  std::vector<std::vector<std::string>> content;  // per topic
  std::vector<std::vector<std::string>> names;    // per topic
  std::vector<std::vector<std::vector<std::string>>> stories;  // per topic, keyword sets
};

std::vector<std::string> sample_distinct(const std::vector<std::string>& pool, std::size_t k, Rng& rng);

PivotLexicon make_lexicon(std::size_t n_topics, const SynthOptions& o) {
  PivotLexicon lex;
  // Two-syllable words start at 70^1 so every word has the same minimum length.
  std::size_t next = 70;
  for (std::size_t i = 0; i < o.filler_words; ++i) lex.filler.push_back(syllable_word(next++));
  lex.content.resize(n_topics);
  lex.names.resize(n_topics);
  for (std::size_t t = 0; t < n_topics; ++t) {
    for (std::size_t i = 0; i < o.content_words_per_topic; ++i) {
      lex.content[t].push_back(syllable_word(next++));
    }
  }
  for (std::size_t t = 0; t < n_topics; ++t) {
    for (std::size_t i = 0; i < o.name_words_per_topic; ++i) {
      std::string w = syllable_word(next++);
      w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
      lex.names[t].push_back(std::move(w));
    }
  }
  Rng rng(0x5eed5eedULL);
  lex.stories.resize(n_topics);
  for (std::size_t t = 0; t < n_topics; ++t) {
    for (std::size_t s = 0; s < o.stories_per_topic; ++s) {
      std::vector<std::string> keys = sample_distinct(lex.content[t], o.content_keywords, rng);
      for (std::string& n : sample_distinct(lex.names[t], o.name_keywords, rng)) keys.push_back(std::move(n));
      lex.stories[t].push_back(std::move(keys));
    }
  }
  return lex;
}

std::vector<std::string> sample_distinct(const std::vector<std::string>& pool, std::size_t k, Rng& rng) {
  std::vector<std::string> copy = pool;
  k = std::min(k, copy.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(copy[i], copy[i + rng.below(copy.size() - i)]);
  }
  copy.resize(k);
  return copy;
}

bool is_name(const std::string& word) {
  return !word.empty() && std::isupper(static_cast<unsigned char>(word[0]));
}

}  // namespace

std::string render_word(const std::string& pivot_word, const std::string& language) {
  if (is_name(pivot_word)) return pivot_word;
  return pivot_word + "x" + language;
}

std::string decode_to_pivot(const std::string& text, const std::string& language) {
  const std::string suffix = "x" + language;
  std::istringstream in(text);
  std::string word, out;
  while (in >> word) {
    if (!is_name(word) && word.size() > suffix.size() &&
        word.compare(word.size() - suffix.size(), suffix.size(), suffix) == 0) {
      word.resize(word.size() - suffix.size());
    }
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

std::vector<Article> synth_corpus(std::size_t n_topics, std::size_t docs_per_topic,
                                  const std::vector<std::string>& languages, std::uint64_t seed,
                                  const SynthOptions& options) {
  if (n_topics < 2) throw ConfigError("synthetic corpus needs at least 2 topics");
  if (languages.empty()) throw ConfigError("synthetic corpus needs at least one language");
  const PivotLexicon lex = make_lexicon(n_topics, options);
  Rng rng(seed);

  struct PivotDoc {
    std::string id;
    std::size_t topic;
    std::vector<std::string> title, lead, body, summary;
  };
  std::vector<PivotDoc> docs;
  for (std::size_t t = 0; t < n_topics; ++t) {
    std::vector<std::string> topic_pool = lex.content[t];
    topic_pool.insert(topic_pool.end(), lex.names[t].begin(), lex.names[t].end());
    for (std::size_t k = 0; k < docs_per_topic; ++k) {
      std::vector<std::string> keywords;
      if (!lex.stories[t].empty()) {
        keywords = lex.stories[t][k % lex.stories[t].size()];
      } else {
        keywords = sample_distinct(lex.content[t], options.content_keywords, rng);
        for (std::string& n : sample_distinct(lex.names[t], options.name_keywords, rng)) {
          keywords.push_back(std::move(n));
        }
      }
      auto field = [&](std::size_t base) {
        const std::size_t spread = base / 4;
        const std::size_t len = base - spread + rng.below(2 * spread + 1);
        std::vector<std::string> words;
        words.reserve(len);
        for (std::size_t i = 0; i < len; ++i) {
          const double r = rng.uniform();
          if (r < options.keyword_rate && !keywords.empty()) {
            words.push_back(keywords[rng.below(keywords.size())]);
          } else if (r < options.keyword_rate + options.topic_rate && !topic_pool.empty()) {
            words.push_back(topic_pool[rng.below(topic_pool.size())]);
          } else {
            words.push_back(lex.filler[rng.below(lex.filler.size())]);
          }
        }
        return words;
      };
      PivotDoc d;
      d.id = options.id_prefix + "-" + std::to_string(seed) + "-t" + std::to_string(t) + "-d" +
             std::to_string(k);
      d.topic = t;
      d.title = field(options.title_length);
      d.lead = field(options.lead_length);
      d.body = field(options.body_length);
      d.summary = field(options.summary_length);
      docs.push_back(std::move(d));
    }
  }

  std::vector<Article> out;
  out.reserve(docs.size() * languages.size());
  for (const std::string& lang : languages) {
    auto render = [&](const std::vector<std::string>& words) {
      std::string s;
      for (const std::string& w : words) {
        if (!s.empty()) s.push_back(' ');
        s += render_word(w, lang);
      }
      return s;
    };
    for (const PivotDoc& d : docs) {
      Article a;
      a.id = d.id;
      a.language = lang;
      a.title = render(d.title);
      a.lead = render(d.lead);
      a.body = render(d.body);
      a.summary = render(d.summary);
      a.topics = std::vector<std::string>{synth_topic_label(d.topic)};
      out.push_back(std::move(a));
    }
  }
  return out;
}

}  // namespace ssb
