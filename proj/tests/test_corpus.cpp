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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ssb/corpus.hpp"
#include "ssb/error.hpp"
#include "ssb/rng.hpp"

using namespace ssb;
namespace fs = std::filesystem;

namespace {

fs::path write_lines(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

std::size_t word_count(const std::string& s) {
  std::istringstream in(s);
  std::string w;
  std::size_t n = 0;
  while (in >> w) ++n;
  return n;
}

}  // namespace

TEST_CASE("load_articles") {
  SUBCASE("empty file") {
    const auto p = write_lines("ssb_empty.jsonl", "");
    const auto r = load_articles(p);
    CHECK(r.articles.empty());
    CHECK(r.errors.empty());
  }
  SUBCASE("fixture round-trips exactly") {
    const std::string fixture =
        R"({"id":"a1","language":"de","title":"Titel","lead":"Lead text","body":"Body one.","summary":"Kurz","topics":["sport"]})"
        "\n"
        R"({"id":"a2","language":"fr","title":"Titre","body":"Corps."})"
        "\n\n"
        R"({"id":"a3","language":"it","title":"","body":"Testo","topics":["economia","politica"]})"
        "\n";
    const auto p = write_lines("ssb_fixture.jsonl", fixture);
    const auto r = load_articles(p);
    REQUIRE(r.articles.size() == 3);
    CHECK(r.errors.empty());
    CHECK(r.articles[0].lead == std::optional<std::string>("Lead text"));
    CHECK(r.articles[0].topics == std::optional<std::vector<std::string>>({"sport"}));
    CHECK_FALSE(r.articles[1].lead.has_value());
    CHECK_FALSE(r.articles[1].summary.has_value());
    CHECK(r.articles[2].topics->size() == 2);
    const auto out = fs::temp_directory_path() / "ssb_fixture_out.jsonl";
    write_articles(r.articles, out);
    const auto again = load_articles(out);
    CHECK(again.articles == r.articles);
    std::ifstream in(out);
    std::string first;
    std::getline(in, first);
    CHECK(parse_article(first) == r.articles[0]);
  }
  SUBCASE("bad records are reported and skipped") {
    const std::string text =
        R"({"id":"a1","language":"de","title":"T"})"
        "\n"
        R"({"id":"a2","language":"de","title":"T","body":"B"})"
        "\n"
        "not json\n"
        R"({"id":"a2","language":"de","title":"T","body":"B"})"
        "\n"
        R"({"id":"a3","language":"xx","title":"T","body":"B"})"
        "\n"
        R"({"id":"a4","language":"de","title":"T","body":""})"
        "\n";
    const auto p = write_lines("ssb_bad.jsonl", text);
    const auto r = load_articles(p, {"de", "fr"});
    CHECK(r.articles.size() == 1);
    REQUIRE(r.errors.size() == 5);
    CHECK(r.errors[0].line == 1);
    CHECK(r.errors[1].line == 3);
    CHECK(r.errors[2].line == 4);
    CHECK(r.errors[3].line == 5);
    CHECK(r.errors[4].line == 6);
  }
  CHECK_THROWS_AS(load_articles(fs::temp_directory_path() / "ssb_does_not_exist.jsonl"), IoError);
  CHECK_THROWS_AS(parse_article(R"({"id":"a","language":"de","title":5,"body":"b"})"), ParseError);
}

TEST_CASE("make_pairs") {
  std::vector<Article> articles(3);
  articles[0] = {"1", "de", "A", std::string("B"), "C", std::nullopt, std::nullopt};
  articles[1] = {"2", "de", "A", std::nullopt, "C", std::nullopt, std::nullopt};
  articles[2] = {"3", "de", "", std::string("B"), "C", std::nullopt, std::nullopt};
  const PairResult r = make_pairs(articles);
  REQUIRE(r.pairs.size() == 2);
  CHECK(r.pairs[0].anchor_text == "A B");
  CHECK(r.pairs[0].positive_text == "C");
  CHECK(r.pairs[1].anchor_text == "A");
  CHECK(r.skipped == 1);
  CHECK(r.pairs.size() + r.skipped == articles.size());
}

TEST_CASE("whitespace collapse") {
  CHECK(normalize_whitespace("  a \t b\n\nc  ") == "a b c");
  CHECK(normalize_whitespace("") == "");
  std::vector<Article> articles(1);
  articles[0] = {"1", "de", " Title\n", std::string(" lead  two "), "body\ttext", std::nullopt, std::nullopt};
  const PairResult r = make_pairs(articles);
  CHECK(r.pairs[0].anchor_text == "Title lead two");
  CHECK(r.pairs[0].positive_text == "body text");
}

TEST_CASE("remove_overlap") {
  std::vector<Article> arts;
  for (int i = 0; i < 10; ++i) arts.push_back({std::to_string(i), "de", "t", std::nullopt, "b", std::nullopt, std::nullopt});
  const auto r = remove_overlap(arts, {"2", "5", "7"});
  CHECK(r.articles.size() == 7);
  CHECK(r.removed == 3);
  for (const auto& a : r.articles) CHECK((a.id != "2" && a.id != "5" && a.id != "7"));
  CHECK(remove_overlap(arts, {"x"}).articles == arts);
  std::set<std::string> all;
  for (const auto& a : arts) all.insert(a.id);
  CHECK(remove_overlap(arts, all).articles.empty());
}

TEST_CASE("corpus stats") {
  std::vector<Article> arts{{"1", "de", "a b", std::string("c"), "d e f", std::nullopt, std::nullopt},
                            {"2", "fr", "a", std::nullopt, "b", std::nullopt, std::nullopt},
                            {"3", "de", "a", std::nullopt, "b c", std::nullopt, std::nullopt}};
  const CorpusStats s = compute_stats(arts);
  CHECK(s.by_language.at("de").documents == 2);
  CHECK(s.by_language.at("de").tokens == 9);
  CHECK(s.by_language.at("fr").tokens == 2);
  CHECK(s.total().documents == 3);
  CHECK(s.total().tokens == 11);
  std::reverse(arts.begin(), arts.end());
  CHECK(compute_stats(arts).render() == s.render());
  CHECK(s.render().find("Total") != std::string::npos);
}

TEST_CASE("synthetic corpus") {
  const std::vector<std::string> langs{"de", "fr", "it", "rm"};
  const auto a = synth_corpus(5, 40, langs, 3);
  const auto b = synth_corpus(5, 40, langs, 3);
  const auto c = synth_corpus(5, 40, langs, 4);
  CHECK(a == b);
  CHECK(a != c);
  REQUIRE(a.size() == 800);
  std::map<std::string, std::map<std::string, const Article*>> by;
  for (const Article& x : a) by[x.language][x.id] = &x;
  for (const auto& lang : langs) CHECK(by[lang].size() == 200);
  const auto stats = compute_stats(a);
  CHECK(stats.total().documents == 800);

  for (const auto& [id, de] : by["de"]) {
    const Article* fr = by["fr"][id];
    REQUIRE(fr != nullptr);
    CHECK(word_count(de->body) == word_count(fr->body));
    CHECK(decode_to_pivot(de->body, "de") == decode_to_pivot(fr->body, "fr"));
    CHECK(decode_to_pivot(*de->summary, "de") == decode_to_pivot(*fr->summary, "fr"));
    CHECK(de->topics == fr->topics);
    CHECK(de->topics->size() == 1);
    CHECK(de->body != fr->body);
  }
  CHECK_THROWS_AS(synth_corpus(1, 4, langs, 0), ConfigError);
  CHECK_THROWS_AS(synth_corpus(3, 4, {}, 0), ConfigError);
}

TEST_CASE("documents of one story share its keyword set") {
  SynthOptions o;
  o.keyword_rate = 1.0;
  o.topic_rate = 0.0;
  o.stories_per_topic = 4;
  const auto a = synth_corpus(3, 12, {"de"}, 1, o);
  const auto b = synth_corpus(3, 12, {"de"}, 2, o);
  auto words = [](const Article& x) {
    std::set<std::string> w;
    std::istringstream in(x.title + " " + *x.lead + " " + x.body + " " + *x.summary);
    for (std::string t; in >> t;) w.insert(t);
    return w;
  };
  const std::size_t keys = o.content_keywords + o.name_keywords;
  for (std::size_t k = 0; k < 4; ++k) {
    std::set<std::string> story;
    for (std::size_t doc : {k, k + 4, k + 8}) {
      for (const auto& w : words(a[doc])) story.insert(w);
      for (const auto& w : words(b[doc])) story.insert(w);
    }
    CHECK(story.size() <= keys);
  }
  CHECK(words(a[0]) != words(a[1]));

  o.stories_per_topic = 0;
  const auto fresh = synth_corpus(3, 12, {"de"}, 1, o);
  std::set<std::string> pooled;
  for (std::size_t doc : {0, 4, 8}) {
    for (const auto& w : words(fresh[doc])) pooled.insert(w);
  }
  CHECK(pooled.size() > keys);
}

TEST_CASE("word rendering is invertible") {
  for (const std::string w : {"bada", "kelimo", "Rusa"}) {
    for (const std::string l : {"de", "rm"}) CHECK(decode_to_pivot(render_word(w, l), l) == w);
  }
  CHECK(render_word("Rusa", "fr") == "Rusa");
  CHECK(render_word("bada", "fr") == "badaxfr");
}
