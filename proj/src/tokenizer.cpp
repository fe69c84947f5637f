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

#include "ssb/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "ssb/error.hpp"

namespace ssb {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else if (u < 0x80 && std::ispunct(u)) {
      continue;
    } else {
      current.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Vocab::Vocab() = default;

Vocab Vocab::from_words(std::vector<std::string> words) {
  Vocab v;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto id = static_cast<TokenId>(i + kReservedTokens);
    if (words[i].empty()) throw ParseError("vocabulary entry " + std::to_string(i) + " is empty");
    if (!v.index_.emplace(words[i], id).second) {
      throw ParseError("duplicate vocabulary entry '" + words[i] + "'");
    }
  }
  v.words_ = std::move(words);
  return v;
}

Vocab Vocab::build(std::span<const std::string> corpus, std::size_t max_vocab) {
  if (max_vocab < kReservedTokens) {
    throw ConfigError("max_vocab must be at least " + std::to_string(kReservedTokens));
  }
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const std::string& text : corpus) {
    for (std::string& w : split_words(text)) {
      ++counts[std::move(w)];
      ++total;
    }
  }
  if (total == 0) throw DegenerateInputError("cannot build a vocabulary from an empty corpus");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_vocab - kReservedTokens);
  std::vector<std::string> words;
  words.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) words.push_back(ranked[i].first);
  return from_words(std::move(words));
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    words.push_back(line);
  }
  return from_words(std::move(words));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  for (const std::string& w : words_) out << w << '\n';
  if (!out) throw IoError("failed writing vocabulary " + path.string());
}

TokenId Vocab::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::word(TokenId id) const {
  static const std::string reserved[kReservedTokens] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  if (id < 0 || static_cast<std::size_t>(id) >= size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary");
  }
  if (static_cast<std::size_t>(id) < kReservedTokens) return reserved[id];
  return words_[static_cast<std::size_t>(id) - kReservedTokens];
}

std::vector<TokenId> tokenize(std::string_view text, const Vocab& vocab) {
  std::vector<TokenId> ids{kClsId};
  for (const std::string& w : split_words(text)) ids.push_back(vocab.id(w));
  ids.push_back(kSepId);
  return ids;
}

std::size_t TokenSequence::real_tokens() const {
  return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), 1));
}

TokenSequence pad_truncate(std::span<const TokenId> ids, std::size_t max_len) {
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  TokenSequence seq;
  if (ids.size() > max_len) {
    seq.ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(max_len - 1));
    seq.ids.push_back(kSepId);
    seq.attention_mask.assign(max_len, 1);
    return seq;
  }
  seq.ids.assign(ids.begin(), ids.end());
  seq.attention_mask.assign(ids.size(), 1);
  seq.ids.resize(max_len, kPadId);
  seq.attention_mask.resize(max_len, 0);
  return seq;
}

TokenBatch make_batch(std::span<const TokenSequence> sequences) {
  if (sequences.empty()) throw DegenerateInputError("empty token batch");
  TokenBatch batch;
  batch.batch = sequences.size();
  batch.length = sequences.front().length();
  batch.ids.reserve(batch.batch * batch.length);
  batch.mask.reserve(batch.batch * batch.length);
  for (const TokenSequence& s : sequences) {
    if (s.length() != batch.length || s.attention_mask.size() != batch.length) {
      throw DimensionError("token batch mixes sequence lengths " + std::to_string(batch.length) +
                           " and " + std::to_string(s.length()));
    }
    batch.ids.insert(batch.ids.end(), s.ids.begin(), s.ids.end());
    batch.mask.insert(batch.mask.end(), s.attention_mask.begin(), s.attention_mask.end());
  }
  return batch;
}

TokenBatch trim_padding(const TokenBatch& batch) {
  std::size_t keep = 1;
  for (std::size_t r = 0; r < batch.batch; ++r) {
    for (std::size_t t = batch.length; t > keep; --t) {
      if (batch.mask[r * batch.length + t - 1]) {
        keep = t;
        break;
      }
    }
  }
  if (keep >= batch.length) return batch;
  TokenBatch out;
  out.batch = batch.batch;
  out.length = keep;
  for (std::size_t r = 0; r < batch.batch; ++r) {
    const auto from = static_cast<std::ptrdiff_t>(r * batch.length);
    out.ids.insert(out.ids.end(), batch.ids.begin() + from, batch.ids.begin() + from + static_cast<std::ptrdiff_t>(keep));
    out.mask.insert(out.mask.end(), batch.mask.begin() + from,
                    batch.mask.begin() + from + static_cast<std::ptrdiff_t>(keep));
  }
  return out;
}

}  // namespace ssb
