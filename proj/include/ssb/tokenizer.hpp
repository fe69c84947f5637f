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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ssb {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr std::size_t kReservedTokens = 4;

// Lowercases ASCII, drops ASCII punctuation and splits on whitespace.
std::vector<std::string> split_words(std::string_view text);

// Word-level vocabulary. Ids 0..3 are PAD, UNK, CLS, SEP; stored words take
// the dense range [4, size()).
class Vocab {
 public:
  Vocab();

  // Words ranked by descending frequency, ties broken lexicographically; the
  // top max_vocab - 4 are kept.
  static Vocab build(std::span<const std::string> corpus, std::size_t max_vocab);
  static Vocab from_words(std::vector<std::string> words);

  // One word per line; line n (0-based) holds id n + 4.
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return words_.size() + kReservedTokens; }
  TokenId id(std::string_view word) const;  // UNK when absent
  const std::string& word(TokenId id) const;
  const std::vector<std::string>& words() const noexcept { return words_; }

  bool operator==(const Vocab& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

// CLS + word ids (UNK for unknown words) + SEP.
std::vector<TokenId> tokenize(std::string_view text, const Vocab& vocab);

struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> attention_mask;

  std::size_t length() const noexcept { return ids.size(); }
  std::size_t real_tokens() const;
  bool operator==(const TokenSequence&) const = default;
};

// Longer inputs keep the first max_len - 1 ids and end in SEP; shorter ones
// are padded with PAD under mask 0.
TokenSequence pad_truncate(std::span<const TokenId> ids, std::size_t max_len);

// Same-length sequences packed row-major for the encoder.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;
};

TokenBatch make_batch(std::span<const TokenSequence> sequences);

// Drops trailing columns that are padding in every row. Encoder outputs at
// real positions are unchanged.
TokenBatch trim_padding(const TokenBatch& batch);

}  // namespace ssb
