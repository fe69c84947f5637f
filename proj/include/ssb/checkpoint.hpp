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
#include <string>
#include <vector>

#include "ssb/encoder.hpp"
#include "ssb/tokenizer.hpp"

namespace ssb {

inline constexpr const char* kCheckpointFormat = "ssb-ckpt/1";

struct TensorEntry {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;
  std::uint64_t bytes = 0;
};

struct CheckpointMeta {
  std::size_t max_len = 64;
  // Seeds of every run that produced this checkpoint, oldest first.
  std::vector<std::uint64_t> seed_history;
  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  EncoderModel<float> model;
  Vocab vocab;
  CheckpointMeta meta;
};

// A checkpoint is a directory holding manifest.json, weights.bin and vocab.txt.
void save_checkpoint(const std::filesystem::path& dir, const EncoderModel<float>& model, const Vocab& vocab,
                     const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Parsed manifest tensor directory, validated against the blob size.
std::vector<TensorEntry> read_tensor_directory(const std::filesystem::path& dir);

}  // namespace ssb
