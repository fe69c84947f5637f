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

#include "json.hpp"
#include "ssb/encoder.hpp"
#include "ssb/trainer.hpp"

namespace ssb {

struct RunConfig {
  EncoderConfig encoder;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::size_t max_len = 64;
  std::size_t max_vocab = 8000;
  std::string pivot_language = "de";
  double test_fraction = 0.2;
  bool paper_mode = false;

  std::vector<std::string> train_corpus;
  std::vector<std::string> eval_corpus;
  std::string vocab;
  std::string checkpoint;
  std::string output;

  // Desk defaults with the paper preset applied: lr 1e-5, batch 512,
  // temperature 0.05, one epoch, max_len 512.
  static RunConfig paper();

  // vocab_size is not checked here; it comes from the vocabulary.
  std::vector<std::string> problems() const;
  void validate() const;
};

// Applies a flat JSON object of overrides. Unknown keys and type mismatches
// are appended to errors; valid keys are still applied.
void apply_config_json(RunConfig& config, const nlohmann::json& object, std::vector<std::string>& errors);
// Inverse of apply_config_json: every key, applicable to a default config.
nlohmann::ordered_json run_config_to_json(const RunConfig& config);
nlohmann::json read_config_file(const std::filesystem::path& path);

nlohmann::ordered_json encoder_config_to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& object);

// Every key accepted by apply_config_json.
const std::vector<std::string>& config_keys();

}  // namespace ssb
