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

#include "ssb/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "json.hpp"
#include "ssb/config.hpp"
#include "ssb/error.hpp"

namespace ssb {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kWeights = "weights.bin";
constexpr const char* kVocab = "vocab.txt";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void append_le(std::string& out, float value) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float read_le(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

std::string vocab_text(const Vocab& vocab) {
  std::string s;
  for (const std::string& w : vocab.words()) s += w + "\n";
  return s;
}

json parse_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifest;
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError("checkpoint manifest " + path.string() + ": " + e.what());
  }
}

std::vector<TensorEntry> tensor_directory(const json& manifest, std::uint64_t blob_size) {
  if (!manifest.contains("tensors") || !manifest["tensors"].is_array()) {
    throw ParseError("checkpoint manifest lacks a tensor directory");
  }
  std::vector<TensorEntry> entries;
  std::uint64_t cursor = 0;
  for (const json& t : manifest["tensors"]) {
    TensorEntry e;
    try {
      e.name = t.at("name").get<std::string>();
      e.shape = t.at("shape").get<Shape>();
      e.offset = t.at("offset").get<std::uint64_t>();
      e.bytes = t.at("bytes").get<std::uint64_t>();
    } catch (const json::exception& ex) {
      throw ParseError(std::string("malformed tensor entry: ") + ex.what());
    }
    if (e.bytes != shape_numel(e.shape) * sizeof(float)) {
      throw ParseError("tensor " + e.name + ": " + std::to_string(e.bytes) + " bytes for shape " +
                       shape_string(e.shape));
    }
    if (e.offset < cursor) throw ParseError("tensor " + e.name + " overlaps or is out of order");
    cursor = e.offset + e.bytes;
    if (cursor > blob_size) throw ParseError("tensor " + e.name + " extends past the end of the blob");
    entries.push_back(std::move(e));
  }
  if (cursor != blob_size) throw ParseError("weights blob has trailing bytes");
  return entries;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const EncoderModel<float>& model, const Vocab& vocab,
                     const CheckpointMeta& meta) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  if (vocab.size() != model.config().vocab_size) {
    throw ContractError("vocabulary size " + std::to_string(vocab.size()) + " does not match the model's " +
                        std::to_string(model.config().vocab_size));
  }

  std::string blob;
  ordered_json tensors = ordered_json::array();
  for (const Parameter<float>& p : model.parameters()) {
    const std::uint64_t offset = blob.size();
    for (float v : p.value.data()) append_le(blob, v);
    tensors.push_back({{"name", p.name},
                       {"shape", p.value.shape()},
                       {"offset", offset},
                       {"bytes", blob.size() - offset}});
  }
  const std::string vtext = vocab_text(vocab);

  ordered_json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["config"] = encoder_config_to_json(model.config());
  manifest["max_len"] = meta.max_len;
  manifest["vocab"] = {{"file", kVocab}, {"size", vocab.size()}, {"fnv1a64", fnv1a64(vtext)}};
  manifest["weights"] = {{"file", kWeights}, {"bytes", blob.size()}, {"fnv1a64", fnv1a64(blob)}};
  manifest["seed_history"] = meta.seed_history;
  manifest["tensors"] = tensors;

  write_file(dir / kWeights, blob);
  write_file(dir / kVocab, vtext);
  write_file(dir / kManifest, manifest.dump(2) + "\n");
}

std::vector<TensorEntry> read_tensor_directory(const fs::path& dir) {
  const json manifest = parse_manifest(dir);
  return tensor_directory(manifest, fs::file_size(dir / kWeights));
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("checkpoint directory " + dir.string() + " does not exist");
  const json manifest = parse_manifest(dir);
  if (manifest.value("format", std::string()) != kCheckpointFormat) {
    throw ParseError("unsupported checkpoint format '" + manifest.value("format", std::string()) + "'");
  }
  if (!manifest.contains("config")) throw ParseError("checkpoint manifest lacks a config");
  EncoderConfig config = encoder_config_from_json(manifest["config"]);
  if (const auto issues = config.problems(); !issues.empty()) {
    std::string message = "checkpoint config is invalid:";
    for (const auto& p : issues) message += "\n  - " + p;
    throw ParseError(message);
  }

  CheckpointMeta meta;
  try {
    meta.max_len = manifest.at("max_len").get<std::size_t>();
    meta.seed_history = manifest.at("seed_history").get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }

  const std::string vtext = read_file(dir / kVocab);
  const std::string blob = read_file(dir / kWeights);
  try {
    if (manifest.at("vocab").at("fnv1a64").get<std::string>() != fnv1a64(vtext)) {
      throw ParseError("vocabulary file does not match the checkpoint manifest");
    }
    if (manifest.at("weights").at("fnv1a64").get<std::string>() != fnv1a64(blob)) {
      throw ParseError("weights blob does not match the checkpoint manifest");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }
  Vocab vocab = Vocab::load(dir / kVocab);
  if (vocab.size() != config.vocab_size) {
    throw ParseError("vocabulary has " + std::to_string(vocab.size()) + " ids, config says " +
                     std::to_string(config.vocab_size));
  }

  const std::vector<TensorEntry> entries = tensor_directory(manifest, blob.size());
  EncoderModel<float> model = EncoderModel<float>::init(config, 0);
  auto& params = model.parameters();
  if (entries.size() != params.size()) {
    throw ParseError("checkpoint has " + std::to_string(entries.size()) + " tensors, model expects " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const TensorEntry& e = entries[i];
    Parameter<float>& p = params[i];
    if (e.name != p.name || e.shape != p.value.shape()) {
      throw ParseError("tensor " + std::to_string(i) + " is " + e.name + " " + shape_string(e.shape) +
                       ", expected " + p.name + " " + shape_string(p.value.shape()));
    }
    auto data = p.value.mutable_data();
    for (std::size_t k = 0; k < data.size(); ++k) data[k] = read_le(blob.data() + e.offset + 4 * k);
  }
  return Checkpoint{std::move(model), std::move(vocab), std::move(meta)};
}

}  // namespace ssb
