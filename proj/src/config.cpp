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

#include "ssb/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "ssb/error.hpp"

namespace ssb {

using nlohmann::json;

RunConfig RunConfig::paper() {
  RunConfig c;
  c.paper_mode = true;
  c.train = TrainConfig::paper();
  c.max_len = 512;
  c.encoder.max_positions = 512;
  return c;
}

std::vector<std::string> RunConfig::problems() const {
  std::vector<std::string> out;
  EncoderConfig e = encoder;
  if (e.vocab_size == 0) e.vocab_size = kReservedTokens + 1;
  out = e.problems();
  for (auto& p : train.problems()) out.push_back(std::move(p));
  if (max_len < 2) out.push_back("max_len must be at least 2");
  if (max_len > encoder.max_positions) out.push_back("max_len must not exceed max_positions");
  if (max_vocab < kReservedTokens) out.push_back("max_vocab must be at least 4");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) out.push_back("test_fraction must lie in (0, 1)");
  if (!pivot_language.empty() && !encoder.language_index(pivot_language)) {
    out.push_back("pivot_language '" + pivot_language + "' is not among the model languages");
  }
  return out;
}

void RunConfig::validate() const {
  const auto issues = problems();
  if (issues.empty()) return;
  std::string message = "invalid configuration:";
  for (const auto& p : issues) message += "\n  - " + p;
  throw ConfigError(message);
}

namespace {

using Setter = std::function<void(RunConfig&, const json&)>;

struct TypeMismatch {
  const char* expected;
};

std::size_t as_size(const json& v) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw TypeMismatch{"a nonnegative integer"};
  }
  return v.get<std::size_t>();
}

double as_double(const json& v) {
  if (!v.is_number()) throw TypeMismatch{"a number"};
  return v.get<double>();
}

bool as_bool(const json& v) {
  if (!v.is_boolean()) throw TypeMismatch{"a boolean"};
  return v.get<bool>();
}

std::string as_string(const json& v) {
  if (!v.is_string()) throw TypeMismatch{"a string"};
  return v.get<std::string>();
}

std::vector<std::string> as_strings(const json& v) {
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw TypeMismatch{"a list of strings"};
  std::vector<std::string> out;
  for (const json& e : v) {
    if (!e.is_string()) throw TypeMismatch{"a list of strings"};
    out.push_back(e.get<std::string>());
  }
  return out;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"hidden", [](RunConfig& c, const json& v) { c.encoder.hidden = as_size(v); }},
      {"layers", [](RunConfig& c, const json& v) { c.encoder.layers = as_size(v); }},
      {"heads", [](RunConfig& c, const json& v) { c.encoder.heads = as_size(v); }},
      {"ffn", [](RunConfig& c, const json& v) { c.encoder.ffn = as_size(v); }},
      {"adapter", [](RunConfig& c, const json& v) { c.encoder.adapter = as_size(v); }},
      {"languages", [](RunConfig& c, const json& v) { c.encoder.languages = as_strings(v); }},
      {"max_positions", [](RunConfig& c, const json& v) { c.encoder.max_positions = as_size(v); }},
      {"dropout", [](RunConfig& c, const json& v) { c.encoder.dropout = as_double(v); }},
      {"layer_norm_eps", [](RunConfig& c, const json& v) { c.encoder.layer_norm_eps = as_double(v); }},
      {"pooling", [](RunConfig& c, const json& v) { c.encoder.pooling = parse_pooling(as_string(v)); }},
      {"temperature", [](RunConfig& c, const json& v) { c.train.temperature = as_double(v); }},
      {"learning_rate", [](RunConfig& c, const json& v) { c.train.learning_rate = as_double(v); }},
      {"batch_size", [](RunConfig& c, const json& v) { c.train.batch_size = as_size(v); }},
      {"epochs", [](RunConfig& c, const json& v) { c.train.epochs = as_size(v); }},
      {"max_steps", [](RunConfig& c, const json& v) { c.train.max_steps = as_size(v); }},
      {"beta1", [](RunConfig& c, const json& v) { c.train.beta1 = as_double(v); }},
      {"beta2", [](RunConfig& c, const json& v) { c.train.beta2 = as_double(v); }},
      {"eps", [](RunConfig& c, const json& v) { c.train.eps = as_double(v); }},
      {"weight_decay", [](RunConfig& c, const json& v) { c.train.weight_decay = as_double(v); }},
      {"freeze_adapters", [](RunConfig& c, const json& v) { c.train.freeze_adapters = as_bool(v); }},
      {"seed", [](RunConfig& c, const json& v) { c.seed = as_size(v); }},
      {"max_len", [](RunConfig& c, const json& v) { c.max_len = as_size(v); }},
      {"max_vocab", [](RunConfig& c, const json& v) { c.max_vocab = as_size(v); }},
      {"pivot_language", [](RunConfig& c, const json& v) { c.pivot_language = as_string(v); }},
      {"test_fraction", [](RunConfig& c, const json& v) { c.test_fraction = as_double(v); }},
      {"paper_mode", [](RunConfig& c, const json& v) { c.paper_mode = as_bool(v); }},
      {"train_corpus", [](RunConfig& c, const json& v) { c.train_corpus = as_strings(v); }},
      {"eval_corpus", [](RunConfig& c, const json& v) { c.eval_corpus = as_strings(v); }},
      {"vocab", [](RunConfig& c, const json& v) { c.vocab = as_string(v); }},
      {"checkpoint", [](RunConfig& c, const json& v) { c.checkpoint = as_string(v); }},
      {"output", [](RunConfig& c, const json& v) { c.output = as_string(v); }},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, setter] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_config_json(RunConfig& config, const json& object, std::vector<std::string>& errors) {
  if (!object.is_object()) {
    errors.push_back("configuration must be a JSON object");
    return;
  }
  const auto& table = setters();
  for (const auto& [key, value] : object.items()) {
    const auto it = table.find(key);
    if (it == table.end()) {
      errors.push_back("unknown configuration key '" + key + "'");
      continue;
    }
    try {
      it->second(config, value);
    } catch (const TypeMismatch& t) {
      errors.push_back("'" + key + "' must be " + t.expected);
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  }
}

nlohmann::ordered_json run_config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["hidden"] = c.encoder.hidden;
  j["layers"] = c.encoder.layers;
  j["heads"] = c.encoder.heads;
  j["ffn"] = c.encoder.ffn;
  j["adapter"] = c.encoder.adapter;
  j["languages"] = c.encoder.languages;
  j["max_positions"] = c.encoder.max_positions;
  j["dropout"] = c.encoder.dropout;
  j["layer_norm_eps"] = c.encoder.layer_norm_eps;
  j["pooling"] = std::string(pooling_name(c.encoder.pooling));
  j["temperature"] = c.train.temperature;
  j["learning_rate"] = c.train.learning_rate;
  j["batch_size"] = c.train.batch_size;
  j["epochs"] = c.train.epochs;
  j["max_steps"] = c.train.max_steps;
  j["beta1"] = c.train.beta1;
  j["beta2"] = c.train.beta2;
  j["eps"] = c.train.eps;
  j["weight_decay"] = c.train.weight_decay;
  j["freeze_adapters"] = c.train.freeze_adapters;
  j["seed"] = c.seed;
  j["max_len"] = c.max_len;
  j["max_vocab"] = c.max_vocab;
  j["pivot_language"] = c.pivot_language;
  j["test_fraction"] = c.test_fraction;
  j["paper_mode"] = c.paper_mode;
  j["train_corpus"] = c.train_corpus;
  j["eval_corpus"] = c.eval_corpus;
  j["vocab"] = c.vocab;
  j["checkpoint"] = c.checkpoint;
  j["output"] = c.output;
  return j;
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config file " + path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json encoder_config_to_json(const EncoderConfig& c) {
  nlohmann::ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["hidden"] = c.hidden;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["ffn"] = c.ffn;
  j["adapter"] = c.adapter;
  j["languages"] = c.languages;
  j["max_positions"] = c.max_positions;
  j["dropout"] = c.dropout;
  j["layer_norm_eps"] = c.layer_norm_eps;
  j["pooling"] = std::string(pooling_name(c.pooling));
  return j;
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c;
  std::vector<std::string> errors;
  auto field = [&](const char* key, auto&& apply) {
    if (!j.contains(key)) {
      errors.push_back(std::string("missing encoder field '") + key + "'");
      return;
    }
    try {
      apply(j.at(key));
    } catch (const TypeMismatch& t) {
      errors.push_back(std::string("encoder field '") + key + "' must be " + t.expected);
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  };
  if (!j.is_object()) throw ParseError("encoder config must be a JSON object");
  field("vocab_size", [&](const json& v) { c.vocab_size = as_size(v); });
  field("hidden", [&](const json& v) { c.hidden = as_size(v); });
  field("layers", [&](const json& v) { c.layers = as_size(v); });
  field("heads", [&](const json& v) { c.heads = as_size(v); });
  field("ffn", [&](const json& v) { c.ffn = as_size(v); });
  field("adapter", [&](const json& v) { c.adapter = as_size(v); });
  field("languages", [&](const json& v) { c.languages = as_strings(v); });
  field("max_positions", [&](const json& v) { c.max_positions = as_size(v); });
  field("dropout", [&](const json& v) { c.dropout = as_double(v); });
  field("layer_norm_eps", [&](const json& v) { c.layer_norm_eps = as_double(v); });
  field("pooling", [&](const json& v) { c.pooling = parse_pooling(as_string(v)); });
  if (!errors.empty()) {
    std::string message = "invalid encoder config:";
    for (const auto& e : errors) message += "\n  - " + e;
    throw ParseError(message);
  }
  return c;
}

}  // namespace ssb
