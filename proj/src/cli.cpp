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

#include "ssb/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ssb/checkpoint.hpp"
#include "ssb/config.hpp"
#include "ssb/corpus.hpp"
#include "ssb/error.hpp"
#include "ssb/eval.hpp"
#include "ssb/tokenizer.hpp"
#include "ssb/trainer.hpp"

namespace ssb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
  std::vector<std::string> corpus;
  std::vector<std::string> languages;
  bool paper_mode = false;
  std::string output;
  // Overrides collected from subcommand-specific options, keyed like the config file.
  json overrides = json::object();
};

void add_shared(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON configuration file");
  cmd->add_option("--seed", f.seed, "Seed for every random choice");
  cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint directory");
  cmd->add_option("--corpus", f.corpus, "JSONL files or directories of them")->delimiter(',');
  cmd->add_option("--languages", f.languages, "Comma-separated language codes")->delimiter(',');
  cmd->add_flag("--paper-mode", f.paper_mode, "Use the full-scale training preset");
}

template <typename V>
void add_override(CLI::App* cmd, Flags& f, const std::string& flag, const std::string& key,
                  const std::string& help) {
  cmd->add_option_function<V>(
      flag, [&f, key](const V& v) { f.overrides[key] = v; }, help);
}

void add_training_overrides(CLI::App* cmd, Flags& f) {
  add_override<std::size_t>(cmd, f, "--epochs", "epochs", "Passes over the corpus");
  add_override<std::size_t>(cmd, f, "--max-steps", "max_steps", "Stop after this many steps");
  add_override<double>(cmd, f, "--lr,--learning-rate", "learning_rate", "AdamW learning rate");
  add_override<std::size_t>(cmd, f, "--batch-size", "batch_size", "Pairs per batch");
  add_override<double>(cmd, f, "--temperature", "temperature", "Softmax temperature");
  add_override<double>(cmd, f, "--weight-decay", "weight_decay", "Decoupled weight decay");
  add_override<double>(cmd, f, "--dropout", "dropout", "Dropout probability");
  add_override<std::size_t>(cmd, f, "--hidden", "hidden", "Hidden size");
  add_override<std::size_t>(cmd, f, "--layers", "layers", "Transformer layers");
  add_override<std::size_t>(cmd, f, "--heads", "heads", "Attention heads");
  add_override<std::size_t>(cmd, f, "--ffn", "ffn", "Feed-forward size");
  add_override<std::size_t>(cmd, f, "--adapter", "adapter", "Adapter bottleneck size");
  add_override<std::size_t>(cmd, f, "--max-len", "max_len", "Tokens per sequence");
  add_override<std::size_t>(cmd, f, "--max-positions", "max_positions", "Position table size");
  add_override<std::size_t>(cmd, f, "--max-vocab", "max_vocab", "Vocabulary size cap");
  add_override<std::string>(cmd, f, "--pooling", "pooling", "mean, cls or max");
  add_override<bool>(cmd, f, "--freeze-adapters", "freeze_adapters", "Keep adapters fixed (true/false)");
}

RunConfig resolve_config(const Flags& f) {
  json file = json::object();
  if (!f.config.empty()) file = read_config_file(f.config);
  const bool paper = f.paper_mode || (file.is_object() && file.value("paper_mode", false) == true);
  RunConfig config = paper ? RunConfig::paper() : RunConfig{};

  json cli = f.overrides;
  if (f.seed) cli["seed"] = *f.seed;
  if (!f.languages.empty()) cli["languages"] = f.languages;
  if (f.paper_mode) cli["paper_mode"] = true;

  std::vector<std::string> errors;
  apply_config_json(config, file, errors);
  apply_config_json(config, cli, errors);
  for (auto& p : config.problems()) errors.push_back(std::move(p));
  if (!errors.empty()) {
    std::string message = "invalid configuration:";
    for (const auto& e : errors) message += "\n  - " + e;
    throw ConfigError(message);
  }
  config.train.seed = config.seed;
  return config;
}

std::vector<fs::path> expand_corpus(const std::vector<std::string>& entries) {
  std::vector<fs::path> files;
  for (const std::string& entry : entries) {
    const fs::path p(entry);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      files.push_back(p);
    } else {
      throw IoError("corpus path " + entry + " does not exist");
    }
  }
  if (files.empty()) throw IoError("no corpus files given (--corpus)");
  return files;
}

std::vector<Article> read_corpus(const std::vector<std::string>& entries, const std::set<std::string>& languages,
                                 std::ostream& err) {
  std::vector<Article> articles;
  for (const fs::path& file : expand_corpus(entries)) {
    LoadResult r = load_articles(file, languages);
    for (const RecordError& e : r.errors) {
      err << "warning[parse]: " << file.string() << ":" << e.line << ": " << e.message << "\n";
    }
    std::move(r.articles.begin(), r.articles.end(), std::back_inserter(articles));
  }
  if (articles.empty()) throw DegenerateInputError("corpus contains no usable articles");
  return articles;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

struct SynthFlags {
  std::string out = "data";
  std::size_t topics = 5;
  std::size_t train_docs = 40;
  std::size_t eval_docs = 10;
};

int cmd_synth(const Flags& f, const SynthFlags& s, std::ostream& out) {
  const RunConfig config = resolve_config(f);
  const auto& languages = config.encoder.languages;
  SynthOptions train_opts;
  SynthOptions eval_opts;
  eval_opts.id_prefix = "eval";
  const auto train = synth_corpus(s.topics, s.train_docs, languages, config.seed, train_opts);
  const auto eval = synth_corpus(s.topics, s.eval_docs, languages, config.seed + 1, eval_opts);
  const fs::path root(s.out);
  for (const auto& [name, docs] : {std::pair{"train", &train}, std::pair{"eval", &eval}}) {
    std::error_code ec;
    fs::create_directories(root / name, ec);
    if (ec) throw IoError("cannot create " + (root / name).string() + ": " + ec.message());
    for (const std::string& lang : languages) {
      std::vector<Article> subset;
      for (const Article& a : *docs) {
        if (a.language == lang) subset.push_back(a);
      }
      write_articles(subset, root / name / (lang + ".jsonl"));
    }
  }
  const std::string stats = "Training corpus\n" + compute_stats(train).render() + "\nEvaluation corpus\n" +
                            compute_stats(eval).render();
  write_text(root / "stats.txt", stats);
  out << stats;
  return 0;
}

struct TrainFlags {
  std::string vocab;
  std::string init;
  std::vector<std::string> exclude;
  std::string loss_csv;
  std::size_t log_every = 0;
};

std::vector<TokenizedPair> tokenize_pairs(std::span<const TrainPair> pairs, const Vocab& vocab, std::size_t max_len) {
  std::vector<TokenizedPair> out;
  out.reserve(pairs.size());
  for (const TrainPair& p : pairs) {
    out.push_back({pad_truncate(tokenize(p.anchor_text, vocab), max_len),
                   pad_truncate(tokenize(p.positive_text, vocab), max_len), p.language});
  }
  return out;
}

int cmd_train(const Flags& f, const TrainFlags& t, std::ostream& out, std::ostream& err) {
  RunConfig config = resolve_config(f);
  if (f.checkpoint.empty()) throw ConfigError("train needs --checkpoint for the output directory");
  std::vector<std::string> corpus = f.corpus.empty() ? config.train_corpus : f.corpus;

  std::optional<Checkpoint> init;
  if (!t.init.empty()) {
    init.emplace(load_checkpoint(t.init));
    config.encoder = init->model.config();
  }
  const std::set<std::string> languages(config.encoder.languages.begin(), config.encoder.languages.end());
  std::vector<Article> articles = read_corpus(corpus, languages, err);

  if (!t.exclude.empty()) {
    std::set<std::string> ids;
    for (const Article& a : read_corpus(t.exclude, {}, err)) ids.insert(a.id);
    OverlapResult r = remove_overlap(articles, ids);
    out << "removed " << r.removed << " articles present in the exclusion corpus\n";
    articles = std::move(r.articles);
  }
  const PairResult pairs = make_pairs(articles);
  if (pairs.skipped > 0) err << "warning[data]: skipped " << pairs.skipped << " articles with an empty title\n";

  Vocab vocab;
  const std::string vocab_path = t.vocab.empty() ? config.vocab : t.vocab;
  if (init) {
    vocab = init->vocab;
  } else if (!vocab_path.empty() && fs::exists(vocab_path)) {
    vocab = Vocab::load(vocab_path);
  } else {
    std::vector<std::string> texts;
    for (const TrainPair& p : pairs.pairs) {
      texts.push_back(p.anchor_text);
      texts.push_back(p.positive_text);
    }
    vocab = Vocab::build(texts, config.max_vocab);
    if (!vocab_path.empty()) vocab.save(vocab_path);
  }
  config.encoder.vocab_size = vocab.size();

  EncoderModel<float> model =
      init ? std::move(init->model) : EncoderModel<float>::init(config.encoder, config.seed);
  CheckpointMeta meta;
  meta.max_len = config.max_len;
  if (init) meta.seed_history = init->meta.seed_history;
  meta.seed_history.push_back(config.seed);

  const std::vector<TokenizedPair> data = tokenize_pairs(pairs.pairs, vocab, config.max_len);
  const TrainResult result = train(model, data, config.train, [&](const LossRecord& r) {
    if (t.log_every > 0 && r.step % t.log_every == 0) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "step %zu %s loss %.6f\n", r.step, r.language.c_str(), r.loss);
      out << buf;
    }
  });

  save_checkpoint(f.checkpoint, model, vocab, meta);
  const fs::path csv = t.loss_csv.empty() ? fs::path(f.checkpoint) / "loss.csv" : fs::path(t.loss_csv);
  write_loss_history(result.history, csv);
  out << "trained " << result.steps << " steps on " << data.size() << " pairs";
  if (!result.history.empty()) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "; loss %.6f -> %.6f", result.history.front().loss, result.history.back().loss);
    out << buf;
  }
  out << "\ncheckpoint written to " << f.checkpoint << "\n";
  return 0;
}

Checkpoint open_checkpoint(const Flags& f, const RunConfig& config) {
  const std::string path = f.checkpoint.empty() ? config.checkpoint : f.checkpoint;
  if (path.empty()) throw ConfigError("--checkpoint is required");
  return load_checkpoint(path);
}

std::vector<std::string> eval_languages(const Flags& f, const EncoderConfig& model) {
  if (f.languages.empty()) return model.languages;
  for (const std::string& l : f.languages) {
    if (!model.language_index(l)) throw RoutingError("checkpoint has no adapter for language '" + l + "'");
  }
  return f.languages;
}

int cmd_embed(const Flags& f, std::ostream& out, std::ostream& err) {
  Flags relaxed = f;
  relaxed.languages.clear();
  const RunConfig config = resolve_config(relaxed);
  const Checkpoint ckpt = open_checkpoint(f, config);
  const auto languages = eval_languages(f, ckpt.model.config());
  const std::vector<Article> articles =
      read_corpus(f.corpus.empty() ? config.eval_corpus : f.corpus, {languages.begin(), languages.end()}, err);
  std::vector<DocumentText> docs;
  for (const Article& a : articles) docs.push_back({a.id, a.language, a.body});
  const EmbeddingMatrix m = make_encoder_embedder(ckpt.model, ckpt.vocab, ckpt.meta.max_len)(docs);

  std::string text;
  char buf[32];
  for (std::size_t i = 0; i < docs.size(); ++i) {
    text += docs[i].id + " " + docs[i].language;
    for (double v : m.row(i)) {
      std::snprintf(buf, sizeof buf, " %.9g", v);
      text += buf;
    }
    text += "\n";
  }
  if (f.output.empty()) {
    out << text;
  } else {
    write_text(f.output, text);
    out << "wrote " << docs.size() << " embeddings to " << f.output << "\n";
  }
  return 0;
}

int cmd_eval(const Flags& f, bool retrieval, bool classification, std::ostream& out, std::ostream& err) {
  Flags relaxed = f;
  relaxed.languages.clear();
  const RunConfig config = resolve_config(relaxed);
  const Checkpoint ckpt = open_checkpoint(f, config);
  const auto languages = eval_languages(f, ckpt.model.config());
  const std::vector<Article> articles =
      read_corpus(f.corpus.empty() ? config.eval_corpus : f.corpus, {languages.begin(), languages.end()}, err);

  EvalOptions options;
  options.split_seed = config.seed;
  options.test_fraction = config.test_fraction;
  options.languages = languages;
  options.pivot_language =
      std::find(languages.begin(), languages.end(), config.pivot_language) != languages.end()
          ? config.pivot_language
          : languages.front();
  options.retrieval = retrieval;
  options.classification = classification;
  const EvalReport report =
      run_eval_suite(make_encoder_embedder(ckpt.model, ckpt.vocab, ckpt.meta.max_len), articles, options);

  const std::string output = f.output.empty() ? config.output : f.output;
  if (!output.empty()) {
    write_text(output, report.to_json());
    fs::path table(output);
    table.replace_extension(".txt");
    write_text(table, report.render_table());
  }
  out << report.render_table();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive sentence encoder with language adapters", "ssb"};
  app.require_subcommand(1);

  Flags flags;
  SynthFlags synth;
  TrainFlags train_flags;

  CLI::App* synth_cmd = app.add_subcommand("synth-data", "Write a synthetic parallel corpus");
  add_shared(synth_cmd, flags);
  synth_cmd->add_option("--out", synth.out, "Output directory")->capture_default_str();
  synth_cmd->add_option("--topics", synth.topics, "Number of topics")->capture_default_str();
  synth_cmd->add_option("--train-docs", synth.train_docs, "Training documents per topic")->capture_default_str();
  synth_cmd->add_option("--eval-docs", synth.eval_docs, "Evaluation documents per topic")->capture_default_str();

  CLI::App* train_cmd = app.add_subcommand("train", "Fine-tune an encoder on (title, body) pairs");
  add_shared(train_cmd, flags);
  train_cmd->add_option("--vocab", train_flags.vocab, "Vocabulary file; built from the corpus when absent");
  train_cmd->add_option("--init", train_flags.init, "Continue from this checkpoint");
  train_cmd->add_option("--exclude", train_flags.exclude, "Drop articles whose ids occur in these corpora")
      ->delimiter(',');
  train_cmd->add_option("--loss-csv", train_flags.loss_csv, "Loss history CSV (default: in the checkpoint)");
  train_cmd->add_option("--log-every", train_flags.log_every, "Print the loss every N steps");
  add_training_overrides(train_cmd, flags);

  CLI::App* config_cmd = app.add_subcommand("config", "Print the resolved configuration as JSON");
  add_shared(config_cmd, flags);
  add_training_overrides(config_cmd, flags);

  CLI::App* embed_cmd = app.add_subcommand("embed", "Write one embedding per document body");
  add_shared(embed_cmd, flags);
  embed_cmd->add_option("--output", flags.output, "Output file (default: stdout)");

  struct EvalCommand {
    CLI::App* cmd;
    bool retrieval;
    bool classification;
  };
  std::vector<EvalCommand> evals;
  for (const auto& [name, help, r, c] :
       {std::tuple{"eval-retrieval", "Summary-to-article retrieval accuracy", true, false},
        std::tuple{"eval-classify", "Nearest-neighbor topic classification", false, true},
        std::tuple{"eval-all", "Retrieval and classification", true, true}}) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_shared(cmd, flags);
    cmd->add_option("--output", flags.output, "Report JSON path; the table goes next to it as .txt");
    add_override<std::string>(cmd, flags, "--pivot", "pivot_language", "Classification training language");
    add_override<double>(cmd, flags, "--test-fraction", "test_fraction", "Per-topic test share");
    evals.push_back({cmd, r, c});
  }

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      err << "error[usage]: " << e.what() << "\n";
      return 2;
    }
    if (synth_cmd->parsed()) return cmd_synth(flags, synth, out);
    if (train_cmd->parsed()) return cmd_train(flags, train_flags, out, err);
    if (config_cmd->parsed()) {
      out << run_config_to_json(resolve_config(flags)).dump(2) << "\n";
      return 0;
    }
    if (embed_cmd->parsed()) return cmd_embed(flags, out, err);
    for (const EvalCommand& e : evals) {
      if (e.cmd->parsed()) return cmd_eval(flags, e.retrieval, e.classification, out, err);
    }
    err << "error[usage]: no command given\n";
    return 2;
  } catch (const Error& e) {
    err << "error[" << error_kind_name(e.kind()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error[io]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ssb
