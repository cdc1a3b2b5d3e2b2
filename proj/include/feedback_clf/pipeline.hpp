#pragma once

// Corpus -> vocabulary -> model -> trained model, shared by the CLI and tests.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedback_clf/corpus.hpp"
#include "feedback_clf/error.hpp"
#include "feedback_clf/models.hpp"
#include "feedback_clf/rng.hpp"
#include "feedback_clf/trainer.hpp"

namespace fbclf {

inline constexpr std::string_view kLanguages[] = {"en", "es", "fr", "ja"};
inline constexpr std::string_view kJapaneseCaveat = "whitespace-tokenization caveat";

inline void check_language(std::string_view lang) {
  if (std::find(std::begin(kLanguages), std::end(kLanguages), lang) == std::end(kLanguages)) {
    throw ConfigError("unknown language '" + std::string(lang) + "' (expected en, es, fr or ja)");
  }
}

inline std::string caveat_for(std::string_view lang) { return lang == "ja" ? std::string(kJapaneseCaveat) : ""; }

/// Everything a training run can override; unset fields take the architecture defaults.
struct RunOptions {
  Arch arch = Arch::fasttext;
  std::uint64_t seed = 1;
  bool clean_english = false;
  std::string language = "en";
  std::size_t min_count = 1;
  std::optional<std::size_t> max_vocab;

  std::optional<std::size_t> max_len;
  std::optional<std::size_t> embed_dim;
  std::optional<std::size_t> lstm_units;
  std::optional<std::size_t> conv_filters;
  std::optional<double> dropout;
  std::optional<DropoutReading> dropout_reading;

  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  std::optional<std::size_t> patience;
  std::optional<bool> early_stopping;
  std::optional<bool> shuffle;
};

/// min(longest sentence, 256), raised to what the conv/pool stack needs.
inline std::size_t derive_max_len(const ModelConfig& config, std::span<const Example> train_set) {
  std::size_t longest = 1;
  for (const auto& e : train_set) longest = std::max(longest, e.tokens.size());
  return std::max(std::min(longest, kMaxSequenceLength), config.min_sequence_length());
}

inline ModelConfig model_config_for(const RunOptions& o, std::size_t vocab_size, std::span<const Example> train_set) {
  auto c = ModelConfig::defaults(o.arch, vocab_size);
  if (o.embed_dim) c.embed_dim = *o.embed_dim;
  if (o.lstm_units) c.lstm_units = *o.lstm_units;
  if (o.conv_filters) c.conv_filters = *o.conv_filters;
  if (o.dropout) c.dropout = *o.dropout;
  if (o.dropout_reading) c.dropout_reading = *o.dropout_reading;
  c.max_len = o.max_len ? *o.max_len : derive_max_len(c, train_set);
  c.validate();
  return c;
}

inline TrainConfig train_config_for(const RunOptions& o) {
  auto t = TrainConfig::defaults(o.arch);
  t.seed = o.seed;
  if (o.epochs) t.epochs = *o.epochs;
  if (o.batch_size) t.batch_size = *o.batch_size;
  if (o.learning_rate) t.learning_rate = *o.learning_rate;
  if (o.patience) t.patience = *o.patience;
  if (o.early_stopping) t.early_stopping = *o.early_stopping;
  if (o.shuffle) t.shuffle = *o.shuffle;
  t.validate();
  return t;
}

struct RunResult {
  TrainedModel model;
  TrainHistory history;
  std::optional<EvalReport> dev_report;
};

/// Builds the vocabulary from `train_set`, encodes both sets in place and trains.
/// The initialization stream is split off the run seed so training keeps its own.
inline RunResult train_run(std::vector<Example>& train_set, std::vector<Example>& dev_set, const RunOptions& o) {
  check_language(o.language);
  if (train_set.empty()) throw DataError("training set is empty");
  std::vector<std::vector<std::string>> sequences;
  sequences.reserve(train_set.size());
  for (const auto& e : train_set) sequences.push_back(e.tokens);
  auto vocab = build_vocab(sequences, o.min_count, o.max_vocab);
  attach_vocab(train_set, vocab);
  attach_vocab(dev_set, vocab);

  const auto model_config = model_config_for(o, vocab.size(), train_set);
  const auto train_config = train_config_for(o);
  Rng init_rng(o.seed ^ 0x9e3779b97f4a7c15ULL);
  RunResult r{build_model(model_config, std::move(vocab), init_rng), {}, std::nullopt};
  r.model.clean_english = o.clean_english;
  r.model.language = o.language;
  r.history = train(r.model, train_set, dev_set, train_config);
  if (!dev_set.empty()) r.dev_report = evaluate(r.model, dev_set);
  return r;
}

}  // namespace fbclf
