#pragma once

// Losses, optimizers and the epoch loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "feedback_clf/corpus.hpp"
#include "feedback_clf/error.hpp"
#include "feedback_clf/metrics.hpp"
#include "feedback_clf/models.hpp"
#include "feedback_clf/params.hpp"
#include "feedback_clf/rng.hpp"

namespace fbclf {

inline constexpr double kLogClamp = 1e-12;

template <class T>
struct LossResult {
  double loss = 0.0;
  std::vector<T> d_logits;
};

/// -ln p[target] for softmax outputs; gradient on the logits is p - onehot(target).
template <class T>
LossResult<T> softmax_nll(std::span<const T> probs, std::size_t target) {
  if (target >= probs.size()) throw ShapeError("softmax_nll: target index out of range");
  LossResult<T> r{-std::log(std::max(static_cast<double>(probs[target]), kLogClamp)),
                  std::vector<T>(probs.begin(), probs.end())};
  r.d_logits[target] -= T{1};
  return r;
}

/// Mean over labels of the binary cross-entropy; gradient on the pre-sigmoid logits is (s - y) / C.
template <class T>
LossResult<T> binary_cross_entropy(std::span<const T> scores, const LabelMask& gold) {
  const std::size_t n = scores.size();
  LossResult<T> r{0.0, std::vector<T>(n)};
  double sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const double s = std::clamp(static_cast<double>(scores[c]), kLogClamp, 1.0 - kLogClamp);
    const bool y = c < gold.size() && gold[c];
    sum += y ? std::log(s) : std::log(1.0 - s);
    r.d_logits[c] = (scores[c] - (y ? T{1} : T{0})) / static_cast<T>(n);
  }
  r.loss = -sum / static_cast<double>(n);
  return r;
}

/// theta -= lr * (1 - progress) * grad, then clears gradients.
template <class T>
void sgd_step(ParamStore<T>& params, double learning_rate, double progress) {
  const T rate = static_cast<T>(learning_rate * (1.0 - progress));
  for (auto& p : params) {
    if (p.trainable && rate != T{0}) {
      for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= rate * p.grad[i];
    }
    p.grad.zero();
  }
}

template <class T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> v;
};

/// One bias-corrected Adam update over every trainable parameter; clears gradients.
template <class T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, double learning_rate) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(state.beta1, t);
  const double correct2 = 1.0 - std::pow(state.beta2, t);
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  std::size_t slot = 0;
  for (auto& p : params) {
    auto& m = state.m[slot];
    auto& v = state.v[slot];
    ++slot;
    if (p.trainable) {
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const T g = p.grad[i];
        m[i] = b1 * m[i] + (T{1} - b1) * g;
        v[i] = b2 * v[i] + (T{1} - b2) * g * g;
        const double m_hat = static_cast<double>(m[i]) / correct1;
        const double v_hat = static_cast<double>(v[i]) / correct2;
        p.value[i] -= static_cast<T>(learning_rate * m_hat / (std::sqrt(v_hat) + state.eps));
      }
    }
    p.grad.zero();
  }
}

enum class Optimizer { sgd, adam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 0.001;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
  bool early_stopping = false;  // monitors dev exact accuracy; needs a dev set
  std::size_t patience = 5;
  bool shuffle = true;

  /// Per-architecture regimes: fasttext is per-example SGD with linear decay,
  /// everything else minibatch Adam on binary cross-entropy.
  static TrainConfig defaults(Arch arch) {
    TrainConfig c;
    switch (arch) {
      case Arch::fasttext:
        c.optimizer = Optimizer::sgd;
        c.learning_rate = 0.1;
        c.epochs = 100;
        c.batch_size = 1;
        break;
      case Arch::cnn:
        c.epochs = 10;
        break;
      case Arch::bilstm1:
      case Arch::bilstm2:
      case Arch::bilstm3:
        c.epochs = 30;
        c.early_stopping = true;
        break;
    }
    return c;
  }

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (early_stopping && patience < 1) throw ConfigError("patience must be at least 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> dev_exact_accuracy;
  std::optional<double> dev_micro_f1;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;  // 1-based; set when a dev set was given
};

namespace detail {

inline void check_encoded(std::span<const Example> data, const Vocabulary& vocab, const char* which) {
  for (const auto& e : data) {
    if (e.token_ids.size() != e.tokens.size()) {
      throw DataError(std::string(which) + " example '" + e.id + "' is not encoded with the model vocabulary");
    }
    for (auto id : e.token_ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
        throw DataError(std::string(which) + " example '" + e.id + "' has token id " + std::to_string(id) +
                        " outside the model vocabulary");
      }
    }
  }
}

inline std::size_t sample_gold(const LabelMask& gold, Rng& rng) {
  const auto pick = rng.below(gold.count());
  std::size_t seen = 0;
  for (std::size_t c = 0; c < gold.size(); ++c) {
    if (gold[c] && seen++ == pick) return c;
  }
  return 0;
}

}  // namespace detail

/// Trains `model` in place. With early stopping the best-dev-epoch parameters
/// are restored at the end (ties go to the earlier epoch).
inline TrainHistory train(TrainedModel& model, std::span<const Example> train_set, std::span<const Example> dev_set,
                          const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  for (const auto& e : train_set) {
    if (e.gold.none()) throw DataError("training example '" + e.id + "' has no gold label");
  }
  detail::check_encoded(train_set, model.vocab, "training");
  detail::check_encoded(dev_set, model.vocab, "dev");

  auto& net = model.network;
  auto& params = net.params();
  params.zero_grad();

  Rng master(config.seed);
  Rng shuffle_rng = master.split();
  Rng dropout_rng = master.split();
  Rng label_rng = master.split();

  std::vector<std::vector<std::int32_t>> inputs;
  inputs.reserve(train_set.size());
  for (const auto& e : train_set) inputs.push_back(net.prepare(e.token_ids));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const bool use_dev = !dev_set.empty();
  const bool stop_early = config.early_stopping && use_dev;
  const bool softmax_output = model.config.arch == Arch::fasttext;
  const std::size_t batches_per_epoch = (train_set.size() + config.batch_size - 1) / config.batch_size;
  const double total_updates = static_cast<double>(config.epochs) * static_cast<double>(batches_per_epoch);
  std::uint64_t updates = 0;

  AdamState<float> adam;
  TrainHistory history;
  std::vector<BasicTensor<float>> best_params;
  double best_dev = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<std::vector<std::int32_t>> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(inputs[order[i]]);
      const auto pass = net.forward(batch, true, &dropout_rng);

      const float inv_batch = 1.0f / static_cast<float>(batch.size());
      std::vector<BasicTensor<float>> d_logits;
      d_logits.reserve(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& ex = train_set[order[start + b]];
        const auto scores = pass.examples[b].scores.data();
        auto loss = softmax_output ? softmax_nll<float>(scores, detail::sample_gold(ex.gold, label_rng))
                                   : binary_cross_entropy<float>(scores, ex.gold);
        loss_sum += loss.loss;
        for (auto& g : loss.d_logits) g *= inv_batch;
        d_logits.emplace_back(Shape{loss.d_logits.size()}, std::move(loss.d_logits));
      }
      net.backward(pass, d_logits);

      if (config.optimizer == Optimizer::sgd) {
        sgd_step(params, config.learning_rate, static_cast<double>(updates) / total_updates);
      } else {
        adam_step(params, adam, config.learning_rate);
      }
      ++updates;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train_set.size());
    if (use_dev) {
      const auto report = evaluate(model, dev_set);
      record.dev_exact_accuracy = report.exact_accuracy;
      record.dev_micro_f1 = report.micro.f1;
      if (report.exact_accuracy > best_dev) {
        best_dev = report.exact_accuracy;
        history.best_epoch = epoch;
        since_best = 0;
        if (stop_early) {
          best_params.clear();
          for (const auto& p : params) best_params.push_back(p.value);
        }
      } else {
        ++since_best;
      }
    }
    history.epochs.push_back(record);
    if (stop_early && since_best >= config.patience) break;
  }

  if (stop_early && !best_params.empty()) {
    std::size_t slot = 0;
    for (auto& p : params) p.value = best_params[slot++];
  }
  return history;
}

}  // namespace fbclf
