#pragma once

// The five classifier architectures, wired from the layers in layers.hpp.
//
//   fasttext  embed -> average -> dense(softmax)
//   cnn       embed -> {conv(w, relu) -> max over time} for w in widths -> concat -> dropout -> dense(sigmoid)
//   bilstm1   embed -> bilstm -> dropout -> dense(sigmoid)
//   bilstm2   embed -> conv(relu) -> maxpool -> bilstm -> dropout -> dense(sigmoid)
//   bilstm3   embed -> conv(relu) -> batchnorm -> maxpool -> bilstm -> dropout -> dense(sigmoid)

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedback_clf/corpus.hpp"
#include "feedback_clf/error.hpp"
#include "feedback_clf/init.hpp"
#include "feedback_clf/layers.hpp"
#include "feedback_clf/params.hpp"
#include "feedback_clf/rng.hpp"
#include "feedback_clf/tensor.hpp"

namespace fbclf {

enum class Arch { fasttext, cnn, bilstm1, bilstm2, bilstm3 };

inline constexpr Arch kAllArchs[] = {Arch::fasttext, Arch::cnn, Arch::bilstm1, Arch::bilstm2, Arch::bilstm3};

inline std::string_view to_string(Arch a) {
  switch (a) {
    case Arch::fasttext: return "fasttext";
    case Arch::cnn: return "cnn";
    case Arch::bilstm1: return "bilstm1";
    case Arch::bilstm2: return "bilstm2";
    case Arch::bilstm3: return "bilstm3";
  }
  return "?";
}

inline Arch parse_arch(std::string_view name) {
  for (Arch a : kAllArchs) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown architecture '" + std::string(name) +
                    "' (expected fasttext, cnn, bilstm1, bilstm2 or bilstm3)");
}

/// How a configured dropout value is read: as the probability of keeping a
/// unit, or as the fraction of units dropped.
enum class DropoutReading { keep, drop };

inline constexpr std::size_t kMaxSequenceLength = 256;

struct ModelConfig {
  Arch arch = Arch::fasttext;
  std::size_t vocab_size = 2;
  std::size_t embed_dim = 200;
  std::size_t lstm_units = 64;
  std::vector<std::size_t> conv_widths;
  std::size_t conv_filters = 0;
  std::size_t pool_size = 0;
  double dropout = 1.0;  // interpreted through dropout_reading
  DropoutReading dropout_reading = DropoutReading::keep;
  std::size_t max_len = kMaxSequenceLength;  // ignored by fasttext
  std::size_t n_labels = kNumLabels;
  PadSide padding = PadSide::post;
  double bn_momentum = 0.99;
  double bn_eps = 1e-3;

  static ModelConfig defaults(Arch arch, std::size_t vocab_size) {
    ModelConfig c;
    c.arch = arch;
    c.vocab_size = vocab_size;
    switch (arch) {
      case Arch::fasttext:
        c.embed_dim = 200;
        c.dropout = 1.0;
        break;
      case Arch::cnn:
        c.embed_dim = 100;
        c.conv_widths = {3, 4, 5};
        c.conv_filters = 128;
        c.dropout = 0.5;
        break;
      case Arch::bilstm1:
        c.embed_dim = 64;
        c.lstm_units = 64;
        c.dropout = 0.3;
        break;
      case Arch::bilstm2:
      case Arch::bilstm3:
        c.embed_dim = 64;
        c.lstm_units = 64;
        c.conv_widths = {5};
        c.conv_filters = 64;
        c.pool_size = 4;
        c.dropout = 0.3;
        break;
    }
    return c;
  }

  double keep_prob() const { return dropout_reading == DropoutReading::keep ? dropout : 1.0 - dropout; }

  bool uses_lstm() const { return arch == Arch::bilstm1 || arch == Arch::bilstm2 || arch == Arch::bilstm3; }
  bool uses_conv_stack() const { return arch == Arch::bilstm2 || arch == Arch::bilstm3; }
  bool fixed_length() const { return arch != Arch::fasttext; }

  /// Shortest padded sequence every layer can consume.
  std::size_t min_sequence_length() const {
    switch (arch) {
      case Arch::cnn: return *std::max_element(conv_widths.begin(), conv_widths.end());
      case Arch::bilstm2:
      case Arch::bilstm3: return conv_widths.front() + pool_size - 1;
      default: return 1;
    }
  }

  /// Width of the vector that reaches the output layer.
  std::size_t feature_dim() const {
    switch (arch) {
      case Arch::fasttext: return embed_dim;
      case Arch::cnn: return conv_widths.size() * conv_filters;
      default: return 2 * lstm_units;
    }
  }

  void validate() const {
    auto positive = [](std::size_t v, const char* what) {
      if (v == 0) throw ConfigError(std::string(what) + " must be at least 1");
    };
    if (vocab_size < 2) throw ConfigError("vocab_size must include the two reserved ids");
    positive(embed_dim, "embed_dim");
    positive(n_labels, "n_labels");
    if (!(keep_prob() > 0.0 && keep_prob() <= 1.0)) {
      throw ConfigError("dropout setting gives a keep probability outside (0,1]");
    }
    if (arch == Arch::cnn || uses_conv_stack()) {
      if (conv_widths.empty()) throw ConfigError("conv_widths must not be empty");
      for (auto w : conv_widths) positive(w, "conv width");
      positive(conv_filters, "conv_filters");
    }
    if (uses_conv_stack()) {
      if (conv_widths.size() != 1) throw ConfigError("bilstm2/bilstm3 take exactly one conv width");
      positive(pool_size, "pool_size");
    }
    if (uses_lstm()) positive(lstm_units, "lstm_units");
    if (fixed_length()) {
      positive(max_len, "max_len");
      if (max_len < min_sequence_length()) {
        throw ConfigError("max_len " + std::to_string(max_len) + " is shorter than the " +
                          std::to_string(min_sequence_length()) + " steps this architecture needs");
      }
    }
    if (arch == Arch::bilstm3 && !(bn_momentum >= 0.0 && bn_momentum < 1.0 && bn_eps > 0.0)) {
      throw ConfigError("batchnorm momentum must be in [0,1) and eps positive");
    }
  }
};

/// Scores over the six tags and the single predicted tag.
struct Prediction {
  std::vector<float> scores;
  std::size_t label_index = 0;
};

/// First index of the maximum.
template <class T>
std::size_t argmax(std::span<const T> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

namespace param_names {
inline constexpr std::string_view embedding = "embedding";
inline constexpr std::string_view out_weight = "out.W";
inline constexpr std::string_view out_bias = "out.b";
inline constexpr std::string_view bn_gamma = "bn.gamma";
inline constexpr std::string_view bn_beta = "bn.beta";
inline constexpr std::string_view bn_mean = "bn.running_mean";
inline constexpr std::string_view bn_var = "bn.running_var";
inline std::string conv_kernel(std::size_t i) { return "conv" + std::to_string(i) + ".W"; }
inline std::string conv_bias(std::size_t i) { return "conv" + std::to_string(i) + ".b"; }
inline std::string lstm(std::string_view dir, std::string_view part) {
  return "lstm_" + std::string(dir) + "." + std::string(part);
}
}  // namespace param_names

/// One architecture instance over scalar type T.
///
/// Training code uses Network<float>; the gradient checker evaluates a
/// Network<double> copy as its finite-difference reference.
template <class T>
class Network {
 public:
  using Tensor = BasicTensor<T>;

  /// Per-example intermediate values kept for the backward pass.
  struct ExampleTrace {
    std::vector<std::int32_t> ids;
    Tensor embedded;
    std::vector<Tensor> conv_out;
    std::vector<nn::PoolResult<T>> pooled;
    Tensor lstm_input;
    nn::BiLstmTrace<T> lstm;
    Tensor features;
    std::vector<T> dropout_mask;
    Tensor logits;
    Tensor scores;
  };

  struct Pass {
    bool training = false;
    std::vector<ExampleTrace> examples;
    nn::BatchNormTrace<T> batchnorm;
  };

  explicit Network(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    namespace pn = param_names;
    const auto& c = config_;
    params_.add(std::string(pn::embedding), {c.vocab_size, c.embed_dim});
    if (c.arch == Arch::cnn || c.uses_conv_stack()) {
      for (std::size_t i = 0; i < c.conv_widths.size(); ++i) {
        params_.add(pn::conv_kernel(i), {c.conv_filters, c.conv_widths[i], c.embed_dim});
        params_.add(pn::conv_bias(i), {c.conv_filters});
      }
    }
    if (c.arch == Arch::bilstm3) {
      params_.add(std::string(pn::bn_gamma), {c.conv_filters});
      params_.add(std::string(pn::bn_beta), {c.conv_filters});
      params_.add(std::string(pn::bn_mean), {c.conv_filters}, false);
      params_.add(std::string(pn::bn_var), {c.conv_filters}, false);
      params_.value(pn::bn_gamma).fill(T{1});
      params_.value(pn::bn_var).fill(T{1});
    }
    if (c.uses_lstm()) {
      const std::size_t in = c.uses_conv_stack() ? c.conv_filters : c.embed_dim, h = c.lstm_units;
      for (std::string_view dir : {"fwd", "bwd"}) {
        params_.add(pn::lstm(dir, "W"), {in, 4 * h});
        params_.add(pn::lstm(dir, "U"), {h, 4 * h});
        params_.add(pn::lstm(dir, "b"), {4 * h});
      }
    }
    params_.add(std::string(pn::out_weight), {c.feature_dim(), c.n_labels});
    params_.add(std::string(pn::out_bias), {c.n_labels});
  }

  const ModelConfig& config() const { return config_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// Fresh initialization: uniform embeddings, Glorot kernels, orthogonal
  /// recurrent matrices, forget-gate bias 1, other biases 0.
  void initialize(Rng& rng) {
    namespace pn = param_names;
    const auto& c = config_;
    init::uniform(params_.value(pn::embedding), rng, 0.05);
    for (std::size_t i = 0; i < (c.arch == Arch::cnn || c.uses_conv_stack() ? c.conv_widths.size() : 0); ++i) {
      const std::size_t w = c.conv_widths[i];
      init::glorot_uniform(params_.value(pn::conv_kernel(i)), rng, w * c.embed_dim, w * c.conv_filters);
      params_.value(pn::conv_bias(i)).zero();
    }
    if (c.arch == Arch::bilstm3) {
      params_.value(pn::bn_gamma).fill(T{1});
      params_.value(pn::bn_beta).zero();
      params_.value(pn::bn_mean).zero();
      params_.value(pn::bn_var).fill(T{1});
    }
    if (c.uses_lstm()) {
      const std::size_t h = c.lstm_units;
      for (std::string_view dir : {"fwd", "bwd"}) {
        auto& kernel = params_.value(pn::lstm(dir, "W"));
        init::glorot_uniform(kernel, rng, kernel.dim(0), 4 * h);
        init::orthogonal(params_.value(pn::lstm(dir, "U")), rng);
        auto& bias = params_.value(pn::lstm(dir, "b"));
        bias.zero();
        for (std::size_t u = h; u < 2 * h; ++u) bias[u] = T{1};
      }
    }
    init::glorot_uniform(params_.value(pn::out_weight), rng, c.feature_dim(), c.n_labels);
    params_.value(pn::out_bias).zero();
    params_.zero_grad();
  }

  /// Turns vocabulary ids into the model's input: padded/truncated to max_len
  /// for fixed-length architectures, a lone UNK for an empty fasttext input.
  std::vector<std::int32_t> prepare(std::span<const std::int32_t> ids) const {
    if (!config_.fixed_length()) {
      if (ids.empty()) return {Vocabulary::unk_id};
      return {ids.begin(), ids.end()};
    }
    return fit_length(ids, config_.max_len, config_.padding);
  }

  /// Runs a batch of prepared inputs. In training mode dropout masks are drawn
  /// from `rng` in batch order and batchnorm updates its running statistics.
  Pass forward(std::span<const std::vector<std::int32_t>> batch, bool training, Rng* rng) {
    if (config_.arch != Arch::bilstm3 || !training) return run(batch, training, rng, nullptr);
    Tensor mean = params_.value(param_names::bn_mean), var = params_.value(param_names::bn_var);
    nn::BatchNormState<T> stats{mean, var, config_.bn_momentum, config_.bn_eps};
    auto pass = run(batch, training, rng, &stats);
    params_.value(param_names::bn_mean) = std::move(mean);
    params_.value(param_names::bn_var) = std::move(var);
    return pass;
  }

  /// Inference-mode forward; does not touch any state.
  Pass infer(std::span<const std::vector<std::int32_t>> batch) const { return run(batch, false, nullptr, nullptr); }

  /// Accumulates parameter gradients given dLoss/dlogits for every example in the pass.
  void backward(const Pass& pass, std::span<const Tensor> d_logits) {
    namespace pn = param_names;
    const auto& c = config_;
    const std::size_t n = pass.examples.size();
    if (d_logits.size() != n) throw ShapeError("backward: one logit gradient per example required");

    // Gradient arriving at the (optional) batchnorm output, stacked over the batch.
    Tensor d_normed;
    std::size_t conv_steps = 0;
    if (c.arch == Arch::bilstm3) {
      conv_steps = pass.examples.front().conv_out.front().dim(0);
      d_normed = Tensor({n * conv_steps, c.conv_filters});
    }
    std::vector<Tensor> d_conv(n);

    for (std::size_t e = 0; e < n; ++e) {
      const auto& ex = pass.examples[e];
      auto d_feat = nn::dense_backward<T>(ex.features.data(), params_.value(pn::out_weight), d_logits[e].data(),
                                          params_.grad(pn::out_weight), params_.grad(pn::out_bias));
      d_feat = nn::dropout_backward<T>(d_feat, ex.dropout_mask);

      Tensor d_embedded;
      switch (c.arch) {
        case Arch::fasttext:
          d_embedded = nn::average_backward(d_feat, ex.embedded.dim(0));
          break;
        case Arch::cnn: {
          d_embedded = Tensor(ex.embedded.shape());
          for (std::size_t i = 0; i < c.conv_widths.size(); ++i) {
            Tensor d_pool({c.conv_filters});
            std::copy_n(d_feat.ptr() + i * c.conv_filters, c.conv_filters, d_pool.ptr());
            const auto d_out = nn::globalmaxpool_backward<T>(d_pool, ex.pooled[i].argmax, ex.conv_out[i].dim(0));
            const auto dx = nn::conv1d_backward(ex.embedded, params_.value(pn::conv_kernel(i)), ex.conv_out[i], true,
                                                d_out, params_.grad(pn::conv_kernel(i)),
                                                params_.grad(pn::conv_bias(i)));
            for (std::size_t j = 0; j < dx.size(); ++j) d_embedded[j] += dx[j];
          }
          break;
        }
        case Arch::bilstm1:
        case Arch::bilstm2:
        case Arch::bilstm3: {
          auto d_seq = nn::bilstm_backward(ex.lstm_input, lstm_weights("fwd"), lstm_weights("bwd"), ex.lstm, d_feat,
                                           lstm_grads("fwd"), lstm_grads("bwd"));
          if (c.arch == Arch::bilstm1) {
            d_embedded = std::move(d_seq);
            break;
          }
          const std::size_t steps = ex.conv_out.front().dim(0);
          auto d_pool_in = nn::maxpool1d_backward<T>(d_seq, ex.pooled.front().argmax, steps);
          if (c.arch == Arch::bilstm3) {
            std::copy(d_pool_in.data().begin(), d_pool_in.data().end(), d_normed.ptr() + e * conv_steps * c.conv_filters);
            continue;
          }
          d_conv[e] = std::move(d_pool_in);
          break;
        }
      }
      if (c.arch == Arch::fasttext || c.arch == Arch::cnn || c.arch == Arch::bilstm1) {
        nn::embedding_backward<T>(ex.ids, d_embedded, params_.grad(pn::embedding));
      }
    }

    if (!c.uses_conv_stack()) return;
    if (c.arch == Arch::bilstm3) {
      const auto d_stacked = nn::batchnorm_backward(d_normed, params_.value(pn::bn_gamma), pass.batchnorm,
                                                    params_.grad(pn::bn_gamma), params_.grad(pn::bn_beta));
      for (std::size_t e = 0; e < n; ++e) {
        d_conv[e] = Tensor({conv_steps, c.conv_filters});
        std::copy_n(d_stacked.ptr() + e * conv_steps * c.conv_filters, conv_steps * c.conv_filters, d_conv[e].ptr());
      }
    }
    for (std::size_t e = 0; e < n; ++e) {
      const auto& ex = pass.examples[e];
      const auto d_embedded =
          nn::conv1d_backward(ex.embedded, params_.value(pn::conv_kernel(0)), ex.conv_out.front(), true, d_conv[e],
                              params_.grad(pn::conv_kernel(0)), params_.grad(pn::conv_bias(0)));
      nn::embedding_backward<T>(ex.ids, d_embedded, params_.grad(pn::embedding));
    }
  }

  /// Which ReLUs fired and which rows max-pooling selected. Finite differences
  /// are only meaningful where this pattern does not change.
  static std::vector<std::int64_t> activation_pattern(const Pass& pass) {
    std::vector<std::int64_t> sig;
    for (const auto& ex : pass.examples) {
      for (const auto& conv : ex.conv_out) {
        for (T v : conv.data()) sig.push_back(v > T{0} ? 1 : 0);
      }
      for (const auto& p : ex.pooled) sig.insert(sig.end(), p.argmax.begin(), p.argmax.end());
    }
    return sig;
  }

  template <class U>
  Network<U> cast() const {
    Network<U> out(config_);
    for (const auto& p : params_) out.params().value(p.name) = p.value.template cast<U>();
    return out;
  }

 private:
  nn::LstmWeights<T> lstm_weights(std::string_view dir) const {
    namespace pn = param_names;
    return {params_.value(pn::lstm(dir, "W")), params_.value(pn::lstm(dir, "U")), params_.value(pn::lstm(dir, "b"))};
  }

  nn::LstmGrads<T> lstm_grads(std::string_view dir) {
    namespace pn = param_names;
    return {params_.grad(pn::lstm(dir, "W")), params_.grad(pn::lstm(dir, "U")), params_.grad(pn::lstm(dir, "b"))};
  }

  /// `stats` receives running-statistics updates; null leaves them untouched.
  Pass run(std::span<const std::vector<std::int32_t>> batch, bool training, Rng* rng,
           nn::BatchNormState<T>* stats) const {
    namespace pn = param_names;
    const auto& c = config_;
    if (training && !rng && c.keep_prob() < 1.0) throw ConfigError("training forward needs a random generator");
    Pass pass;
    pass.training = training;
    pass.examples.resize(batch.size());

    for (std::size_t e = 0; e < batch.size(); ++e) {
      auto& ex = pass.examples[e];
      ex.ids = batch[e];
      if (c.fixed_length() && ex.ids.size() != c.max_len) {
        throw ShapeError("input of length " + std::to_string(ex.ids.size()) + " was not prepared to max_len " +
                         std::to_string(c.max_len));
      }
      ex.embedded = nn::embedding_forward<T>(ex.ids, params_.value(pn::embedding));
      if (c.arch == Arch::fasttext) {
        ex.features = nn::average_forward(ex.embedded);
      } else if (c.arch == Arch::cnn) {
        ex.features = Tensor({c.feature_dim()});
        for (std::size_t i = 0; i < c.conv_widths.size(); ++i) {
          ex.conv_out.push_back(nn::conv1d_forward(ex.embedded, params_.value(pn::conv_kernel(i)),
                                                   params_.value(pn::conv_bias(i)), true));
          ex.pooled.push_back(nn::globalmaxpool_forward(ex.conv_out.back()));
          std::copy(ex.pooled.back().out.data().begin(), ex.pooled.back().out.data().end(),
                    ex.features.ptr() + i * c.conv_filters);
        }
      } else if (c.uses_conv_stack()) {
        ex.conv_out.push_back(
            nn::conv1d_forward(ex.embedded, params_.value(pn::conv_kernel(0)), params_.value(pn::conv_bias(0)), true));
      } else {
        ex.lstm_input = ex.embedded;
      }
    }

    if (c.arch == Arch::bilstm3 && !batch.empty()) {
      const std::size_t steps = pass.examples.front().conv_out.front().dim(0), k = c.conv_filters;
      Tensor stacked({batch.size() * steps, k});
      for (std::size_t e = 0; e < batch.size(); ++e) {
        const auto& src = pass.examples[e].conv_out.front();
        std::copy(src.data().begin(), src.data().end(), stacked.ptr() + e * steps * k);
      }
      Tensor mean_copy = params_.value(pn::bn_mean), var_copy = params_.value(pn::bn_var);
      const nn::BatchNormState<T> state =
          stats ? *stats : nn::BatchNormState<T>{mean_copy, var_copy, c.bn_momentum, c.bn_eps};
      const auto normed = nn::batchnorm_forward(stacked, params_.value(pn::bn_gamma), params_.value(pn::bn_beta), state,
                                                training, &pass.batchnorm);
      for (std::size_t e = 0; e < batch.size(); ++e) {
        Tensor part({steps, k});
        std::copy_n(normed.ptr() + e * steps * k, steps * k, part.ptr());
        pass.examples[e].lstm_input = std::move(part);
      }
    } else if (c.arch == Arch::bilstm2) {
      for (auto& ex : pass.examples) ex.lstm_input = ex.conv_out.front();
    }

    for (auto& ex : pass.examples) {
      if (c.uses_conv_stack()) {
        ex.pooled.push_back(nn::maxpool1d_forward(ex.lstm_input, c.pool_size));
        ex.lstm_input = ex.pooled.back().out;
      }
      if (c.uses_lstm()) {
        ex.features = nn::bilstm_forward(ex.lstm_input, lstm_weights("fwd"), lstm_weights("bwd"), &ex.lstm);
      }
      if (training && c.keep_prob() < 1.0) {
        auto d = nn::dropout_forward(ex.features, c.keep_prob(), true, *rng);
        ex.dropout_mask = std::move(d.mask);
        ex.logits = nn::dense_logits<T>(d.out.data(), params_.value(pn::out_weight), params_.value(pn::out_bias));
        ex.features = std::move(d.out);
      } else {
        ex.logits = nn::dense_logits<T>(ex.features.data(), params_.value(pn::out_weight), params_.value(pn::out_bias));
      }
      ex.scores = nn::activate(ex.logits, output_activation());
      require_finite(ex.scores, "model output");
    }
    return pass;
  }

  nn::Activation output_activation() const {
    return config_.arch == Arch::fasttext ? nn::Activation::softmax : nn::Activation::sigmoid;
  }

  ModelConfig config_;
  ParamStore<T> params_;
};

/// A float network plus the vocabulary it was trained with.
struct TrainedModel {
  ModelConfig config;
  Vocabulary vocab;
  Network<float> network;
  bool clean_english = false;  // tokenizer setting the vocabulary was built with
  std::string language;

  TrainedModel(ModelConfig cfg, Vocabulary v) : config(cfg), vocab(std::move(v)), network(std::move(cfg)) {
    if (config.vocab_size != vocab.size()) {
      throw ConfigError("config vocab_size " + std::to_string(config.vocab_size) + " does not match vocabulary size " +
                        std::to_string(vocab.size()));
    }
  }
};

/// Freshly initialized model for `config` over `vocab`.
inline TrainedModel build_model(ModelConfig config, Vocabulary vocab, Rng& rng) {
  TrainedModel model(std::move(config), std::move(vocab));
  model.network.initialize(rng);
  return model;
}

/// Six scores for one example: softmax for fasttext, independent sigmoids otherwise.
inline std::vector<float> score_example(TrainedModel& model, std::span<const std::int32_t> token_ids, bool training,
                                        Rng* rng) {
  const std::vector<std::vector<std::int32_t>> batch{model.network.prepare(token_ids)};
  const auto pass = training ? model.network.forward(batch, true, rng) : model.network.infer(batch);
  const auto s = pass.examples.front().scores.data();
  return {s.begin(), s.end()};
}

/// Inference-mode prediction; ties resolve to the lowest label index.
inline Prediction predict(const TrainedModel& model, std::span<const std::int32_t> token_ids) {
  const std::vector<std::vector<std::int32_t>> batch{model.network.prepare(token_ids)};
  const auto pass = model.network.infer(batch);
  const auto s = pass.examples.front().scores.data();
  Prediction p{{s.begin(), s.end()}, 0};
  p.label_index = argmax<float>(p.scores);
  return p;
}

/// Batched inference over many inputs; same results as calling predict per input.
inline std::vector<Prediction> predict_all(const TrainedModel& model,
                                           std::span<const std::vector<std::int32_t>> inputs,
                                           std::size_t batch_size = 64) {
  std::vector<Prediction> out;
  out.reserve(inputs.size());
  for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
    const std::size_t end = std::min(inputs.size(), start + batch_size);
    std::vector<std::vector<std::int32_t>> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(model.network.prepare(inputs[i]));
    const auto pass = model.network.infer(batch);
    for (const auto& ex : pass.examples) {
      const auto s = ex.scores.data();
      Prediction p{{s.begin(), s.end()}, 0};
      p.label_index = argmax<float>(p.scores);
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace fbclf
