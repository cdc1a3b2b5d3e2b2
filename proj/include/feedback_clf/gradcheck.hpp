#pragma once

// Central-difference verification of every backward pass.
//
// Layers and networks are templates over the scalar type, so both sides of the
// comparison run the same forward/backward source in double precision. In
// float32 a difference quotient at eps = 1e-3 carries ~1e-4 of absolute
// round-off, and analytic gradients of true size 1e-9 carry ~1e-10; either
// would swamp a 1e-3 relative bound. float_consistency() separately checks
// that the float32 instantiation tracks the double one.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "feedback_clf/layers.hpp"
#include "feedback_clf/models.hpp"
#include "feedback_clf/params.hpp"
#include "feedback_clf/rng.hpp"
#include "feedback_clf/trainer.hpp"

namespace fbclf {

/// Loss at the current parameter values, plus the piecewise-linear activation
/// pattern (ReLU bits, pooling argmaxes) that produced it.
struct Probe {
  double loss = 0.0;
  std::vector<std::int64_t> pattern;
};

struct GradCheckOptions {
  double eps = 1e-3;
  double tol = 1e-3;
  std::size_t coords_per_tensor = 32;
  /// Scales the analytic gradient of every tensor in this group; used to prove the harness catches bad backward code.
  std::string inject_fault;
};

struct TensorCheck {
  std::string group;
  std::string param;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a ReLU or pooling boundary
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<TensorCheck> entries;

  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const TensorCheck& e) { return e.passed; });
  }

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }

  void append(const GradCheckReport& other) { entries.insert(entries.end(), other.entries.begin(), other.entries.end()); }
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Compares the gradients stored in `analytic` against central differences of
/// `evaluate`, which must read its parameters from `reference` (perturbed in
/// place and restored). Tensors of at most coords_per_tensor entries are
/// checked exhaustively, larger ones on a random subsample.
template <class A>
GradCheckReport grad_check(const std::string& group, ParamStore<double>& reference, const ParamStore<A>& analytic,
                           const std::function<Probe()>& evaluate, const GradCheckOptions& opts, Rng& rng) {
  GradCheckReport report;
  const Probe base = evaluate();
  const double fault = opts.inject_fault == group ? 1.5 : 1.0;
  for (auto& p : reference) {
    if (!p.trainable) continue;
    const auto& grad = analytic.get(p.name).grad;
    TensorCheck tc{group, p.name};

    std::vector<std::size_t> order(p.value.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));

    const std::size_t wanted = std::min(opts.coords_per_tensor, order.size());
    for (std::size_t idx : order) {
      if (tc.checked == wanted) break;
      const double saved = p.value[idx];
      p.value[idx] = saved + opts.eps;
      const Probe plus = evaluate();
      p.value[idx] = saved - opts.eps;
      const Probe minus = evaluate();
      p.value[idx] = saved;
      if (plus.pattern != base.pattern || minus.pattern != base.pattern) {
        ++tc.skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * opts.eps);
      const double a = static_cast<double>(grad[idx]) * fault;
      const double err = relative_error(a, numeric);
      ++tc.checked;
      if (tc.checked == 1 || err > tc.max_rel_error) {
        tc.max_rel_error = err;
        tc.worst_index = idx;
        tc.worst_analytic = a;
        tc.worst_numeric = numeric;
      }
    }
    const bool enough = 2 * tc.checked >= wanted;
    tc.passed = enough && tc.max_rel_error <= opts.tol;
    report.entries.push_back(tc);
  }
  return report;
}

namespace gradcheck_detail {

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double limit = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return v;
}

template <class T>
void fill_uniform(BasicTensor<T>& t, Rng& rng, double limit = 1.0) {
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-limit, limit));
}

/// sum_i w_i * out_i, with w fixed per fixture; its gradient on `out` is w.
template <class T>
double projected(const BasicTensor<T>& out, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += static_cast<double>(out[i]) * w[i];
  return s;
}

template <class T>
BasicTensor<T> projection_grad(const Shape& shape, const std::vector<double>& w) {
  BasicTensor<T> g(shape);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<T>(w[i]);
  return g;
}

template <class T>
void add_into(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <class T>
std::vector<std::int64_t> relu_bits(const BasicTensor<T>& out) {
  std::vector<std::int64_t> bits;
  for (T v : out.data()) bits.push_back(v > T{0});
  return bits;
}

/// Runs one layer fixture in float (with gradients) and double (probes).
///
/// Fixture: `template <class T> Probe run(ParamStore<T>&, bool backprop) const`.
template <class Fixture>
GradCheckReport check_fixture(const std::string& group, const Fixture& fx, const ParamStore<float>& params,
                              const GradCheckOptions& opts, Rng& rng) {
  auto analytic = params.template cast<double>();
  fx.run(analytic, true);
  auto reference = params.template cast<double>();
  return grad_check<double>(group, reference, analytic, [&] { return fx.run(reference, false); }, opts, rng);
}

// --- layer fixtures ------------------------------------------------------

struct EmbeddingFixture {
  std::vector<std::int32_t> ids;
  std::vector<double> w;

  template <class T>
  Probe run(ParamStore<T>& p, bool backprop) const {
    const auto out = nn::embedding_forward<T>(ids, p.value("table"));
    if (backprop) nn::embedding_backward<T>(ids, projection_grad<T>(out.shape(), w), p.grad("table"));
    return {projected(out, w), {}};
  }
};

struct AverageFixture {
  std::vector<double> w;

  template <class T>
  Probe run(ParamStore<T>& p, bool backprop) const {
    const auto& x = p.value("x");
    const auto out = nn::average_forward(x);
    if (backprop) add_into(p.grad("x"), nn::average_backward(projection_grad<T>(out.shape(), w), x.dim(0)));
    return {projected(out, w), {}};
  }
};

struct Conv1dFixture {
  bool use_relu = true;
  std::vector<double> w;

  template <class T>
  Probe run(ParamStore<T>& p, bool backprop) const {
    const auto& x = p.value("x");
    const auto out = nn::conv1d_forward(x, p.value("W"), p.value("b"), use_relu);
    if (backprop) {
      add_into(p.grad("x"), nn::conv1d_backward(x, p.value("W"), out, use_relu, projection_grad<T>(out.shape(), w),
                                                p.grad("W"), p.grad("b")));
    }
    return {projected(out, w), use_relu ? relu_bits(out) : std::vector<std::int64_t>{}};
  }
};

struct MaxPoolFixture {
  std::size_t pool = 2;
  bool global = false;
  std::vector<double> w;

  template <class T>
  Probe run(ParamStore<T>& p, bool backprop) const {
    const auto& x = p.value("x");
    const auto r = global ? nn::globalmaxpool_forward(x) : nn::maxpool1d_forward(x, pool);
    if (backprop) {
      const auto g = projection_grad<T>(r.out.shape(), w);
      add_into(p.grad("x"), global ? nn::globalmaxpool_backward<T>(g, r.argmax, x.dim(0))
                                   : nn::maxpool1d_backward<T>(g, r.argmax, x.dim(0)));
    }
    return {projected(r.out, w), {r.argmax.begin(), r.argmax.end()}};
  }
};

struct BiLstmFixture {
  std::vector<double> w;

  template <class T>
  Probe run(ParamStore<T>& p, bool backprop) const {
    const auto& x = p.value("x");
    const nn::LstmWeights<T> fwd{p.value("fwd.W"), p.value("fwd.U"), p.value("fwd.b")};
    const nn::LstmWeights<T> bwd{p.value("bwd.W"), p.value("bwd.U"), p.value("bwd.b")};
    nn::BiLstmTrace<T> trace;
    const auto out = nn::bilstm_forward(x, fwd, bwd, &trace);
    if (backprop) {
      add_into(p.grad("x"),
               nn::bilstm_backward(x, fwd, bwd, trace, projection_grad<T>(out.shape(), w),
                                   nn::LstmGrads<T>{p.grad("fwd.W"), p.grad("fwd.U"), p.grad("fwd.b")},
                                   nn::LstmGrads<T>{p.grad("bwd.W"), p.grad("bwd.U"), p.grad("bwd.b")}));
    }
    return {projected(out, w), {}};
  }
};

struct DenseFixture {
  std::vector<double> w;

  template <class T>
  Probe run(ParamStore<T>& p, bool backprop) const {
    const auto& x = p.value("x");
    const auto out = nn::dense_forward<T>(x.data(), p.value("W"), p.value("b"), nn::Activation::none);
    if (backprop) {
      const auto g = projection_grad<T>(out.shape(), w);
      add_into(p.grad("x"), nn::dense_backward<T>(x.data(), p.value("W"), g.data(), p.grad("W"), p.grad("b")));
    }
    return {projected(out, w), {}};
  }
};

struct ActivationFixture {
  nn::Activation act = nn::Activation::softmax;
  std::vector<double> w;

  template <class T>
  Probe run(ParamStore<T>& p, bool backprop) const {
    const auto& z = p.value("z");
    const auto out = nn::activate(z, act);
    if (backprop) {
      const auto g = projection_grad<T>(out.shape(), w);
      const auto dz = act == nn::Activation::softmax ? nn::softmax_backward<T>(out.data(), g.data())
                                                     : nn::sigmoid_backward<T>(out.data(), g.data());
      for (std::size_t i = 0; i < dz.size(); ++i) p.grad("z")[i] += dz[i];
    }
    return {projected(out, w), {}};
  }
};

struct DropoutFixture {
  double keep_prob = 0.5;
  std::uint64_t mask_seed = 0;
  std::vector<double> w;

  template <class T>
  Probe run(ParamStore<T>& p, bool backprop) const {
    Rng rng(mask_seed);  // same mask on every evaluation
    const auto& x = p.value("x");
    const auto r = nn::dropout_forward(x, keep_prob, true, rng);
    if (backprop) add_into(p.grad("x"), nn::dropout_backward<T>(projection_grad<T>(r.out.shape(), w), r.mask));
    return {projected(r.out, w), {}};
  }
};

struct BatchNormFixture {
  bool training = true;
  std::vector<double> w;

  template <class T>
  Probe run(ParamStore<T>& p, bool backprop) const {
    const auto& x = p.value("x");
    BasicTensor<T> mean = p.value("running_mean"), var = p.value("running_var");
    nn::BatchNormTrace<T> trace;
    const auto out = nn::batchnorm_forward(x, p.value("gamma"), p.value("beta"), nn::BatchNormState<T>{mean, var},
                                           training, &trace);
    if (backprop) {
      add_into(p.grad("x"), nn::batchnorm_backward(projection_grad<T>(out.shape(), w), p.value("gamma"), trace,
                                                   p.grad("gamma"), p.grad("beta")));
    }
    return {projected(out, w), {}};
  }
};

/// Loss of a full network on a fixed batch with frozen dropout masks.
struct NetworkFixture {
  std::vector<std::vector<std::int32_t>> batch;
  std::vector<LabelMask> gold;
  std::vector<std::size_t> targets;  // softmax targets (fasttext)
  std::uint64_t mask_seed = 0;

  template <class T>
  Probe run(Network<T>& net, bool backprop) const {
    Rng rng(mask_seed);
    const auto pass = net.forward(batch, true, &rng);
    const bool softmax_output = net.config().arch == Arch::fasttext;
    double loss = 0.0;
    std::vector<BasicTensor<T>> d_logits;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      auto l = softmax_output ? softmax_nll<T>(pass.examples[b].scores.data(), targets[b])
                              : binary_cross_entropy<T>(pass.examples[b].scores.data(), gold[b]);
      loss += l.loss / static_cast<double>(batch.size());
      for (auto& g : l.d_logits) g /= static_cast<T>(batch.size());
      d_logits.emplace_back(Shape{l.d_logits.size()}, std::move(l.d_logits));
    }
    if (backprop) net.backward(pass, d_logits);
    return {loss, Network<T>::activation_pattern(pass)};
  }
};

}  // namespace gradcheck_detail

/// Small configuration of `arch` for gradient checking (all dims <= 8, sequences <= 6).
inline ModelConfig reduced_config(Arch arch) {
  ModelConfig c = ModelConfig::defaults(arch, 10);
  c.embed_dim = 5;
  c.lstm_units = 4;
  c.max_len = 6;
  if (arch == Arch::cnn) {
    c.conv_widths = {2, 3, 4};
    c.conv_filters = 3;
  } else if (c.uses_conv_stack()) {
    c.conv_widths = {3};
    c.conv_filters = 4;
    c.pool_size = 2;
  }
  return c;
}

inline std::string layer_group(nn::LayerKind kind) { return "layer:" + std::string(nn::to_string(kind)); }
inline std::string arch_group(Arch arch) { return "arch:" + std::string(to_string(arch)); }

/// Checks one layer kind on a random fixture drawn from `seed`.
inline GradCheckReport check_layer(nn::LayerKind kind, std::uint64_t seed, const GradCheckOptions& opts) {
  using namespace gradcheck_detail;
  using nn::LayerKind;
  Rng rng(seed);
  ParamStore<float> p;
  const std::string group = layer_group(kind);
  auto add = [&](const char* name, Shape shape, double limit = 1.0) -> BasicTensor<float>& {
    auto& t = p.add(name, std::move(shape)).value;
    fill_uniform(t, rng, limit);
    return t;
  };
  switch (kind) {
    case LayerKind::embedding: {
      add("table", {6, 4});
      EmbeddingFixture fx;
      for (int i = 0; i < 5; ++i) fx.ids.push_back(static_cast<std::int32_t>(rng.below(6)));
      fx.w = random_vector(rng, 5 * 4);
      return check_fixture(group, fx, std::move(p), opts, rng);
    }
    case LayerKind::average: {
      add("x", {4, 5});
      AverageFixture fx{random_vector(rng, 5)};
      return check_fixture(group, fx, std::move(p), opts, rng);
    }
    case LayerKind::conv1d: {
      add("x", {6, 4});
      add("W", {3, 3, 4}, 0.5);
      add("b", {3}, 0.5);
      GradCheckReport r;
      for (bool use_relu : {true, false}) {
        Conv1dFixture fx{use_relu, random_vector(rng, 4 * 3)};
        r.append(check_fixture(group, fx, p, opts, rng));
      }
      return r;
    }
    case LayerKind::maxpool1d: {
      add("x", {8, 3});
      MaxPoolFixture fx{2, false, random_vector(rng, 4 * 3)};
      return check_fixture(group, fx, std::move(p), opts, rng);
    }
    case LayerKind::globalmaxpool: {
      add("x", {6, 4});
      MaxPoolFixture fx{0, true, random_vector(rng, 4)};
      return check_fixture(group, fx, std::move(p), opts, rng);
    }
    case LayerKind::bilstm: {
      const std::size_t d = 3, h = 4;
      add("x", {5, d});
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string n(dir);
        add((n + ".W").c_str(), {d, 4 * h}, 0.4);
        add((n + ".U").c_str(), {h, 4 * h}, 0.4);
        add((n + ".b").c_str(), {4 * h}, 0.4);
      }
      BiLstmFixture fx{random_vector(rng, 2 * h)};
      return check_fixture(group, fx, std::move(p), opts, rng);
    }
    case LayerKind::dense: {
      add("x", {6});
      add("W", {6, 5});
      add("b", {5});
      DenseFixture fx{random_vector(rng, 5)};
      return check_fixture(group, fx, std::move(p), opts, rng);
    }
    case LayerKind::dropout: {
      add("x", {8});
      DropoutFixture fx{0.5, rng.next_u64(), random_vector(rng, 8)};
      return check_fixture(group, fx, std::move(p), opts, rng);
    }
    case LayerKind::batchnorm: {
      add("x", {5, 3}, 2.0);
      add("gamma", {3});
      add("beta", {3});
      auto& mean = p.add("running_mean", {3}, false).value;
      auto& var = p.add("running_var", {3}, false).value;
      fill_uniform(mean, rng, 0.5);
      for (auto& v : var.data()) v = static_cast<float>(rng.uniform(0.5, 2.0));
      GradCheckReport r;
      for (bool training : {true, false}) {
        BatchNormFixture fx{training, random_vector(rng, 5 * 3)};
        r.append(check_fixture(group, fx, p, opts, rng));
      }
      return r;
    }
    case LayerKind::softmax:
    case LayerKind::sigmoid: {
      add("z", {6}, 3.0);
      ActivationFixture fx{kind == LayerKind::softmax ? nn::Activation::softmax : nn::Activation::sigmoid,
                           random_vector(rng, 6)};
      return check_fixture(group, fx, std::move(p), opts, rng);
    }
  }
  return {};
}

namespace gradcheck_detail {

struct ArchFixture {
  Network<float> net;
  NetworkFixture loss;
};

inline ArchFixture make_arch_fixture(Arch arch, Rng& rng) {
  const ModelConfig config = reduced_config(arch);
  ArchFixture fx{Network<float>(config), {}};
  fx.net.initialize(rng);
  // Default initial scales leave some gradients tiny; widen them so every
  // parameter carries signal at this size.
  for (auto& p : fx.net.params()) {
    if (!p.trainable) continue;
    const bool wide = p.name == param_names::embedding || p.name.starts_with("conv");
    fill_uniform(p.value, rng, wide ? 0.8 : 0.4);
  }
  fx.loss.mask_seed = rng.next_u64();
  const std::size_t batch = 3;
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<std::int32_t> ids(arch == Arch::fasttext ? 1 + rng.below(6) : 2 + rng.below(5));
    for (auto& id : ids) id = static_cast<std::int32_t>(rng.below(config.vocab_size));
    fx.loss.batch.push_back(fx.net.prepare(ids));
    LabelMask gold;
    gold.set(rng.below(kNumLabels));
    if (rng.bernoulli(0.3)) gold.set(rng.below(kNumLabels));
    fx.loss.gold.push_back(gold);
    fx.loss.targets.push_back(rng.below(kNumLabels));
  }
  return fx;
}

}  // namespace gradcheck_detail

/// Checks a whole reduced-size architecture with its training-mode loss.
inline GradCheckReport check_architecture(Arch arch, std::uint64_t seed, const GradCheckOptions& opts) {
  Rng rng(seed);
  auto fx = gradcheck_detail::make_arch_fixture(arch, rng);
  auto analytic = fx.net.cast<double>();
  fx.loss.run(analytic, true);
  auto reference = fx.net.cast<double>();
  return grad_check<double>(arch_group(arch), reference.params(), analytic.params(),
                            [&] { return fx.loss.run(reference, false); }, opts, rng);
}

/// Largest deviation of the float32 gradient from the double one, per tensor
/// scaled by the double gradient's max-norm.
inline double float_consistency(Arch arch, std::uint64_t seed) {
  Rng rng(seed);
  auto fx = gradcheck_detail::make_arch_fixture(arch, rng);
  auto reference = fx.net.cast<double>();
  fx.net.params().zero_grad();
  fx.loss.run(fx.net, true);
  fx.loss.run(reference, true);
  double worst = 0.0;
  for (const auto& p : reference.params()) {
    if (!p.trainable) continue;
    const auto& g32 = fx.net.params().get(p.name).grad;
    double norm = 0.0, dev = 0.0;
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      norm = std::max(norm, std::abs(p.grad[i]));
      dev = std::max(dev, std::abs(p.grad[i] - static_cast<double>(g32[i])));
    }
    worst = std::max(worst, dev / std::max(norm, 1e-8));
  }
  return worst;
}

struct GradCheckSuiteOptions {
  GradCheckOptions check;
  std::uint64_t seed = 1;
  std::size_t seeds = 10;
  bool layers = true;
  std::optional<Arch> only_arch;  // all five when empty
};

/// Every layer kind and architecture, each over `seeds` consecutive seeds.
inline GradCheckReport run_gradcheck_suite(const GradCheckSuiteOptions& opts) {
  GradCheckReport report;
  for (std::size_t s = 0; s < opts.seeds; ++s) {
    const std::uint64_t seed = opts.seed + s;
    if (opts.layers) {
      for (auto kind : nn::kAllLayerKinds) report.append(check_layer(kind, seed, opts.check));
    }
    for (Arch arch : kAllArchs) {
      if (opts.only_arch && *opts.only_arch != arch) continue;
      report.append(check_architecture(arch, seed, opts.check));
    }
  }
  return report;
}

}  // namespace fbclf
