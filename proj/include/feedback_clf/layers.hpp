#pragma once

// Forward and backward passes for every layer kind used by the classifiers.
//
// Conventions: sequences are [T x D] row-major tensors, one row per time step.
// Backward functions return the gradient with respect to the layer input and
// accumulate (+=) parameter gradients into caller-owned buffers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedback_clf/error.hpp"
#include "feedback_clf/rng.hpp"
#include "feedback_clf/tensor.hpp"

namespace fbclf::nn {

enum class LayerKind {
  embedding,
  average,
  conv1d,
  maxpool1d,
  globalmaxpool,
  bilstm,
  dense,
  dropout,
  batchnorm,
  softmax,
  sigmoid,
};

inline constexpr LayerKind kAllLayerKinds[] = {
    LayerKind::embedding, LayerKind::average,   LayerKind::conv1d,  LayerKind::maxpool1d,
    LayerKind::globalmaxpool, LayerKind::bilstm, LayerKind::dense,  LayerKind::dropout,
    LayerKind::batchnorm, LayerKind::softmax,   LayerKind::sigmoid,
};

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::embedding: return "embedding";
    case LayerKind::average: return "average";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::maxpool1d: return "maxpool1d";
    case LayerKind::globalmaxpool: return "globalmaxpool";
    case LayerKind::bilstm: return "bilstm";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::softmax: return "softmax";
    case LayerKind::sigmoid: return "sigmoid";
  }
  return "?";
}

/// Layer kind plus the hyperparameters that kind uses; unused fields stay zero.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t width = 0;
  std::size_t pool = 0;
  double keep_prob = 1.0;
  double momentum = 0.99;
  double eps = 1e-3;

  void validate() const {
    auto positive = [&](std::size_t v, const char* what) {
      if (v == 0) throw ConfigError(std::string(to_string(kind)) + ": " + what + " must be positive");
    };
    switch (kind) {
      case LayerKind::embedding:
      case LayerKind::dense:
      case LayerKind::bilstm:
        positive(in_dim, "input dim");
        positive(out_dim, "output dim");
        break;
      case LayerKind::conv1d:
        positive(in_dim, "input dim");
        positive(out_dim, "filter count");
        positive(width, "filter width");
        break;
      case LayerKind::maxpool1d:
        positive(pool, "pool size");
        break;
      case LayerKind::dropout:
        if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw ConfigError("dropout: keep probability must be in (0,1]");
        break;
      case LayerKind::batchnorm:
        positive(in_dim, "feature dim");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("batchnorm: momentum must be in [0,1)");
        if (!(eps > 0.0)) throw ConfigError("batchnorm: eps must be positive");
        break;
      default:
        break;
    }
  }
};

// ---------------------------------------------------------------------------
// Scalar activations

template <class T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <class T>
T relu(T x) {
  return x > T{0} ? x : T{0};
}

template <class T>
std::vector<T> softmax(std::span<const T> z) {
  std::vector<T> out(z.size());
  if (z.empty()) return out;
  const T shift = *std::max_element(z.begin(), z.end());
  T sum{0};
  for (std::size_t i = 0; i < z.size(); ++i) sum += (out[i] = std::exp(z[i] - shift));
  for (auto& v : out) v /= sum;
  return out;
}

template <class T>
std::vector<T> sigmoid(std::span<const T> z) {
  std::vector<T> out(z.size());
  std::transform(z.begin(), z.end(), out.begin(), [](T v) { return sigmoid(v); });
  return out;
}

/// Gradient through softmax: dz = s * (ds - <ds, s>).
template <class T>
std::vector<T> softmax_backward(std::span<const T> s, std::span<const T> ds) {
  T dot{0};
  for (std::size_t i = 0; i < s.size(); ++i) dot += ds[i] * s[i];
  std::vector<T> dz(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) dz[i] = s[i] * (ds[i] - dot);
  return dz;
}

template <class T>
std::vector<T> sigmoid_backward(std::span<const T> s, std::span<const T> ds) {
  std::vector<T> dz(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) dz[i] = ds[i] * s[i] * (T{1} - s[i]);
  return dz;
}

// ---------------------------------------------------------------------------
// Embedding

template <class T>
BasicTensor<T> embedding_forward(std::span<const std::int32_t> ids, const BasicTensor<T>& table) {
  const std::size_t rows = table.dim(0), dim = table.dim(1);
  BasicTensor<T> out({ids.size(), dim});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= rows) {
      throw ShapeError("embedding: id " + std::to_string(ids[t]) + " out of range for " +
                       std::to_string(rows) + " rows");
    }
    const auto src = table.row(static_cast<std::size_t>(ids[t]));
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

template <class T>
void embedding_backward(std::span<const std::int32_t> ids, const BasicTensor<T>& d_out,
                        BasicTensor<T>& d_table) {
  for (std::size_t t = 0; t < ids.size(); ++t) {
    auto dst = d_table.row(static_cast<std::size_t>(ids[t]));
    const auto src = d_out.row(t);
    for (std::size_t d = 0; d < dst.size(); ++d) dst[d] += src[d];
  }
}

// ---------------------------------------------------------------------------
// Average over time

template <class T>
BasicTensor<T> average_forward(const BasicTensor<T>& x) {
  if (x.rank() != 2 || x.dim(0) == 0) throw ShapeError("average: need at least one row");
  const std::size_t rows = x.dim(0), dim = x.dim(1);
  BasicTensor<T> out({dim});
  for (std::size_t t = 0; t < rows; ++t) {
    const auto r = x.row(t);
    for (std::size_t d = 0; d < dim; ++d) out[d] += r[d];
  }
  const T inv = T{1} / static_cast<T>(rows);
  for (std::size_t d = 0; d < dim; ++d) out[d] *= inv;
  return out;
}

template <class T>
BasicTensor<T> average_backward(const BasicTensor<T>& d_out, std::size_t rows) {
  const std::size_t dim = d_out.size();
  BasicTensor<T> dx({rows, dim});
  const T inv = T{1} / static_cast<T>(rows);
  for (std::size_t t = 0; t < rows; ++t) {
    auto r = dx.row(t);
    for (std::size_t d = 0; d < dim; ++d) r[d] = d_out[d] * inv;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// 1-D valid convolution, kernels [K x w x D]

template <class T>
BasicTensor<T> conv1d_forward(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                              const BasicTensor<T>& bias, bool use_relu) {
  const std::size_t steps = x.dim(0), dim = x.dim(1);
  const std::size_t filters = kernel.dim(0), width = kernel.dim(1);
  if (kernel.dim(2) != dim) throw ShapeError("conv1d: kernel depth does not match input dim");
  require_shape(bias, {filters}, "conv1d bias");
  if (steps < width) {
    throw ShapeError("conv1d: sequence length " + std::to_string(steps) + " is shorter than filter width " +
                     std::to_string(width) + "; use a larger max_len or a smaller width");
  }
  const std::size_t out_steps = steps - width + 1, span_len = width * dim;
  BasicTensor<T> out({out_steps, filters});
  for (std::size_t t = 0; t < out_steps; ++t) {
    const T* window = x.ptr() + t * dim;
    for (std::size_t k = 0; k < filters; ++k) {
      const T* w = kernel.ptr() + k * span_len;
      T acc{0};
      for (std::size_t j = 0; j < span_len; ++j) acc += w[j] * window[j];
      acc += bias[k];
      out.at(t, k) = use_relu ? relu(acc) : acc;
    }
  }
  return out;
}

/// `out` is the forward output; with ReLU, positions where out == 0 receive no gradient.
template <class T>
BasicTensor<T> conv1d_backward(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                               const BasicTensor<T>& out, bool use_relu, const BasicTensor<T>& d_out,
                               BasicTensor<T>& d_kernel, BasicTensor<T>& d_bias) {
  const std::size_t dim = x.dim(1), filters = kernel.dim(0), width = kernel.dim(1);
  const std::size_t out_steps = out.dim(0), span_len = width * dim;
  BasicTensor<T> dx(x.shape());
  for (std::size_t t = 0; t < out_steps; ++t) {
    const T* window = x.ptr() + t * dim;
    T* d_window = dx.ptr() + t * dim;
    for (std::size_t k = 0; k < filters; ++k) {
      T g = d_out.at(t, k);
      if (use_relu && !(out.at(t, k) > T{0})) g = T{0};
      if (g == T{0}) continue;
      d_bias[k] += g;
      const T* w = kernel.ptr() + k * span_len;
      T* dw = d_kernel.ptr() + k * span_len;
      for (std::size_t j = 0; j < span_len; ++j) {
        dw[j] += g * window[j];
        d_window[j] += g * w[j];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Max pooling

template <class T>
struct PoolResult {
  BasicTensor<T> out;
  std::vector<std::uint32_t> argmax;  // source row per output element, row-major like `out`
};

/// Non-overlapping windows of `pool` rows; trailing rows that do not fill a window are dropped.
template <class T>
PoolResult<T> maxpool1d_forward(const BasicTensor<T>& x, std::size_t pool) {
  const std::size_t steps = x.dim(0), channels = x.dim(1);
  if (pool == 0) throw ConfigError("maxpool1d: pool size must be positive");
  if (steps < pool) {
    throw ShapeError("maxpool1d: sequence length " + std::to_string(steps) + " is shorter than pool size " +
                     std::to_string(pool));
  }
  const std::size_t out_steps = steps / pool;
  PoolResult<T> r{BasicTensor<T>({out_steps, channels}), std::vector<std::uint32_t>(out_steps * channels)};
  for (std::size_t o = 0; o < out_steps; ++o) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::size_t best = o * pool;
      for (std::size_t t = o * pool + 1; t < (o + 1) * pool; ++t) {
        if (x.at(t, c) > x.at(best, c)) best = t;  // strict: first index wins ties
      }
      r.out.at(o, c) = x.at(best, c);
      r.argmax[o * channels + c] = static_cast<std::uint32_t>(best);
    }
  }
  return r;
}

template <class T>
BasicTensor<T> maxpool1d_backward(const BasicTensor<T>& d_out, std::span<const std::uint32_t> argmax,
                                  std::size_t in_steps) {
  const std::size_t channels = d_out.dim(1);
  BasicTensor<T> dx({in_steps, channels});
  for (std::size_t i = 0; i < d_out.size(); ++i) dx.at(argmax[i], i % channels) += d_out[i];
  return dx;
}

/// Max over time per channel; output is rank 1 [K].
template <class T>
PoolResult<T> globalmaxpool_forward(const BasicTensor<T>& x) {
  if (x.dim(0) == 0) throw ShapeError("globalmaxpool: empty sequence");
  auto r = maxpool1d_forward(x, x.dim(0));
  r.out = BasicTensor<T>({x.dim(1)}, std::vector<T>(r.out.data().begin(), r.out.data().end()));
  return r;
}

template <class T>
BasicTensor<T> globalmaxpool_backward(const BasicTensor<T>& d_out, std::span<const std::uint32_t> argmax,
                                      std::size_t in_steps) {
  BasicTensor<T> dx({in_steps, d_out.size()});
  for (std::size_t c = 0; c < d_out.size(); ++c) dx.at(argmax[c], c) += d_out[c];
  return dx;
}

// ---------------------------------------------------------------------------
// LSTM
//
// Gate blocks are packed i, f, g, o along the last axis:
//   kernel [D x 4H], recurrent [H x 4H], bias [4H].

template <class T>
struct LstmWeights {
  const BasicTensor<T>& kernel;
  const BasicTensor<T>& recurrent;
  const BasicTensor<T>& bias;

  std::size_t input_dim() const { return kernel.dim(0); }
  std::size_t units() const { return recurrent.dim(0); }

  void check(std::size_t input_dim) const {
    const std::size_t h = units();
    if (kernel.rank() != 2 || kernel.dim(0) != input_dim || kernel.dim(1) != 4 * h ||
        recurrent.rank() != 2 || recurrent.dim(1) != 4 * h || bias.size() != 4 * h) {
      throw ShapeError("lstm: parameter shapes " + shape_string(kernel.shape()) + ", " +
                       shape_string(recurrent.shape()) + ", " + shape_string(bias.shape()) +
                       " do not match input dim " + std::to_string(input_dim));
    }
  }
};

template <class T>
struct LstmGrads {
  BasicTensor<T>& kernel;
  BasicTensor<T>& recurrent;
  BasicTensor<T>& bias;
};

template <class T>
struct LstmStepResult {
  std::vector<T> gates;  // activated i, f, g, o (4H)
  std::vector<T> h;
  std::vector<T> c;
};

template <class T>
LstmStepResult<T> lstm_step(std::span<const T> x, std::span<const T> h_prev, std::span<const T> c_prev,
                            const LstmWeights<T>& w) {
  const std::size_t dim = x.size(), units = w.units(), four = 4 * units;
  w.check(dim);
  if (h_prev.size() != units || c_prev.size() != units) throw ShapeError("lstm: state size mismatch");
  LstmStepResult<T> r{std::vector<T>(w.bias.data().begin(), w.bias.data().end()), std::vector<T>(units),
                      std::vector<T>(units)};
  auto& z = r.gates;
  for (std::size_t d = 0; d < dim; ++d) {
    const T xv = x[d];
    if (xv == T{0}) continue;
    const T* k = w.kernel.ptr() + d * four;
    for (std::size_t j = 0; j < four; ++j) z[j] += xv * k[j];
  }
  for (std::size_t u = 0; u < units; ++u) {
    const T hv = h_prev[u];
    if (hv == T{0}) continue;
    const T* rr = w.recurrent.ptr() + u * four;
    for (std::size_t j = 0; j < four; ++j) z[j] += hv * rr[j];
  }
  for (std::size_t u = 0; u < units; ++u) {
    const T i = sigmoid(z[u]);
    const T f = sigmoid(z[units + u]);
    const T g = std::tanh(z[2 * units + u]);
    const T o = sigmoid(z[3 * units + u]);
    z[u] = i;
    z[units + u] = f;
    z[2 * units + u] = g;
    z[3 * units + u] = o;
    r.c[u] = f * c_prev[u] + i * g;
    r.h[u] = o * std::tanh(r.c[u]);
  }
  return r;
}

/// Everything a backward pass over one direction needs.
template <class T>
struct LstmTrace {
  bool reversed = false;
  std::size_t units = 0;
  BasicTensor<T> gates;   // [T x 4H], step order
  BasicTensor<T> cells;   // [T x H]
  BasicTensor<T> hidden;  // [T x H]

  std::span<const T> final_hidden() const { return hidden.row(hidden.dim(0) - 1); }
};

/// Runs the sequence from zero state, in reverse row order when `reversed`.
template <class T>
LstmTrace<T> lstm_forward(const BasicTensor<T>& x, const LstmWeights<T>& w, bool reversed) {
  const std::size_t steps = x.dim(0), units = w.units();
  if (steps == 0) throw ShapeError("lstm: empty sequence");
  w.check(x.dim(1));
  LstmTrace<T> tr{reversed, units, BasicTensor<T>({steps, 4 * units}), BasicTensor<T>({steps, units}),
                  BasicTensor<T>({steps, units})};
  std::vector<T> h(units, T{0}), c(units, T{0});
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t row = reversed ? steps - 1 - s : s;
    auto step = lstm_step<T>(x.row(row), h, c, w);
    std::copy(step.gates.begin(), step.gates.end(), tr.gates.row(s).begin());
    std::copy(step.c.begin(), step.c.end(), tr.cells.row(s).begin());
    std::copy(step.h.begin(), step.h.end(), tr.hidden.row(s).begin());
    h = std::move(step.h);
    c = std::move(step.c);
  }
  return tr;
}

/// Backpropagation through time from a gradient on the final hidden state only.
template <class T>
BasicTensor<T> lstm_backward(const BasicTensor<T>& x, const LstmWeights<T>& w, const LstmTrace<T>& tr,
                             std::span<const T> d_final_h, LstmGrads<T> g) {
  const std::size_t steps = x.dim(0), dim = x.dim(1), units = tr.units, four = 4 * units;
  BasicTensor<T> dx(x.shape());
  std::vector<T> dh(d_final_h.begin(), d_final_h.end()), dc(units, T{0}), dz(four);
  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t row = tr.reversed ? steps - 1 - s : s;
    const auto gates = tr.gates.row(s);
    const auto cell = tr.cells.row(s);
    for (std::size_t u = 0; u < units; ++u) {
      const T i = gates[u], f = gates[units + u], gg = gates[2 * units + u], o = gates[3 * units + u];
      const T tc = std::tanh(cell[u]);
      const T c_prev = s > 0 ? tr.cells.at(s - 1, u) : T{0};
      const T d_o = dh[u] * tc;
      const T d_c = dc[u] + dh[u] * o * (T{1} - tc * tc);
      dz[u] = d_c * gg * i * (T{1} - i);
      dz[units + u] = d_c * c_prev * f * (T{1} - f);
      dz[2 * units + u] = d_c * i * (T{1} - gg * gg);
      dz[3 * units + u] = d_o * o * (T{1} - o);
      dc[u] = d_c * f;
    }
    for (std::size_t j = 0; j < four; ++j) g.bias[j] += dz[j];
    const auto xr = x.row(row);
    auto dxr = dx.row(row);
    for (std::size_t d = 0; d < dim; ++d) {
      const T* k = w.kernel.ptr() + d * four;
      T* dk = g.kernel.ptr() + d * four;
      T acc{0};
      for (std::size_t j = 0; j < four; ++j) {
        dk[j] += xr[d] * dz[j];
        acc += k[j] * dz[j];
      }
      dxr[d] += acc;
    }
    for (std::size_t u = 0; u < units; ++u) {
      const T h_prev = s > 0 ? tr.hidden.at(s - 1, u) : T{0};
      const T* rr = w.recurrent.ptr() + u * four;
      T* drr = g.recurrent.ptr() + u * four;
      T acc{0};
      for (std::size_t j = 0; j < four; ++j) {
        drr[j] += h_prev * dz[j];
        acc += rr[j] * dz[j];
      }
      dh[u] = acc;
    }
  }
  return dx;
}

template <class T>
struct BiLstmTrace {
  LstmTrace<T> forward;
  LstmTrace<T> backward;
};

/// Final forward hidden state concatenated with the final hidden state of the reversed pass: [2H].
template <class T>
BasicTensor<T> bilstm_forward(const BasicTensor<T>& x, const LstmWeights<T>& fwd, const LstmWeights<T>& bwd,
                              BiLstmTrace<T>* trace = nullptr) {
  auto tf = lstm_forward(x, fwd, false);
  auto tb = lstm_forward(x, bwd, true);
  const std::size_t units = fwd.units();
  BasicTensor<T> out({units + bwd.units()});
  std::copy(tf.final_hidden().begin(), tf.final_hidden().end(), out.ptr());
  std::copy(tb.final_hidden().begin(), tb.final_hidden().end(), out.ptr() + units);
  if (trace) *trace = BiLstmTrace<T>{std::move(tf), std::move(tb)};
  return out;
}

template <class T>
BasicTensor<T> bilstm_backward(const BasicTensor<T>& x, const LstmWeights<T>& fwd, const LstmWeights<T>& bwd,
                               const BiLstmTrace<T>& tr, const BasicTensor<T>& d_out, LstmGrads<T> g_fwd,
                               LstmGrads<T> g_bwd) {
  const std::size_t units = fwd.units();
  const auto d = d_out.data();
  auto dx = lstm_backward(x, fwd, tr.forward, d.subspan(0, units), g_fwd);
  const auto dx_b = lstm_backward(x, bwd, tr.backward, d.subspan(units), g_bwd);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx_b[i];
  return dx;
}

// ---------------------------------------------------------------------------
// Dense

enum class Activation { none, sigmoid, softmax };

/// Logits z = x W + b for x [D], W [D x C].
template <class T>
BasicTensor<T> dense_logits(std::span<const T> x, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  const std::size_t in = weight.dim(0), out_dim = weight.dim(1);
  if (x.size() != in || bias.size() != out_dim) {
    throw ShapeError("dense: input " + std::to_string(x.size()) + " vs weight " + shape_string(weight.shape()) +
                     " vs bias " + shape_string(bias.shape()));
  }
  BasicTensor<T> z({out_dim}, std::vector<T>(bias.data().begin(), bias.data().end()));
  for (std::size_t d = 0; d < in; ++d) {
    const T xv = x[d];
    const T* wr = weight.ptr() + d * out_dim;
    for (std::size_t c = 0; c < out_dim; ++c) z[c] += xv * wr[c];
  }
  return z;
}

template <class T>
BasicTensor<T> activate(const BasicTensor<T>& z, Activation act) {
  switch (act) {
    case Activation::sigmoid: return BasicTensor<T>(z.shape(), sigmoid<T>(z.data()));
    case Activation::softmax: return BasicTensor<T>(z.shape(), softmax<T>(z.data()));
    case Activation::none: break;
  }
  return z;
}

template <class T>
BasicTensor<T> dense_forward(std::span<const T> x, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                             Activation act) {
  return activate(dense_logits(x, weight, bias), act);
}

/// Takes the gradient on the logits; returns dx.
template <class T>
BasicTensor<T> dense_backward(std::span<const T> x, const BasicTensor<T>& weight, std::span<const T> d_logits,
                              BasicTensor<T>& d_weight, BasicTensor<T>& d_bias) {
  const std::size_t in = weight.dim(0), out_dim = weight.dim(1);
  BasicTensor<T> dx({in});
  for (std::size_t c = 0; c < out_dim; ++c) d_bias[c] += d_logits[c];
  for (std::size_t d = 0; d < in; ++d) {
    const T* wr = weight.ptr() + d * out_dim;
    T* dwr = d_weight.ptr() + d * out_dim;
    T acc{0};
    for (std::size_t c = 0; c < out_dim; ++c) {
      dwr[c] += x[d] * d_logits[c];
      acc += wr[c] * d_logits[c];
    }
    dx[d] = acc;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dropout (inverted)

template <class T>
struct DropoutResult {
  BasicTensor<T> out;
  std::vector<T> mask;  // 0 or 1/keep per unit; empty when the layer was an identity
};

template <class T>
DropoutResult<T> dropout_forward(const BasicTensor<T>& x, double keep_prob, bool training, Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw ConfigError("dropout: keep probability must be in (0,1]");
  if (!training || keep_prob == 1.0) return {x, {}};
  DropoutResult<T> r{x, std::vector<T>(x.size())};
  const T scale = static_cast<T>(1.0 / keep_prob);
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.mask[i] = rng.bernoulli(keep_prob) ? scale : T{0};
    r.out[i] *= r.mask[i];
  }
  return r;
}

template <class T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& d_out, std::span<const T> mask) {
  if (mask.empty()) return d_out;
  BasicTensor<T> dx = d_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
  return dx;
}

// ---------------------------------------------------------------------------
// Batch normalization over rows of [N x K]

template <class T>
struct BatchNormTrace {
  bool training = false;
  BasicTensor<T> normalized;  // x-hat
  std::vector<T> inv_std;
};

template <class T>
struct BatchNormState {
  BasicTensor<T>& running_mean;
  BasicTensor<T>& running_var;
  double momentum = 0.99;
  double eps = 1e-3;
};

template <class T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                 BatchNormState<T> state, bool training, BatchNormTrace<T>* trace = nullptr) {
  const std::size_t rows = x.dim(0), features = x.dim(1);
  require_shape(gamma, {features}, "batchnorm gamma");
  require_shape(beta, {features}, "batchnorm beta");
  if (training && rows < 2) throw ShapeError("batchnorm: training needs a batch of at least 2 rows");

  std::vector<T> mean(features, T{0}), var(features, T{0});
  if (training) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < features; ++k) mean[k] += x.at(r, k);
    }
    for (auto& m : mean) m /= static_cast<T>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < features; ++k) {
        const T d = x.at(r, k) - mean[k];
        var[k] += d * d;
      }
    }
    for (auto& v : var) v /= static_cast<T>(rows);
    const T mom = static_cast<T>(state.momentum);
    for (std::size_t k = 0; k < features; ++k) {
      state.running_mean[k] = mom * state.running_mean[k] + (T{1} - mom) * mean[k];
      state.running_var[k] = mom * state.running_var[k] + (T{1} - mom) * var[k];
    }
  } else {
    for (std::size_t k = 0; k < features; ++k) {
      mean[k] = state.running_mean[k];
      var[k] = state.running_var[k];
    }
  }

  BatchNormTrace<T> tr{training, BasicTensor<T>(x.shape()), std::vector<T>(features)};
  for (std::size_t k = 0; k < features; ++k) tr.inv_std[k] = T{1} / std::sqrt(var[k] + static_cast<T>(state.eps));
  BasicTensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < features; ++k) {
      const T xh = (x.at(r, k) - mean[k]) * tr.inv_std[k];
      tr.normalized.at(r, k) = xh;
      out.at(r, k) = gamma[k] * xh + beta[k];
    }
  }
  if (trace) *trace = std::move(tr);
  return out;
}

template <class T>
BasicTensor<T> batchnorm_backward(const BasicTensor<T>& d_out, const BasicTensor<T>& gamma,
                                  const BatchNormTrace<T>& tr, BasicTensor<T>& d_gamma, BasicTensor<T>& d_beta) {
  const std::size_t rows = d_out.dim(0), features = d_out.dim(1);
  std::vector<T> sum_d(features, T{0}), sum_dx(features, T{0});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < features; ++k) {
      const T g = d_out.at(r, k);
      d_beta[k] += g;
      d_gamma[k] += g * tr.normalized.at(r, k);
      sum_d[k] += g * gamma[k];
      sum_dx[k] += g * gamma[k] * tr.normalized.at(r, k);
    }
  }
  BasicTensor<T> dx(d_out.shape());
  const T n = static_cast<T>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < features; ++k) {
      const T dxh = d_out.at(r, k) * gamma[k];
      if (tr.training) {
        dx.at(r, k) = tr.inv_std[k] / n * (n * dxh - sum_d[k] - tr.normalized.at(r, k) * sum_dx[k]);
      } else {
        dx.at(r, k) = dxh * tr.inv_std[k];
      }
    }
  }
  return dx;
}

}  // namespace fbclf::nn
