#pragma once

#include <cmath>
#include <vector>

#include "feedback_clf/rng.hpp"
#include "feedback_clf/tensor.hpp"

namespace fbclf::init {

template <class T>
void uniform(BasicTensor<T>& t, Rng& rng, double limit) {
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-limit, limit));
}

template <class T>
void glorot_uniform(BasicTensor<T>& t, Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  uniform(t, rng, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

/// Orthonormal rows (or columns, whichever is the smaller count) from Gram-Schmidt on Gaussian draws.
template <class T>
void orthogonal(BasicTensor<T>& t, Rng& rng) {
  const std::size_t rows = t.dim(0), cols = t.size() / rows;
  const bool transpose = rows > cols;
  const std::size_t n = transpose ? cols : rows, len = transpose ? rows : cols;
  std::vector<std::vector<double>> basis;
  basis.reserve(n);
  while (basis.size() < n) {
    std::vector<double> v(len);
    for (auto& x : v) x = rng.normal();
    // Two passes of modified Gram-Schmidt for numerical orthogonality.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += v[i] * b[i];
        for (std::size_t i = 0; i < len; ++i) v[i] -= dot * b[i];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = transpose ? basis[c][r] : basis[r][c];
      t[r * cols + c] = static_cast<T>(v);
    }
  }
}

}  // namespace fbclf::init
