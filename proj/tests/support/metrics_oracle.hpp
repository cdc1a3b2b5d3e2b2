#pragma once

// Naive metric reference used as an oracle by the metric tests.

#include <cstddef>
#include <random>
#include <set>
#include <vector>

#include "feedback_clf/corpus.hpp"

namespace fbclf::testing {

// Naive reference: label sets as std::set, every count by explicit enumeration.
struct Brute {
  double exact = 0;
  double micro_p = 0, micro_r = 0, micro_f = 0;
  double tag_f[kNumLabels] = {};
  std::size_t tag_tp[kNumLabels] = {}, tag_fp[kNumLabels] = {}, tag_fn[kNumLabels] = {};
};

inline std::set<std::size_t> as_set(const LabelMask& m) {
  std::set<std::size_t> s;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    if (m.test(c)) s.insert(c);
  }
  return s;
}

inline double f1_of(double tp, double fp, double fn) {
  const double p = tp + fp == 0 ? 0 : tp / (tp + fp);
  const double r = tp + fn == 0 ? 0 : tp / (tp + fn);
  return p + r == 0 ? 0 : 2 * p * r / (p + r);
}

inline Brute brute_force(const std::vector<LabelMask>& pred, const std::vector<LabelMask>& gold) {
  Brute b;
  double tp = 0, fp = 0, fn = 0, exact = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto p = as_set(pred[i]), g = as_set(gold[i]);
    if (p == g) exact += 1;
    for (auto c : p) {
      if (g.count(c)) {
        tp += 1;
        b.tag_tp[c]++;
      } else {
        fp += 1;
        b.tag_fp[c]++;
      }
    }
    for (auto c : g) {
      if (!p.count(c)) {
        fn += 1;
        b.tag_fn[c]++;
      }
    }
  }
  b.exact = exact / static_cast<double>(gold.size());
  b.micro_p = tp + fp == 0 ? 0 : tp / (tp + fp);
  b.micro_r = tp + fn == 0 ? 0 : tp / (tp + fn);
  b.micro_f = f1_of(tp, fp, fn);
  for (std::size_t c = 0; c < kNumLabels; ++c) b.tag_f[c] = f1_of(b.tag_tp[c], b.tag_fp[c], b.tag_fn[c]);
  return b;
}

inline LabelMask random_set(std::mt19937& gen, std::size_t min_size) {
  std::uniform_int_distribution<std::size_t> size(min_size, 3), label(0, kNumLabels - 1);
  LabelMask m;
  const std::size_t n = size(gen);
  while (m.count() < n) m.set(label(gen));
  return m;
}

}  // namespace fbclf::testing
