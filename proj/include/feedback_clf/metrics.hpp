#pragma once

// Exact accuracy, micro-averaged F1 and per-tag F1 over label sets.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "feedback_clf/corpus.hpp"
#include "feedback_clf/error.hpp"
#include "feedback_clf/models.hpp"

namespace fbclf {

struct PrfScore {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Fills precision/recall/F1 from counts; zero denominators give 0.
inline PrfScore prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrfScore s{tp, fp, fn};
  s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  // 2PR/(P+R) written over counts, so equal-count cases come out exactly equal to P and R.
  s.f1 = tp ? static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn) : 0.0;
  return s;
}

struct EvalReport {
  std::size_t n_examples = 0;
  double exact_accuracy = 0.0;
  PrfScore micro;
  std::array<PrfScore, kNumLabels> per_tag;
};

namespace detail {
inline void check_pairs(std::span<const LabelMask> pred, std::span<const LabelMask> gold) {
  if (pred.size() != gold.size()) {
    throw DataError("prediction count " + std::to_string(pred.size()) + " differs from gold count " +
                    std::to_string(gold.size()));
  }
}
}  // namespace detail

inline double exact_accuracy(std::span<const LabelMask> pred, std::span<const LabelMask> gold) {
  detail::check_pairs(pred, gold);
  if (gold.empty()) return 0.0;
  std::size_t exact = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) exact += pred[i] == gold[i] ? 1 : 0;
  return static_cast<double>(exact) / static_cast<double>(gold.size());
}

inline std::array<PrfScore, kNumLabels> per_tag_f1(std::span<const LabelMask> pred, std::span<const LabelMask> gold) {
  detail::check_pairs(pred, gold);
  std::array<std::size_t, kNumLabels> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      tp[c] += pred[i][c] && gold[i][c];
      fp[c] += pred[i][c] && !gold[i][c];
      fn[c] += !pred[i][c] && gold[i][c];
    }
  }
  std::array<PrfScore, kNumLabels> out;
  for (std::size_t c = 0; c < kNumLabels; ++c) out[c] = prf_from_counts(tp[c], fp[c], fn[c]);
  return out;
}

/// Pools document-label decisions over every example.
inline PrfScore micro_f1(std::span<const LabelMask> pred, std::span<const LabelMask> gold) {
  detail::check_pairs(pred, gold);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    tp += (pred[i] & gold[i]).count();
    fp += (pred[i] & ~gold[i]).count();
    fn += (gold[i] & ~pred[i]).count();
  }
  return prf_from_counts(tp, fp, fn);
}

inline EvalReport evaluate_sets(std::span<const LabelMask> pred, std::span<const LabelMask> gold) {
  detail::check_pairs(pred, gold);
  if (gold.empty()) throw DataError("cannot evaluate an empty dataset");
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].none()) throw DataError("example " + std::to_string(i + 1) + " has no gold label");
  }
  EvalReport r;
  r.n_examples = gold.size();
  r.exact_accuracy = exact_accuracy(pred, gold);
  r.micro = micro_f1(pred, gold);
  r.per_tag = per_tag_f1(pred, gold);
  return r;
}

/// Singleton predictions from `model` scored against each example's gold set.
inline EvalReport evaluate(const TrainedModel& model, std::span<const Example> dataset) {
  if (dataset.empty()) throw DataError("cannot evaluate an empty dataset");
  std::vector<std::vector<std::int32_t>> inputs;
  std::vector<LabelMask> gold;
  inputs.reserve(dataset.size());
  for (const auto& e : dataset) {
    inputs.push_back(e.token_ids);
    gold.push_back(e.gold);
  }
  const auto preds = predict_all(model, inputs);
  std::vector<LabelMask> pred(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) pred[i].set(preds[i].label_index);
  return evaluate_sets(pred, gold);
}

}  // namespace fbclf
