// Trains the fastText-style baseline on the toy corpus and labels a few sentences.
//
//   quickstart [data-dir]

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "feedback_clf/corpus.hpp"
#include "feedback_clf/metrics.hpp"
#include "feedback_clf/models.hpp"
#include "feedback_clf/pipeline.hpp"

#ifndef FEEDBACK_CLF_SAMPLE_DATA
#define FEEDBACK_CLF_SAMPLE_DATA "samples/data"
#endif

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using namespace fbclf;
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path(FEEDBACK_CLF_SAMPLE_DATA);

  try {
    auto train_set = load_dataset(dir / "toy_train.tsv", nullptr, true).examples;
    auto dev_set = load_dataset(dir / "toy_dev.tsv", nullptr, true).examples;

    RunOptions opts;
    opts.arch = Arch::fasttext;
    opts.seed = 42;
    opts.clean_english = true;
    auto run = train_run(train_set, dev_set, opts);

    std::printf("trained %zu epochs, final loss %.4f\n", run.history.epochs.size(),
                run.history.epochs.back().train_loss);
    std::printf("dev exact accuracy %.3f, micro F1 %.3f\n", run.dev_report->exact_accuracy,
                run.dev_report->micro.f1);

    for (const std::string text : {"The app crashes every time I log in", "Please add a dark theme", "Love it!"}) {
      const auto ids = lookup(tokenize(text, true), run.model.vocab);
      const auto p = predict(run.model, ids);
      std::printf("%-40s -> %s (%.3f)\n", text.c_str(), std::string(LabelSet::name(p.label_index)).c_str(),
                  static_cast<double>(p.scores[p.label_index]));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
