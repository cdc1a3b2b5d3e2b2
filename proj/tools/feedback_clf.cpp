// feedback-clf: train / predict / evaluate / gradcheck / stats.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "feedback_clf/corpus.hpp"
#include "feedback_clf/error.hpp"
#include "feedback_clf/gradcheck.hpp"
#include "feedback_clf/io.hpp"
#include "feedback_clf/metrics.hpp"
#include "feedback_clf/models.hpp"
#include "feedback_clf/pipeline.hpp"

namespace {

using namespace fbclf;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitData = 2;
constexpr int kExitConfig = 3;
constexpr int kExitVersion = 4;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("FEEDBACK_CLF_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("FEEDBACK_CLF_SEED is not an unsigned integer: '") + env + "'");
  }
  return 1;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

void warn_language(const std::string& lang) {
  if (lang == "ja") {
    std::cerr << "warning: whitespace tokenization is ineffective for Japanese; scores carry a "
              << kJapaneseCaveat << "\n";
  }
}

struct TrainArgs {
  std::string arch = "fasttext";
  std::string train, dev, model_out, history_out, report_out;
  std::optional<std::uint64_t> seed;
  RunOptions run;
  std::string dropout_reading;
  bool no_early_stopping = false;
  bool no_shuffle = false;
};

int cmd_train(TrainArgs& a) {
  a.run.arch = parse_arch(a.arch);
  a.run.seed = resolve_seed(a.seed);
  check_language(a.run.language);
  if (!a.dropout_reading.empty()) {
    a.run.dropout_reading = a.dropout_reading == "drop" ? DropoutReading::drop : DropoutReading::keep;
  }
  if (a.no_early_stopping) a.run.early_stopping = false;
  if (a.no_shuffle) a.run.shuffle = false;
  warn_language(a.run.language);

  auto train_set = load_dataset(a.train, nullptr, a.run.clean_english).examples;
  std::vector<Example> dev_set;
  if (!a.dev.empty()) dev_set = load_dataset(a.dev, nullptr, a.run.clean_english).examples;
  if (dev_set.empty() && train_config_for(a.run).early_stopping) {
    std::cerr << "note: no dev set given; early stopping disabled\n";
  }

  auto result = train_run(train_set, dev_set, a.run);
  save_model(a.model_out, result.model);
  write_text(a.history_out.empty() ? a.model_out + ".history.json" : a.history_out, history_to_json(result.history));
  if (result.dev_report) {
    const auto json = report_to_json(*result.dev_report, caveat_for(a.run.language));
    std::cout << json;
    if (!a.report_out.empty()) write_text(a.report_out, json);
  }
  return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& input, const std::string& out_path) {
  const auto model = load_model(model_path);
  auto ds = load_dataset(input, &model.vocab, model.clean_english, LabelColumn::optional);
  std::vector<std::vector<std::int32_t>> inputs;
  inputs.reserve(ds.examples.size());
  for (const auto& e : ds.examples) inputs.push_back(e.token_ids);
  const auto preds = predict_all(model, inputs);

  std::ostringstream os;
  char score[32];
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::snprintf(score, sizeof score, "%.6f", static_cast<double>(preds[i].scores[preds[i].label_index]));
    os << ds.examples[i].id << '\t' << LabelSet::name(preds[i].label_index) << '\t' << score << '\n';
  }
  if (out_path.empty()) {
    std::cout << os.str();
  } else {
    write_text(out_path, os.str());
  }
  return kExitOk;
}

/// Prediction TSV: id<TAB>label[,label]*[<TAB>score].
std::vector<std::pair<std::string, LabelMask>> read_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open predictions file '" + path + "'");
  std::vector<std::pair<std::string, LabelMask>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw DataError(path + ": blank line at line " + std::to_string(lineno));
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ": malformed prediction at line " + std::to_string(lineno) + ": expected id and labels");
    }
    const auto tab2 = line.find('\t', tab + 1);
    const std::string labels = line.substr(tab + 1, tab2 == std::string::npos ? std::string::npos : tab2 - tab - 1);
    try {
      out.emplace_back(line.substr(0, tab), parse_labels(labels, lineno));
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what());
    }
  }
  return out;
}

int cmd_evaluate(const std::string& model_path, const std::string& predictions, const std::string& gold_path,
                 std::string language, const std::string& report_out) {
  std::vector<LabelMask> pred, gold;
  if (!model_path.empty()) {
    const auto model = load_model(model_path);
    if (language.empty()) language = model.language;
    const auto ds = load_dataset(gold_path, &model.vocab, model.clean_english);
    const auto report = evaluate(model, ds.examples);
    const auto json = report_to_json(report, caveat_for(language));
    std::cout << json;
    if (!report_out.empty()) write_text(report_out, json);
    return kExitOk;
  }
  const auto ds = load_dataset(gold_path, nullptr, false);
  const auto preds = read_predictions(predictions);
  const std::size_t n = std::min(preds.size(), ds.examples.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (preds[i].first != ds.examples[i].id) {
      throw DataError("id mismatch at line " + std::to_string(i + 1) + ": prediction '" + preds[i].first +
                      "' vs gold '" + ds.examples[i].id + "'");
    }
  }
  if (preds.size() != ds.examples.size()) {
    const bool extra_pred = preds.size() > ds.examples.size();
    throw DataError("id mismatch: " + std::string(extra_pred ? "prediction" : "gold") + " id '" +
                    (extra_pred ? preds[n].first : ds.examples[n].id) + "' has no counterpart");
  }
  for (std::size_t i = 0; i < n; ++i) {
    pred.push_back(preds[i].second);
    gold.push_back(ds.examples[i].gold);
  }
  if (!language.empty()) check_language(language);
  const auto json = report_to_json(evaluate_sets(pred, gold), caveat_for(language));
  std::cout << json;
  if (!report_out.empty()) write_text(report_out, json);
  return kExitOk;
}

struct GradcheckArgs {
  std::string arch;
  std::optional<std::uint64_t> seed;
  std::size_t seeds = 10;
  bool archs_only = false;
  std::string inject_fault;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  GradCheckSuiteOptions o;
  o.seed = resolve_seed(a.seed);
  o.seeds = a.seeds;
  o.layers = !a.archs_only;
  o.check.inject_fault = a.inject_fault;
  if (!a.arch.empty()) o.only_arch = parse_arch(a.arch);
  if (o.seeds < 1) throw ConfigError("--seeds must be at least 1");

  const auto report = run_gradcheck_suite(o);

  struct Row {
    std::size_t checked = 0, skipped = 0;
    double worst = 0.0;
    std::uint64_t worst_seed = 0;
    std::size_t worst_index = 0;
    bool passed = true;
  };
  // Entries arrive seed-major in a fixed group order; keep first-seen order.
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, Row> rows;
  const std::size_t per_seed = report.entries.size() / o.seeds;
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const auto& e = report.entries[i];
    const auto key = std::make_pair(e.group, e.param);
    auto [it, fresh] = rows.try_emplace(key);
    if (fresh) order.push_back(key);
    auto& r = it->second;
    r.checked += e.checked;
    r.skipped += e.skipped;
    r.passed = r.passed && e.passed;
    if (e.max_rel_error >= r.worst) {
      r.worst = e.max_rel_error;
      r.worst_seed = o.seed + i / per_seed;
      r.worst_index = e.worst_index;
    }
  }

  char buf[256];
  std::size_t failures = 0;
  for (const auto& key : order) {
    const auto& r = rows[key];
    std::snprintf(buf, sizeof buf, "%-4s %-20s %-22s max_rel_error=%.3e checked=%zu skipped=%zu", r.passed ? "PASS" : "FAIL",
                  key.first.c_str(), key.second.c_str(), r.worst, r.checked, r.skipped);
    std::cout << buf;
    if (!r.passed) {
      ++failures;
      std::cout << " seed=" << r.worst_seed << " coord=" << r.worst_index;
    }
    std::cout << "\n";
  }

  std::size_t drift_failures = 0;
  for (Arch arch : kAllArchs) {
    if (o.only_arch && *o.only_arch != arch) continue;
    double worst = 0.0;
    for (std::size_t s = 0; s < o.seeds; ++s) worst = std::max(worst, float_consistency(arch, o.seed + s));
    const bool ok = worst < o.check.tol;
    drift_failures += ok ? 0 : 1;
    std::snprintf(buf, sizeof buf, "%-4s %-20s %-22s max_rel_error=%.3e", ok ? "PASS" : "FAIL",
                  arch_group(arch).c_str(), "float32-vs-double", worst);
    std::cout << buf << "\n";
  }

  std::snprintf(buf, sizeof buf, "gradcheck: %zu tensors over %zu seed(s), max relative error %.3e (tol %.0e, eps %.0e)",
                order.size(), o.seeds, report.max_rel_error(), o.check.tol, o.check.eps);
  std::cout << buf << "\n";
  if (failures + drift_failures > 0) {
    for (const auto& key : order) {
      const auto& r = rows[key];
      if (r.passed) continue;
      std::snprintf(buf, sizeof buf, "gradcheck failed: %s %s relative error %.3e", key.first.c_str(),
                    key.second.c_str(), r.worst);
      std::cerr << buf << "\n";
    }
    return kExitCheckFailed;
  }
  return kExitOk;
}

int cmd_stats(const std::string& path, bool clean_english) {
  const auto ds = load_dataset(path, nullptr, clean_english);
  std::cout << stats_to_json(corpus_stats(ds.examples));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Customer-feedback text classifiers: train, predict, evaluate, gradcheck, stats"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "feedback-clf 1.0.0");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model and write it with its per-epoch history");
  train->add_option("--arch", ta.arch, "fasttext, cnn, bilstm1, bilstm2 or bilstm3")
      ->check(CLI::IsMember({"fasttext", "cnn", "bilstm1", "bilstm2", "bilstm3"}));
  train->add_option("--train", ta.train, "Training corpus TSV")->required();
  train->add_option("--dev", ta.dev, "Dev corpus TSV (enables early stopping for bilstm*)");
  train->add_option("--model-out", ta.model_out, "Model file to write")->required();
  train->add_option("--history-out", ta.history_out, "History JSON (default: <model-out>.history.json)");
  train->add_option("--report-out", ta.report_out, "Also write the dev report JSON here");
  train->add_option("--seed", ta.seed, "Run seed (fallback: FEEDBACK_CLF_SEED, then 1)");
  train->add_option("--epochs", ta.run.epochs);
  train->add_option("--batch-size", ta.run.batch_size);
  train->add_option("--lr", ta.run.learning_rate);
  train->add_option("--patience", ta.run.patience);
  train->add_option("--max-len", ta.run.max_len, "Padded length for cnn/bilstm (default: longest sentence, <= 256)");
  train->add_option("--embed-dim", ta.run.embed_dim);
  train->add_option("--lstm-units", ta.run.lstm_units);
  train->add_option("--filters", ta.run.conv_filters);
  train->add_option("--dropout", ta.run.dropout, "Dropout setting, read per --dropout-reading");
  train->add_option("--dropout-reading", ta.dropout_reading, "keep: the setting is the retention probability")
      ->check(CLI::IsMember({"keep", "drop"}));
  train->add_option("--min-count", ta.run.min_count);
  train->add_option("--max-vocab", ta.run.max_vocab);
  train->add_flag("--no-early-stopping", ta.no_early_stopping);
  train->add_flag("--no-shuffle", ta.no_shuffle);
  train->add_flag("--clean-english", ta.run.clean_english, "Apply the English text cleaning rules");
  train->add_option("--language", ta.run.language, "en, es, fr or ja");

  std::string p_model, p_input, p_out;
  auto* predict = app.add_subcommand("predict", "Print id<TAB>label<TAB>score per input line");
  predict->add_option("--model", p_model)->required();
  predict->add_option("--test,--input", p_input, "TSV; the label column is optional")->required();
  predict->add_option("--predictions,-o", p_out, "Write here instead of stdout");

  std::string e_model, e_preds, e_gold, e_lang, e_report;
  auto* eval = app.add_subcommand("evaluate", "Score a model or a predictions TSV against gold labels");
  auto* e_model_opt = eval->add_option("--model", e_model);
  auto* e_preds_opt = eval->add_option("--predictions", e_preds, "id<TAB>label[,label]*[<TAB>score]");
  e_model_opt->excludes(e_preds_opt);
  eval->add_option("--test,--gold", e_gold, "Gold corpus TSV")->required();
  eval->add_option("--language", e_lang);
  eval->add_option("--report-out", e_report);

  GradcheckArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer and architecture");
  gc->add_option("--arch", ga.arch, "Restrict the architecture checks to one");
  gc->add_option("--seed", ga.seed, "First seed (fallback: FEEDBACK_CLF_SEED, then 1)");
  gc->add_option("--seeds", ga.seeds, "Number of consecutive seeds");
  gc->add_flag("--archs-only", ga.archs_only, "Skip the per-layer checks");
  gc->add_option("--inject-fault", ga.inject_fault)->group("");

  std::string s_path;
  bool s_clean = false;
  auto* stats = app.add_subcommand("stats", "Label distribution of a corpus");
  stats->add_option("--train,--input", s_path)->required();
  stats->add_flag("--clean-english", s_clean);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return cmd_train(ta);
    if (*predict) return cmd_predict(p_model, p_input, p_out);
    if (*eval) {
      if (e_model.empty() == e_preds.empty()) throw ConfigError("evaluate needs exactly one of --model or --predictions");
      return cmd_evaluate(e_model, e_preds, e_gold, e_lang, e_report);
    }
    if (*gc) return cmd_gradcheck(ga);
    if (*stats) return cmd_stats(s_path, s_clean);
  } catch (const FormatVersionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVersion;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}
