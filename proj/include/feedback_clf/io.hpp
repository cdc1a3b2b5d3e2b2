#pragma once

// Model files, evaluation reports, training histories and corpus statistics on disk.
//
// Model file layout (all integers little-endian):
//   "OSCF"  u32 version  u64 config_length  config JSON (UTF-8)
//   then until EOF, one record per tensor:
//   u32 name_length  name  u32 rank  u32 dims[rank]  f32 data[prod(dims)]

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "feedback_clf/corpus.hpp"
#include "feedback_clf/error.hpp"
#include "feedback_clf/metrics.hpp"
#include "feedback_clf/models.hpp"
#include "feedback_clf/trainer.hpp"

namespace fbclf {

inline constexpr char kModelMagic[4] = {'O', 'S', 'C', 'F'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace io_detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline bool read_exact(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

inline std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!read_exact(in, reinterpret_cast<char*>(b), 4)) throw DataError(std::string("model file truncated in ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& in, const char* what) {
  const std::uint64_t lo = get_u32(in, what);
  const std::uint64_t hi = get_u32(in, what);
  return lo | (hi << 32);
}

inline std::string arch_name(Arch a) { return std::string(to_string(a)); }

}  // namespace io_detail

inline nlohmann::json config_to_json(const TrainedModel& model) {
  const auto& c = model.config;
  nlohmann::json j;
  j["arch"] = io_detail::arch_name(c.arch);
  j["vocab_size"] = c.vocab_size;
  j["embed_dim"] = c.embed_dim;
  j["lstm_units"] = c.lstm_units;
  j["conv_widths"] = c.conv_widths;
  j["conv_filters"] = c.conv_filters;
  j["pool_size"] = c.pool_size;
  j["dropout"] = c.dropout;
  j["dropout_reading"] = c.dropout_reading == DropoutReading::keep ? "keep" : "drop";
  j["max_len"] = c.max_len;
  j["n_labels"] = c.n_labels;
  j["padding"] = c.padding == PadSide::post ? "post" : "pre";
  j["bn_momentum"] = c.bn_momentum;
  j["bn_eps"] = c.bn_eps;
  j["labels"] = std::vector<std::string>(LabelSet::names.begin(), LabelSet::names.end());
  j["vocabulary"] = {{"tokens", model.vocab.tokens()}, {"min_count", model.vocab.min_count()}};
  if (model.vocab.max_size()) j["vocabulary"]["max_size"] = *model.vocab.max_size();
  j["clean_english"] = model.clean_english;
  j["language"] = model.language;
  return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.arch = parse_arch(j.at("arch").get<std::string>());
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.lstm_units = j.at("lstm_units").get<std::size_t>();
    c.conv_widths = j.at("conv_widths").get<std::vector<std::size_t>>();
    c.conv_filters = j.at("conv_filters").get<std::size_t>();
    c.pool_size = j.at("pool_size").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.dropout_reading = j.at("dropout_reading").get<std::string>() == "drop" ? DropoutReading::drop : DropoutReading::keep;
    c.max_len = j.at("max_len").get<std::size_t>();
    c.n_labels = j.at("n_labels").get<std::size_t>();
    c.padding = j.at("padding").get<std::string>() == "pre" ? PadSide::pre : PadSide::post;
    c.bn_momentum = j.at("bn_momentum").get<double>();
    c.bn_eps = j.at("bn_eps").get<double>();

    const auto labels = j.at("labels").get<std::vector<std::string>>();
    if (labels.size() != kNumLabels || !std::equal(labels.begin(), labels.end(), LabelSet::names.begin())) {
      throw DataError("model file label set differs from the six-tag label set");
    }
    const auto& v = j.at("vocabulary");
    std::optional<std::size_t> max_size;
    if (v.contains("max_size")) max_size = v.at("max_size").get<std::size_t>();
    auto vocab = Vocabulary::from_id_list(v.at("tokens").get<std::vector<std::string>>(),
                                          v.at("min_count").get<std::size_t>(), max_size);
    TrainedModel model(c, std::move(vocab));
    model.clean_english = j.value("clean_english", false);
    model.language = j.value("language", std::string());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file config is invalid: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("model file config is invalid: ") + e.what());
  }
}

inline void save_model(std::ostream& out, const TrainedModel& model) {
  out.write(kModelMagic, 4);
  io_detail::put_u32(out, kModelFormatVersion);
  const std::string config = config_to_json(model).dump();
  io_detail::put_u64(out, config.size());
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  for (const auto& p : model.network.params()) {
    io_detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    io_detail::put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) io_detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : p.value.data()) io_detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
}

inline void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write model file '" + path.string() + "'");
  save_model(out, model);
  if (!out) throw DataError("failed writing model file '" + path.string() + "'");
}

inline TrainedModel load_model(std::istream& in) {
  char magic[4];
  if (!io_detail::read_exact(in, magic, 4) || !std::equal(magic, magic + 4, kModelMagic)) {
    throw FormatVersionError("not a model file (bad magic bytes)");
  }
  const std::uint32_t version = io_detail::get_u32(in, "header");
  if (version != kModelFormatVersion) {
    throw FormatVersionError("unsupported model format version " + std::to_string(version) + " (expected " +
                             std::to_string(kModelFormatVersion) + ")");
  }
  const std::uint64_t config_len = io_detail::get_u64(in, "header");
  if (config_len > (std::uint64_t{1} << 32)) throw DataError("model file config length is implausible");
  std::string config(config_len, '\0');
  if (!io_detail::read_exact(in, config.data(), config.size())) throw DataError("model file truncated in config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file config is not valid JSON: ") + e.what());
  }
  TrainedModel model = model_from_json(j);

  auto& params = model.network.params();
  std::vector<bool> seen(params.size(), false);
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t name_len = io_detail::get_u32(in, "tensor record");
    if (name_len > 4096) throw DataError("model file tensor name length is implausible");
    std::string name(name_len, '\0');
    if (!io_detail::read_exact(in, name.data(), name_len)) throw DataError("model file truncated in tensor name");
    if (!params.contains(name)) throw DataError("model file has unexpected tensor '" + name + "'");
    auto& p = params.get(name);
    const std::uint32_t rank = io_detail::get_u32(in, "tensor record");
    Shape shape;
    for (std::uint32_t r = 0; r < rank && r < 8; ++r) shape.push_back(io_detail::get_u32(in, "tensor shape"));
    if (shape != p.value.shape()) {
      throw DataError("tensor '" + name + "' has shape " + shape_string(shape) + ", config implies " +
                      shape_string(p.value.shape()));
    }
    for (auto& v : p.value.data()) v = std::bit_cast<float>(io_detail::get_u32(in, "tensor data"));
    seen[static_cast<std::size_t>(&p - &*params.begin())] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw DataError("model file is missing tensor '" + (params.begin() + static_cast<std::ptrdiff_t>(i))->name + "'");
  }
  return model;
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path.string() + "'");
  return load_model(in);
}

// ---------------------------------------------------------------------------
// JSON documents

namespace io_detail {
inline std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace io_detail

/// Evaluation report with every fraction printed to 6 decimal places.
inline std::string report_to_json(const EvalReport& r, const std::string& caveat = {}) {
  using io_detail::fixed6;
  std::ostringstream os;
  os << "{\n";
  os << "  \"exact_accuracy\": " << fixed6(r.exact_accuracy) << ",\n";
  os << "  \"micro\": {\"precision\": " << fixed6(r.micro.precision) << ", \"recall\": " << fixed6(r.micro.recall)
     << ", \"f1\": " << fixed6(r.micro.f1) << "},\n";
  os << "  \"per_tag\": {\n";
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    const auto& t = r.per_tag[c];
    os << "    \"" << LabelSet::names[c] << "\": {\"precision\": " << fixed6(t.precision)
       << ", \"recall\": " << fixed6(t.recall) << ", \"f1\": " << fixed6(t.f1) << ", \"tp\": " << t.tp
       << ", \"fp\": " << t.fp << ", \"fn\": " << t.fn << "}" << (c + 1 < kNumLabels ? "," : "") << "\n";
  }
  os << "  },\n";
  os << "  \"n_examples\": " << r.n_examples;
  if (!caveat.empty()) os << ",\n  \"caveat\": " << nlohmann::json(caveat).dump();
  os << "\n}\n";
  return os.str();
}

inline std::string history_to_json(const TrainHistory& h) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : h.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["dev_exact_accuracy"] = nullptr;
    j["dev_micro_f1"] = nullptr;
    if (e.dev_exact_accuracy) j["dev_exact_accuracy"] = *e.dev_exact_accuracy;
    if (e.dev_micro_f1) j["dev_micro_f1"] = *e.dev_micro_f1;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

inline std::string stats_to_json(const CorpusStats& s) {
  nlohmann::ordered_json j;
  j["n_examples"] = s.n_examples;
  nlohmann::ordered_json counts;
  for (std::size_t c = 0; c < kNumLabels; ++c) counts[std::string(LabelSet::names[c])] = s.label_counts[c];
  j["label_counts"] = counts;
  j["fraction_multilabel"] = s.fraction_multilabel;
  j["fraction_comment_plus_complaint"] = s.fraction_comment_plus_complaint;
  return j.dump(2) + "\n";
}

}  // namespace fbclf
