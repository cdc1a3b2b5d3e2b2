#pragma once

// Tokenization, vocabulary construction and TSV corpus loading.

#include <algorithm>
#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "feedback_clf/error.hpp"

namespace fbclf {

inline constexpr std::size_t kNumLabels = 6;

/// One bit per tag, indexed in LabelSet order.
using LabelMask = std::bitset<kNumLabels>;

/// The six customer-feedback tags in their fixed order.
struct LabelSet {
  static constexpr std::array<std::string_view, kNumLabels> names = {
      "comment", "request", "bug", "complaint", "meaningless", "undetermined"};

  static constexpr std::size_t comment = 0;
  static constexpr std::size_t request = 1;
  static constexpr std::size_t bug = 2;
  static constexpr std::size_t complaint = 3;
  static constexpr std::size_t meaningless = 4;
  static constexpr std::size_t undetermined = 5;

  static std::optional<std::size_t> index_of(std::string_view name) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    return std::nullopt;
  }

  static std::string_view name(std::size_t index) { return names.at(index); }
};

/// Comma-joined tag names of a mask, in label order.
inline std::string format_labels(const LabelMask& mask) {
  std::string out;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (!mask[i]) continue;
    if (!out.empty()) out += ',';
    out += LabelSet::names[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tokenization

/// Characters replaced by a space before splitting.
inline constexpr std::string_view kFilterChars = "!\"#$%&()*+,-./:;<=>?@[\\]^_`{|}~\t\n";

namespace detail {

/// Decodes one UTF-8 sequence at `pos`; invalid bytes decode as themselves
/// with length 1 and are passed through unchanged by the caller.
inline char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& len) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t i) -> int {
    if (pos + i >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + i]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    len = 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) {
      len = 2;
      return static_cast<char32_t>(((b0 & 0x1F) << 6) | c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      len = 3;
      return static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      len = 4;
      return static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
    }
  }
  len = 1;
  return 0xFFFFFFFF;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

/// Simple case folding for ASCII, Latin-1, Latin Extended-A, basic Greek and Cyrillic.
inline char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 32;
  if (cp == 0x130) return U'i';
  if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

inline bool is_upper(char32_t cp) { return to_lower(cp) != cp; }

}  // namespace detail

/// Whitespace collapse, control-character removal and ASCII quote normalization.
inline std::string clean_english_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t len = 1;
    const char32_t cp = detail::decode_utf8(text, pos, len);
    const std::string_view raw = text.substr(pos, len);
    pos += len;
    if (cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f') {
      pending_space = !out.empty();
      continue;
    }
    if (cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp < 0xA0)) continue;
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    switch (cp) {
      case 0x2018:
      case 0x2019:
      case 0x201B:
      case 0x2032:
        out += '\'';
        break;
      case 0x201C:
      case 0x201D:
      case 0x201F:
      case 0x2033:
        out += '"';
        break;
      default:
        out += raw;
    }
  }
  return out;
}

/// Lowercases, replaces kFilterChars with spaces and splits on whitespace.
inline std::vector<std::string> tokenize(std::string_view text, bool clean_english = false) {
  std::string cleaned;
  if (clean_english) {
    cleaned = clean_english_text(text);
    text = cleaned;
  }
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t len = 1;
    const char32_t cp = detail::decode_utf8(text, pos, len);
    const std::string_view raw = text.substr(pos, len);
    pos += len;
    if (cp < 0x80 && (kFilterChars.find(static_cast<char>(cp)) != std::string_view::npos ||
                      cp == ' ' || cp == '\r' || cp == '\v' || cp == '\f')) {
      flush();
    } else if (cp == 0xFFFFFFFF) {
      current += raw;
    } else {
      detail::append_utf8(current, detail::to_lower(cp));
    }
  }
  flush();
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocabulary

/// Token <-> id map. Ids 0 and 1 are reserved for padding and unknown tokens.
class Vocabulary {
 public:
  static constexpr std::int32_t pad_id = 0;
  static constexpr std::int32_t unk_id = 1;
  // Both contain filter characters, so no corpus token can collide with them.
  static constexpr std::string_view pad_token = "<pad>";
  static constexpr std::string_view unk_token = "<unk>";

  Vocabulary() : id_to_token_{std::string(pad_token), std::string(unk_token)} {}

  /// Rebuilds a vocabulary from its id-ordered token list (as stored in model files).
  static Vocabulary from_id_list(std::vector<std::string> id_to_token, std::size_t min_count = 1,
                                 std::optional<std::size_t> max_size = std::nullopt) {
    if (id_to_token.size() < 2 || id_to_token[0] != pad_token || id_to_token[1] != unk_token) {
      throw DataError("vocabulary must start with the reserved <pad> and <unk> entries");
    }
    Vocabulary v;
    v.min_count_ = min_count;
    v.max_size_ = max_size;
    for (std::size_t i = 2; i < id_to_token.size(); ++i) {
      if (!v.token_to_id_.emplace(id_to_token[i], static_cast<std::int32_t>(i)).second) {
        throw DataError("duplicate vocabulary token '" + id_to_token[i] + "'");
      }
    }
    v.id_to_token_ = std::move(id_to_token);
    return v;
  }

  std::size_t size() const { return id_to_token_.size(); }

  std::int32_t id_of(std::string_view token) const {
    const auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? unk_id : it->second;
  }

  bool contains(std::string_view token) const {
    return token_to_id_.contains(std::string(token));
  }

  const std::string& token(std::int32_t id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }
  std::size_t min_count() const { return min_count_; }
  std::optional<std::size_t> max_size() const { return max_size_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  friend Vocabulary build_vocab(std::span<const std::vector<std::string>>, std::size_t,
                                std::optional<std::size_t>);

  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::size_t min_count_ = 1;
  std::optional<std::size_t> max_size_;
};

/// Frequency-ranked vocabulary; ties keep first-occurrence order.
inline Vocabulary build_vocab(std::span<const std::vector<std::string>> sequences,
                              std::size_t min_count = 1,
                              std::optional<std::size_t> max_size = std::nullopt) {
  if (min_count < 1) throw ConfigError("min_count must be at least 1");
  struct Entry {
    std::string token;
    std::size_t count;
  };
  std::vector<Entry> entries;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& seq : sequences) {
    for (const auto& tok : seq) {
      auto [it, inserted] = slot.try_emplace(tok, entries.size());
      if (inserted) entries.push_back({tok, 0});
      ++entries[it->second].count;
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.count > b.count; });

  Vocabulary vocab;
  vocab.min_count_ = min_count;
  vocab.max_size_ = max_size;
  for (const auto& e : entries) {
    if (e.count < min_count) break;
    if (max_size && vocab.size() - 2 >= *max_size) break;
    vocab.token_to_id_.emplace(e.token, static_cast<std::int32_t>(vocab.id_to_token_.size()));
    vocab.id_to_token_.push_back(e.token);
  }
  return vocab;
}

enum class PadSide { post, pre };

/// Maps tokens to ids without padding; unknown tokens become unk_id.
inline std::vector<std::int32_t> lookup(std::span<const std::string> tokens, const Vocabulary& vocab) {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id_of(t));
  return ids;
}

/// Pads or truncates an id sequence to exactly max_len.
inline std::vector<std::int32_t> fit_length(std::span<const std::int32_t> ids, std::size_t max_len,
                                            PadSide side = PadSide::post) {
  if (max_len < 1) throw ConfigError("max_len must be at least 1");
  std::vector<std::int32_t> out(max_len, Vocabulary::pad_id);
  const std::size_t n = std::min(ids.size(), max_len);
  if (side == PadSide::post) {
    std::copy_n(ids.begin(), n, out.begin());
  } else {
    // Keras-style "pre": keep the last tokens, pad at the front.
    std::copy_n(ids.end() - static_cast<std::ptrdiff_t>(n), n, out.end() - static_cast<std::ptrdiff_t>(n));
  }
  return out;
}

inline std::vector<std::int32_t> encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                                        std::size_t max_len, PadSide side = PadSide::post) {
  const auto ids = lookup(tokens, vocab);
  return fit_length(ids, max_len, side);
}

// ---------------------------------------------------------------------------
// Corpus

struct Example {
  std::string id;
  std::string raw_text;
  std::vector<std::string> tokens;
  std::vector<std::int32_t> token_ids;  // unpadded; empty until a vocabulary is attached
  LabelMask gold;
};

struct CorpusStats {
  std::size_t n_examples = 0;
  std::array<std::size_t, kNumLabels> label_counts{};
  double fraction_multilabel = 0.0;
  /// Share of single-label examples whose label is comment or complaint.
  double fraction_comment_plus_complaint = 0.0;
};

inline CorpusStats corpus_stats(std::span<const Example> examples) {
  if (examples.empty()) throw DataError("corpus statistics need at least one example");
  CorpusStats s;
  s.n_examples = examples.size();
  std::size_t multi = 0, single = 0, single_cc = 0;
  for (const auto& e : examples) {
    for (std::size_t c = 0; c < kNumLabels; ++c) s.label_counts[c] += e.gold[c] ? 1 : 0;
    if (e.gold.count() > 1) {
      ++multi;
    } else if (e.gold.count() == 1) {
      ++single;
      if (e.gold[LabelSet::comment] || e.gold[LabelSet::complaint]) ++single_cc;
    }
  }
  s.fraction_multilabel = static_cast<double>(multi) / static_cast<double>(s.n_examples);
  s.fraction_comment_plus_complaint =
      single ? static_cast<double>(single_cc) / static_cast<double>(single) : 0.0;
  return s;
}

struct Dataset {
  std::vector<Example> examples;
  CorpusStats stats;  // left zeroed when the corpus is empty or unlabeled
};

enum class LabelColumn { required, optional };

/// Parses "label[,label]*" into a mask; `line` is only used in messages.
inline LabelMask parse_labels(std::string_view field, std::size_t line) {
  LabelMask mask;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = field.find(',', start);
    const std::string_view name = field.substr(start, comma == std::string_view::npos ? field.npos : comma - start);
    const auto idx = LabelSet::index_of(name);
    if (!idx) {
      throw DataError("unknown label '" + std::string(name) + "' at line " + std::to_string(line));
    }
    mask.set(*idx);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return mask;
}

inline void attach_vocab(std::span<Example> examples, const Vocabulary& vocab) {
  for (auto& e : examples) e.token_ids = lookup(e.tokens, vocab);
}

/// Reads `id<TAB>text<TAB>label[,label]*` lines.
inline Dataset parse_dataset(std::istream& in, const Vocabulary* vocab, bool clean_english,
                             LabelColumn labels = LabelColumn::required) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  bool all_labeled = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw DataError("blank line at line " + std::to_string(lineno));

    std::vector<std::string_view> cols;
    std::string_view rest = line;
    while (true) {
      const auto tab = rest.find('\t');
      cols.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    const bool ok = cols.size() == 3 || (labels == LabelColumn::optional && cols.size() == 2);
    if (!ok) {
      throw DataError("malformed line " + std::to_string(lineno) + ": expected 3 tab-separated columns, found " +
                      std::to_string(cols.size()));
    }
    Example ex;
    ex.id = std::string(cols[0]);
    ex.raw_text = std::string(cols[1]);
    ex.tokens = tokenize(ex.raw_text, clean_english);
    if (cols.size() == 3) {
      ex.gold = parse_labels(cols[2], lineno);
    } else {
      all_labeled = false;
    }
    if (vocab) ex.token_ids = lookup(ex.tokens, *vocab);
    ds.examples.push_back(std::move(ex));
  }
  if (!ds.examples.empty() && all_labeled) ds.stats = corpus_stats(ds.examples);
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path, const Vocabulary* vocab, bool clean_english,
                            LabelColumn labels = LabelColumn::required) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file '" + path.string() + "'");
  try {
    return parse_dataset(in, vocab, clean_english, labels);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// Writes examples back in the corpus TSV format.
inline void write_dataset(std::ostream& out, std::span<const Example> examples) {
  for (const auto& e : examples) out << e.id << '\t' << e.raw_text << '\t' << format_labels(e.gold) << '\n';
}

}  // namespace fbclf
