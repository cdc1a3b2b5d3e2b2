#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "feedback_clf/corpus.hpp"

namespace fbclf {
namespace {

using Tokens = std::vector<std::string>;

TEST(Tokenize, LowercasesAndDropsPunctuation) {
  EXPECT_EQ(tokenize("Great app, love it!"), (Tokens{"great", "app", "love", "it"}));
  EXPECT_EQ(tokenize(""), Tokens{});
  EXPECT_EQ(tokenize("Hello"), Tokens{"hello"});
}

TEST(Tokenize, FilterSetSplitsTokens) {
  EXPECT_EQ(tokenize("a-b/c_d\te\nf"), (Tokens{"a", "b", "c", "d", "e", "f"}));
  // Apostrophes are not in the filter set.
  EXPECT_EQ(tokenize("Don't"), Tokens{"don't"});
}

TEST(Tokenize, LowercasesNonAscii) {
  EXPECT_EQ(tokenize("ÉCOLE Ωmega ПРИВЕТ"), (Tokens{"école", "ωmega", "привет"}));
}

TEST(Tokenize, EnglishCleaning) {
  EXPECT_EQ(tokenize("It’s  “fine”", true), (Tokens{"it's", "fine"}));
  EXPECT_EQ(tokenize("It’s", false), Tokens{"it’s"});
  EXPECT_EQ(clean_english_text("a \x01 b   c"), "a b c");
}

TEST(Tokenize, NeverEmitsFilterCharsOrUppercase) {
  const std::vector<std::string> pool = {"A", "b", "Z", " ", ",", "!", "\t", "É", "ß", "Ж", "д", "?", "x", "'", "~",
                                         "’", "Q", "7", "{", "\\"};
  std::mt19937 gen(11);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1), len(0, 30);
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    for (std::size_t i = len(gen); i > 0; --i) s += pool[pick(gen)];
    for (bool clean : {false, true}) {
      for (const auto& tok : tokenize(s, clean)) {
        ASSERT_FALSE(tok.empty());
        for (char c : kFilterChars) ASSERT_EQ(tok.find(c), std::string::npos) << s;
        ASSERT_EQ(tok.find(' '), std::string::npos);
        for (const char* upper : {"A", "Z", "Q", "É", "Ж"}) ASSERT_EQ(tok.find(upper), std::string::npos) << s;
      }
    }
  }
}

TEST(BuildVocab, RanksByFrequency) {
  const std::vector<Tokens> seqs = {{"a", "b"}, {"a"}};
  const auto v = build_vocab(seqs, 1);
  EXPECT_EQ(v.tokens(), (Tokens{"<pad>", "<unk>", "a", "b"}));
  EXPECT_EQ(v.id_of("a"), 2);
  EXPECT_EQ(v.id_of("b"), 3);
}

TEST(BuildVocab, MinCountExcludes) {
  const std::vector<Tokens> seqs = {{"a", "b"}, {"a"}};
  EXPECT_EQ(build_vocab(seqs, 2).tokens(), (Tokens{"<pad>", "<unk>", "a"}));
}

TEST(BuildVocab, EmptyCorpus) {
  const auto v = build_vocab({}, 1);
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.pad_id, 0);
  EXPECT_EQ(v.unk_id, 1);
}

TEST(BuildVocab, TiesKeepFirstOccurrence) {
  const std::vector<Tokens> seqs = {{"c", "b", "a"}, {"a", "b"}};
  EXPECT_EQ(build_vocab(seqs).tokens(), (Tokens{"<pad>", "<unk>", "b", "a", "c"}));
}

TEST(BuildVocab, MaxSizeKeepsMostFrequent) {
  const std::vector<Tokens> seqs = {{"x", "y", "y", "z", "z", "z"}};
  const auto v = build_vocab(seqs, 1, 2);
  EXPECT_EQ(v.tokens(), (Tokens{"<pad>", "<unk>", "z", "y"}));
  EXPECT_EQ(v.id_of("x"), Vocabulary::unk_id);
}

TEST(BuildVocab, RejectsZeroMinCount) { EXPECT_THROW(build_vocab({}, 0), ConfigError); }

TEST(Vocabulary, RoundTripAndContiguousIds) {
  std::mt19937 gen(5);
  std::uniform_int_distribution<int> letter('a', 'f'), len(1, 3), n(0, 12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tokens> seqs(4);
    for (auto& s : seqs) {
      for (int i = n(gen); i > 0; --i) {
        std::string t;
        for (int k = len(gen); k > 0; --k) t += static_cast<char>(letter(gen));
        s.push_back(t);
      }
    }
    const auto v = build_vocab(seqs, 1);
    for (std::size_t id = 2; id < v.size(); ++id) {
      const auto& tok = v.token(static_cast<std::int32_t>(id));
      ASSERT_EQ(v.id_of(tok), static_cast<std::int32_t>(id));
      ASSERT_NE(tok, "<pad>");
      ASSERT_NE(tok, "<unk>");
    }
    EXPECT_EQ(Vocabulary::from_id_list(v.tokens()), v);
  }
}

TEST(Vocabulary, FromIdListRejectsMissingReserved) {
  EXPECT_THROW(Vocabulary::from_id_list({"a", "b"}), DataError);
  EXPECT_THROW(Vocabulary::from_id_list({"<pad>", "<unk>", "a", "a"}), DataError);
}

TEST(Encode, PostPadsAndTruncates) {
  const auto v = Vocabulary::from_id_list({"<pad>", "<unk>", "a", "b", "c", "d", "e"});
  EXPECT_EQ(encode(Tokens{"a", "b"}, v, 4), (std::vector<std::int32_t>{2, 3, 0, 0}));
  EXPECT_EQ(encode(Tokens{"z"}, v, 1), (std::vector<std::int32_t>{1}));
  EXPECT_EQ(encode(Tokens{"a", "b", "c", "d", "e"}, v, 3), (std::vector<std::int32_t>{2, 3, 4}));
}

TEST(Encode, PreSideKeepsTail) {
  const auto v = Vocabulary::from_id_list({"<pad>", "<unk>", "a", "b", "c"});
  EXPECT_EQ(encode(Tokens{"a", "b", "c"}, v, 2, PadSide::pre), (std::vector<std::int32_t>{3, 4}));
  EXPECT_EQ(encode(Tokens{"a"}, v, 3, PadSide::pre), (std::vector<std::int32_t>{0, 0, 2}));
}

TEST(Encode, LengthAlwaysMaxLenAndDeterministic) {
  const std::vector<Tokens> seqs = {{"great", "app", "love", "it"}};
  const auto v = build_vocab(seqs);
  std::mt19937 gen(3);
  std::uniform_int_distribution<std::size_t> max_len(1, 12);
  std::uniform_int_distribution<int> ch('a', 'z'), spaces(0, 4);
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    for (int i = 0; i < 20; ++i) s += spaces(gen) == 0 ? ' ' : static_cast<char>(ch(gen));
    const auto n = max_len(gen);
    const auto a = encode(tokenize(s), v, n);
    ASSERT_EQ(a.size(), n);
    ASSERT_EQ(a, encode(tokenize(std::string(s)), v, n));
  }
}

TEST(Encode, RejectsZeroLength) { EXPECT_THROW(encode(Tokens{"a"}, Vocabulary{}, 0), ConfigError); }

Dataset parse(const std::string& text, LabelColumn labels = LabelColumn::required) {
  std::istringstream in(text);
  return parse_dataset(in, nullptr, false, labels);
}

TEST(LoadDataset, SingleLabelLine) {
  const auto ds = parse("17\tgreat app\tcomment\n");
  ASSERT_EQ(ds.examples.size(), 1u);
  const auto& e = ds.examples[0];
  EXPECT_EQ(e.id, "17");
  EXPECT_EQ(e.tokens, (Tokens{"great", "app"}));
  EXPECT_EQ(e.gold, LabelMask(1u << LabelSet::comment));
}

TEST(LoadDataset, MultiLabelLine) {
  const auto ds = parse("3\tcrashes often\tbug,complaint\n");
  LabelMask want;
  want.set(LabelSet::bug);
  want.set(LabelSet::complaint);
  EXPECT_EQ(ds.examples.at(0).gold, want);
}

TEST(LoadDataset, UnknownLabelNamesStringAndLine) {
  try {
    parse("9\ttext\tfoo\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "unknown label 'foo' at line 1");
  }
}

TEST(LoadDataset, MalformedLineNamesLineNumber) {
  try {
    parse("1\tok\tcomment\n2\tmissing label\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse("1\ta\tb\tcomment\n"), DataError);
}

TEST(LoadDataset, BlankLineIsError) { EXPECT_THROW(parse("1\ta\tcomment\n\n2\tb\tbug\n"), DataError); }

TEST(LoadDataset, OptionalLabelColumn) {
  const auto ds = parse("1\tno label here\n2\tlabelled\tbug\n", LabelColumn::optional);
  ASSERT_EQ(ds.examples.size(), 2u);
  EXPECT_TRUE(ds.examples[0].gold.none());
  EXPECT_EQ(ds.stats.n_examples, 0u);
}

TEST(LoadDataset, CrlfAndVocabEncoding) {
  const auto v = Vocabulary::from_id_list({"<pad>", "<unk>", "great"});
  std::istringstream in("1\tGreat stuff\tcomment\r\n");
  const auto ds = parse_dataset(in, &v, false);
  EXPECT_EQ(ds.examples.at(0).token_ids, (std::vector<std::int32_t>{2, 1}));
  EXPECT_EQ(ds.examples.at(0).gold, LabelMask(1u << LabelSet::comment));
}

TEST(LoadDataset, MissingFileNamesPath) {
  try {
    load_dataset("/nonexistent/corpus.tsv", nullptr, false);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/corpus.tsv"), std::string::npos);
  }
}

TEST(LoadDataset, AcceptsJapaneseText) {
  const auto ds = parse("1\tアプリ が 落ちる\tbug\n");
  EXPECT_EQ(ds.examples.at(0).tokens.size(), 3u);
}

TEST(LoadDataset, SerializeRoundTrip) {
  const std::string text =
      "1\tGreat app, love it!\tcomment\n"
      "2\tPlease add   export\trequest\n"
      "3\tcrashes often\tbug,complaint\n"
      "4\tÉcole ’quoted’\tundetermined\n";
  const auto first = parse(text);
  std::ostringstream out;
  write_dataset(out, first.examples);
  EXPECT_EQ(out.str(), text);
  const auto second = parse(out.str());
  ASSERT_EQ(second.examples.size(), first.examples.size());
  for (std::size_t i = 0; i < first.examples.size(); ++i) {
    EXPECT_EQ(second.examples[i].id, first.examples[i].id);
    EXPECT_EQ(second.examples[i].raw_text, first.examples[i].raw_text);
    EXPECT_EQ(second.examples[i].tokens, first.examples[i].tokens);
    EXPECT_EQ(second.examples[i].gold, first.examples[i].gold);
  }
}

Example with_gold(std::initializer_list<std::size_t> labels) {
  Example e;
  for (auto l : labels) e.gold.set(l);
  return e;
}

TEST(CorpusStats, FractionMultilabel) {
  const std::vector<Example> two = {with_gold({LabelSet::comment}), with_gold({LabelSet::bug, LabelSet::complaint})};
  EXPECT_DOUBLE_EQ(corpus_stats(two).fraction_multilabel, 0.5);
  const std::vector<Example> singles = {with_gold({LabelSet::comment}), with_gold({LabelSet::bug})};
  EXPECT_DOUBLE_EQ(corpus_stats(singles).fraction_multilabel, 0.0);
}

TEST(CorpusStats, CommentPlusComplaint) {
  const std::vector<Example> ex = {with_gold({LabelSet::comment}), with_gold({LabelSet::complaint}),
                                   with_gold({LabelSet::request}), with_gold({LabelSet::comment})};
  const auto s = corpus_stats(ex);
  EXPECT_DOUBLE_EQ(s.fraction_comment_plus_complaint, 0.75);
  EXPECT_EQ(s.n_examples, 4u);
  EXPECT_EQ(s.label_counts[LabelSet::comment], 2u);
}

TEST(CorpusStats, LabelCountsCoverMultiLabels) {
  const std::vector<Example> ex = {with_gold({LabelSet::bug, LabelSet::complaint}), with_gold({LabelSet::bug})};
  const auto s = corpus_stats(ex);
  std::size_t total = 0;
  for (auto c : s.label_counts) total += c;
  EXPECT_EQ(total, 3u);
  EXPECT_GE(total, s.n_examples);
}

TEST(CorpusStats, EmptyIsError) { EXPECT_THROW(corpus_stats({}), DataError); }

TEST(LabelSet, FixedOrder) {
  EXPECT_EQ(LabelSet::names[0], "comment");
  EXPECT_EQ(LabelSet::names[5], "undetermined");
  EXPECT_EQ(LabelSet::index_of("bug"), 2u);
  EXPECT_FALSE(LabelSet::index_of("Bug").has_value());
  LabelMask m;
  m.set(LabelSet::bug);
  m.set(LabelSet::complaint);
  EXPECT_EQ(format_labels(m), "bug,complaint");
}

}  // namespace
}  // namespace fbclf
