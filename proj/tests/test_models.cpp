#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "feedback_clf/models.hpp"

namespace fbclf {
namespace {

namespace pn = param_names;

Vocabulary vocab_of_size(std::size_t n) {
  std::vector<std::string> tokens = {"<pad>", "<unk>"};
  for (std::size_t i = 2; i < n; ++i) tokens.push_back("w" + std::to_string(i));
  return Vocabulary::from_id_list(tokens);
}

TrainedModel fresh(Arch arch, std::size_t vocab = 40, std::size_t max_len = 12, std::uint64_t seed = 1) {
  auto c = ModelConfig::defaults(arch, vocab);
  c.max_len = max_len;
  Rng rng(seed);
  return build_model(c, vocab_of_size(vocab), rng);
}

// Closed-form parameter counts from the wiring, separate from the constructor.
std::size_t expected_trainable(Arch arch, std::size_t v) {
  const std::size_t labels = 6;
  switch (arch) {
    case Arch::fasttext: return v * 200 + 200 * labels + labels;
    case Arch::cnn: return v * 100 + 128 * (3 + 4 + 5) * 100 + 3 * 128 + 3 * 128 * labels + labels;
    case Arch::bilstm1: return v * 64 + 2 * (4 * 64 * (64 + 64 + 1)) + 128 * labels + labels;
    case Arch::bilstm2: return v * 64 + (64 * 5 * 64 + 64) + 2 * (4 * 64 * (64 + 64 + 1)) + 128 * labels + labels;
    case Arch::bilstm3:
      return v * 64 + (64 * 5 * 64 + 64) + 2 * 64 + 2 * (4 * 64 * (64 + 64 + 1)) + 128 * labels + labels;
  }
  return 0;
}

TEST(ModelConfig, DefaultsPerArchitecture) {
  const auto ft = ModelConfig::defaults(Arch::fasttext, 10);
  EXPECT_EQ(ft.embed_dim, 200u);
  const auto cnn = ModelConfig::defaults(Arch::cnn, 10);
  EXPECT_EQ(cnn.embed_dim, 100u);
  EXPECT_EQ(cnn.conv_widths, (std::vector<std::size_t>{3, 4, 5}));
  EXPECT_EQ(cnn.conv_filters, 128u);
  EXPECT_DOUBLE_EQ(cnn.keep_prob(), 0.5);
  for (Arch a : {Arch::bilstm1, Arch::bilstm2, Arch::bilstm3}) {
    const auto c = ModelConfig::defaults(a, 10);
    EXPECT_EQ(c.embed_dim, 64u);
    EXPECT_EQ(c.lstm_units, 64u);
    EXPECT_DOUBLE_EQ(c.keep_prob(), 0.3);
  }
  const auto b2 = ModelConfig::defaults(Arch::bilstm2, 10);
  EXPECT_EQ(b2.conv_widths, (std::vector<std::size_t>{5}));
  EXPECT_EQ(b2.conv_filters, 64u);
  EXPECT_EQ(b2.pool_size, 4u);
}

TEST(ModelConfig, DropoutReadings) {
  auto c = ModelConfig::defaults(Arch::bilstm1, 10);
  EXPECT_DOUBLE_EQ(c.keep_prob(), 0.3);
  c.dropout_reading = DropoutReading::drop;
  EXPECT_DOUBLE_EQ(c.keep_prob(), 0.7);
}

TEST(ModelConfig, ValidationErrors) {
  auto c = ModelConfig::defaults(Arch::cnn, 10);
  c.max_len = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c.max_len = 5;
  EXPECT_NO_THROW(c.validate());
  auto b = ModelConfig::defaults(Arch::bilstm2, 10);
  b.max_len = 7;
  EXPECT_THROW(b.validate(), ConfigError);
  b.max_len = 8;
  EXPECT_NO_THROW(b.validate());
  auto e = ModelConfig::defaults(Arch::fasttext, 10);
  e.embed_dim = 0;
  EXPECT_THROW(e.validate(), ConfigError);
  EXPECT_THROW(parse_arch("rnn"), ConfigError);
}

TEST(BuildModel, OutputLayerShapes) {
  EXPECT_EQ(fresh(Arch::cnn).network.params().value(pn::out_weight).shape(), (Shape{384, 6}));
  EXPECT_EQ(fresh(Arch::bilstm1).network.params().value(pn::out_weight).shape(), (Shape{128, 6}));
  EXPECT_EQ(fresh(Arch::fasttext).network.params().value(pn::out_weight).shape(), (Shape{200, 6}));
}

TEST(BuildModel, ParameterCountsMatchClosedForm) {
  const std::size_t constants[] = {201206, 256294, 130822, 151366, 151494};
  std::size_t i = 0;
  for (Arch arch : kAllArchs) {
    auto c = ModelConfig::defaults(arch, 1000);
    c.max_len = 20;
    const Network<float> net(c);
    EXPECT_EQ(net.params().trainable_count(), expected_trainable(arch, 1000)) << to_string(arch);
    EXPECT_EQ(net.params().trainable_count(), constants[i++]) << to_string(arch);
  }
  auto c = ModelConfig::defaults(Arch::bilstm3, 1000);
  std::size_t total = 0;
  for (const auto& p : Network<float>(c).params()) total += p.value.size();
  EXPECT_EQ(total, 151622u);
}

TEST(BuildModel, VocabMismatchRejected) {
  auto c = ModelConfig::defaults(Arch::fasttext, 50);
  EXPECT_THROW(TrainedModel(c, vocab_of_size(40)), ConfigError);
}

TEST(BuildModel, Initialization) {
  auto m = fresh(Arch::bilstm3, 40, 12, 7);
  const auto& p = m.network.params();
  for (float v : p.value(pn::embedding).data()) EXPECT_LE(std::abs(v), 0.05f);
  const double conv_limit = std::sqrt(6.0 / (5 * 64 + 5 * 64));
  for (float v : p.value(pn::conv_kernel(0)).data()) EXPECT_LE(std::abs(v), conv_limit);
  for (std::string_view dir : {"fwd", "bwd"}) {
    const auto& b = p.value(pn::lstm(dir, "b"));
    for (std::size_t j = 0; j < 256; ++j) EXPECT_EQ(b[j], (j >= 64 && j < 128) ? 1.0f : 0.0f);
    // Recurrent matrix has orthonormal rows.
    const auto& u = p.value(pn::lstm(dir, "U"));
    for (std::size_t r = 0; r < 64; r += 7) {
      for (std::size_t s = 0; s < 64; s += 5) {
        double d = 0;
        for (std::size_t k = 0; k < 256; ++k) d += double(u.at(r, k)) * double(u.at(s, k));
        EXPECT_NEAR(d, r == s ? 1.0 : 0.0, 1e-5);
      }
    }
  }
  for (float v : p.value(pn::bn_gamma).data()) EXPECT_EQ(v, 1.0f);
  for (float v : p.value(pn::out_bias).data()) EXPECT_EQ(v, 0.0f);
}

TEST(BuildModel, SameSeedSameParameters) {
  auto a = fresh(Arch::cnn, 40, 12, 5), b = fresh(Arch::cnn, 40, 12, 5), c = fresh(Arch::cnn, 40, 12, 6);
  EXPECT_EQ(a.network.params().value(pn::conv_kernel(1)), b.network.params().value(pn::conv_kernel(1)));
  EXPECT_NE(a.network.params().value(pn::conv_kernel(1)), c.network.params().value(pn::conv_kernel(1)));
}

TEST(ScoreExample, ZeroedFasttextIsUniform) {
  auto m = fresh(Arch::fasttext);
  m.network.params().value(pn::out_weight).zero();
  const std::vector<std::int32_t> ids = {3, 4, 5};
  const auto s = score_example(m, ids, false, nullptr);
  ASSERT_EQ(s.size(), 6u);
  for (float v : s) EXPECT_NEAR(v, 1.0 / 6.0, 1e-7);
}

TEST(ScoreExample, ZeroLstmGivesHalf) {
  auto m = fresh(Arch::bilstm1);
  for (auto& p : m.network.params()) {
    if (p.name.starts_with("lstm")) p.value.zero();
  }
  const std::vector<std::int32_t> ids = {3, 9, 2};
  for (float v : score_example(m, ids, false, nullptr)) EXPECT_EQ(v, 0.5f);
}

TEST(ScoreExample, FasttextSumsToOneOthersInUnitInterval) {
  std::mt19937 gen(3);
  std::uniform_int_distribution<std::int32_t> id(0, 39);
  std::uniform_int_distribution<std::size_t> len(0, 30);
  for (Arch arch : kAllArchs) {
    const auto m = fresh(arch, 40, 12, 3);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::int32_t> ids(len(gen));
      for (auto& v : ids) v = id(gen);
      const auto p = predict(m, ids);
      double sum = 0;
      for (float v : p.scores) {
        ASSERT_TRUE(std::isfinite(v));
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 1.0f);
        sum += v;
      }
      if (arch == Arch::fasttext) {
        EXPECT_NEAR(sum, 1.0, 1e-6);
      }
    }
  }
}

TEST(ScoreExample, FasttextEmptyInputIsUnk) {
  const auto m = fresh(Arch::fasttext);
  const std::vector<std::int32_t> empty, unk = {Vocabulary::unk_id};
  EXPECT_EQ(predict(m, empty).scores, predict(m, unk).scores);
}

TEST(ScoreExample, FasttextOrderInvariant) {
  const auto m = fresh(Arch::fasttext);
  std::vector<std::int32_t> ids = {5, 9, 2, 2, 30, 17, 8};
  const auto base = predict(m, ids).scores;
  std::mt19937 gen(4);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(ids.begin(), ids.end(), gen);
    const auto s = predict(m, ids).scores;
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(s[c], base[c], 1e-6);
  }
}

TEST(ScoreExample, TruncationBeyondMaxLenIsIgnored) {
  const auto m = fresh(Arch::bilstm2, 40, 10);
  std::vector<std::int32_t> ids(10, 7);
  auto longer = ids;
  longer.insert(longer.end(), {3, 4, 5});
  EXPECT_EQ(predict(m, ids).scores, predict(m, longer).scores);
}

TEST(ScoreExample, TrainingModeUsesDropout) {
  auto m = fresh(Arch::cnn);
  const std::vector<std::int32_t> ids = {5, 6, 7, 8, 9};
  Rng rng(1);
  const auto a = score_example(m, ids, true, &rng);
  const auto b = score_example(m, ids, true, &rng);
  EXPECT_NE(a, b);
  EXPECT_EQ(score_example(m, ids, false, nullptr), score_example(m, ids, false, nullptr));
}

TEST(Predict, ArgmaxLowestIndexTieBreak) {
  EXPECT_EQ(argmax<float>(std::vector<float>{0.1f, 0.9f, 0.1f, 0.1f, 0.1f, 0.1f}), 1u);
  EXPECT_EQ(argmax<float>(std::vector<float>(6, 0.3f)), 0u);
  EXPECT_EQ(argmax<float>(std::vector<float>{0.2f, 0.5f, 0.1f, 0.5f, 0.0f, 0.0f}), 1u);
}

TEST(Predict, ArgmaxInvariantUnderMonotoneTransform) {
  std::mt19937 gen(5);
  std::uniform_real_distribution<float> u(0.01f, 0.99f);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> s(6);
    for (auto& v : s) v = u(gen);
    auto logit = s, cubed = s;
    for (auto& v : logit) v = std::log(v / (1 - v));
    for (auto& v : cubed) v = v * v * v;
    EXPECT_EQ(argmax<float>(s), argmax<float>(logit));
    EXPECT_EQ(argmax<float>(s), argmax<float>(cubed));
  }
}

TEST(Predict, DeterministicAndMatchesBatch) {
  for (Arch arch : kAllArchs) {
    const auto m = fresh(arch, 40, 12, 9);
    std::vector<std::vector<std::int32_t>> inputs;
    std::mt19937 gen(6);
    std::uniform_int_distribution<std::int32_t> id(0, 39);
    for (int i = 0; i < 70; ++i) {
      std::vector<std::int32_t> ids(1 + i % 15);
      for (auto& v : ids) v = id(gen);
      inputs.push_back(ids);
    }
    const auto batched = predict_all(m, inputs);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto p = predict(m, inputs[i]);
      EXPECT_EQ(p.label_index, batched[i].label_index);
      EXPECT_EQ(p.scores, batched[i].scores) << to_string(arch) << " input " << i;
      EXPECT_EQ(p.scores, predict(m, inputs[i]).scores);
    }
  }
}

TEST(Network, PreparePadsAndTruncates) {
  const auto fast = fresh(Arch::fasttext, 40, 6);
  const std::vector<std::int32_t> ids = {3, 4, 5};
  EXPECT_EQ(fast.network.prepare(ids), ids);
  const auto cnn = fresh(Arch::cnn, 40, 6);
  EXPECT_EQ(cnn.network.prepare(ids), (std::vector<std::int32_t>{3, 4, 5, 0, 0, 0}));
  const std::vector<std::int32_t> longer = {1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_EQ(cnn.network.prepare(longer).size(), 6u);
}

TEST(Network, Bilstm3TrainingUpdatesRunningStats) {
  auto m = fresh(Arch::bilstm3);
  const auto before = m.network.params().value(pn::bn_mean);
  Rng rng(1);
  const std::vector<std::int32_t> a = {3, 4, 5, 6, 7}, b = {8, 9};
  const std::vector<std::vector<std::int32_t>> batch = {m.network.prepare(a), m.network.prepare(b)};
  m.network.forward(batch, true, &rng);
  EXPECT_NE(m.network.params().value(pn::bn_mean), before);
  const auto after = m.network.params().value(pn::bn_mean);
  m.network.infer(batch);
  EXPECT_EQ(m.network.params().value(pn::bn_mean), after);
}

}  // namespace
}  // namespace fbclf
