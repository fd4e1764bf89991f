#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "beam_oracle.h"
#include "segtrm/infer.h"
#include "test_util.h"

namespace segtrm {
namespace {

// A fixed random conditional distribution over `vocab` ids per prefix.
class TableModel {
 public:
  TableModel(std::size_t vocab, std::uint64_t seed, double temperature = 2.0)
      : vocab_(vocab), seed_(seed), temperature_(temperature) {}

  std::vector<double> operator()(std::span<const int> prefix) const {
    std::uint64_t h = seed_;
    for (int id : prefix) h = h * 1000003u + static_cast<std::uint64_t>(id) + 17;
    std::mt19937_64 rng(h);
    std::normal_distribution<double> normal(0.0, temperature_);
    std::vector<double> logits(vocab_);
    for (double& v : logits) v = normal(rng);
    const double max = *std::max_element(logits.begin(), logits.end());
    double z = 0;
    for (double v : logits) z += std::exp(v - max);
    for (double& v : logits) v -= max + std::log(z);
    return logits;
  }

 private:
  std::size_t vocab_;
  std::uint64_t seed_;
  double temperature_;
};

std::vector<int> Greedy(const NextLogProbFn& next, std::size_t max_len) {
  std::vector<int> ids;
  while (ids.size() < max_len) {
    const auto lp = next(ids);
    int best = -1;
    for (std::size_t id = 0; id < lp.size(); ++id) {
      if (!Generatable(static_cast<int>(id))) continue;
      if (best < 0 || lp[id] > lp[best]) best = static_cast<int>(id);
    }
    ids.push_back(best);
    if (best == kEndId) break;
  }
  return ids;
}

TEST(BeamSearchTest, BeamOneIsGreedy) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    TableModel model(10, seed);
    BeamOptions opts;
    opts.beam_size = 1;
    opts.max_len = 6;
    auto beams = BeamSearch(model, opts);
    ASSERT_EQ(beams.size(), 1u);
    EXPECT_EQ(beams[0].ids, Greedy(model, 6));
  }
}

TEST(BeamSearchTest, ExhaustiveBeamMatchesEnumeration) {
  for (LengthNorm norm : {LengthNorm::kMean, LengthNorm::kOff}) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      TableModel model(kNumReserved + 1, seed);
      BeamOptions opts;
      opts.beam_size = 20;
      opts.max_len = 3;
      opts.length_norm = norm;
      auto beams = BeamSearch(model, opts);
      auto oracle = testing::EnumerateAll(model, 3, norm);
      ASSERT_EQ(oracle.size(), 15u);
      ASSERT_EQ(beams.size(), oracle.size());
      for (std::size_t i = 0; i < oracle.size(); ++i) {
        EXPECT_EQ(beams[i].ids, oracle[i].ids);
        EXPECT_EQ(beams[i].score, oracle[i].score);
      }
    }
  }
}

TEST(BeamSearchTest, NarrowBeamsNeverBeatTheOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    TableModel model(kNumReserved + 3, seed);
    const double best = testing::EnumerateAll(model, 4, LengthNorm::kMean).front().score;
    for (std::size_t beam = 1; beam <= 8; ++beam) {
      BeamOptions opts;
      opts.beam_size = beam;
      opts.max_len = 4;
      EXPECT_LE(BeamSearch(model, opts).front().score, best);
    }
  }
}

TEST(BeamSearchTest, HypothesesEndAtSeparatorOrLimit) {
  TableModel model(12, 3, 0.5);
  BeamOptions opts;
  opts.beam_size = 7;
  opts.max_len = 5;
  for (const Hypothesis& h : BeamSearch(model, opts)) {
    EXPECT_TRUE(h.ids.back() == kEndId || h.ids.size() == 5u);
    EXPECT_EQ(h.finished, h.ids.back() == kEndId);
    for (std::size_t i = 0; i + 1 < h.ids.size(); ++i) EXPECT_NE(h.ids[i], kEndId);
    for (int id : h.ids) EXPECT_TRUE(Generatable(id));
    double lp = 0;
    std::vector<int> prefix;
    for (int id : h.ids) {
      lp += model(prefix)[id];
      prefix.push_back(id);
    }
    EXPECT_NEAR(h.log_prob, lp, 1e-12);
    EXPECT_NEAR(h.score, lp / h.ids.size(), 1e-12);
  }
}

TEST(BeamSearchTest, RejectsZeroBeam) {
  TableModel model(8, 1);
  BeamOptions opts;
  opts.beam_size = 0;
  EXPECT_THROW(BeamSearch(model, opts), std::invalid_argument);
}

TEST(BeamSearchTest, ModelBeamMatchesEnumeration) {
  ModelConfig cfg = testing::TinyConfig(kNumReserved + 1);
  SegmentOptions seg;
  seg.segment_len = 3;
  seg.interval_slots = 4;
  const SegmentedInput in = SegmentEncode(std::vector<int>(8, kNumReserved), seg);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SegTrmModel<double> model(cfg, seed);
    testing::ScaleWeights(model.params(), 20.0);
    const EncodedPost<double> post = model.EncodeForInference(in);
    auto next = [&](std::span<const int> p) { return model.NextLogProbs(post, p); };
    BeamOptions opts;
    opts.max_len = 3;
    auto beams = BeamSearch(model, post, opts);
    auto oracle = testing::EnumerateAll(next, 3, LengthNorm::kMean);
    EXPECT_EQ(beams.front().ids, oracle.front().ids);
    EXPECT_EQ(beams.front().score, oracle.front().score);
  }
}

TEST(HashtagSetTest, NormalizationAndUnion) {
  EXPECT_EQ(NormalizeHashtag("  Farmers \t  Market "), "farmers market");
  EXPECT_EQ(NormalizeHashtag(""), "");
  const std::vector<std::vector<std::string>> decoded = {{"a"}, {"A", "b"}, {"c"}};
  EXPECT_EQ(TopKHashtagSet(decoded, 2), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(TopKHashtagSet(decoded, 1), (std::vector<std::string>{"a"}));
  EXPECT_EQ(TopKHashtagSet(decoded, 10), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(HashtagSetTest, DecodeTopBeam) {
  Vocabulary vocab = Vocabulary::Build({"a b"}, 1, TokenMode::kWord);
  const std::vector<int> ids = {vocab.Id("a"), kHashSepId, vocab.Id("b"), kEndId};
  EXPECT_EQ(DecodeOutput(ids, vocab, TokenMode::kWord), (std::vector<std::string>{"a", "b"}));
}

TEST(GenerateTest, TopKSetCoversBestAndRespectsBeam) {
  Vocabulary vocab = Vocabulary::Build({"x y z w"}, 1, TokenMode::kWord);
  ModelConfig cfg = testing::TinyConfig(vocab.size());
  SegTrmModel<double> model(cfg, 3);
  testing::ScaleWeights(model.params(), 10.0);
  SegmentOptions seg;
  seg.segment_len = 3;
  seg.interval_slots = 4;
  const SegmentedInput in = SegmentEncode(Tokenize("x y z w x", TokenMode::kWord), vocab, seg);
  BeamOptions opts;
  opts.beam_size = 4;
  opts.max_len = 6;
  auto gen = GenerateHashtags(model, in, vocab, TokenMode::kWord, opts, 1);
  std::vector<std::string> best_norm;
  for (const auto& t : gen.best) {
    if (std::find(best_norm.begin(), best_norm.end(), NormalizeHashtag(t)) == best_norm.end())
      best_norm.push_back(NormalizeHashtag(t));
  }
  EXPECT_EQ(gen.topk_set, best_norm);
  EXPECT_THROW(GenerateHashtags(model, in, vocab, TokenMode::kWord, opts, 5),
               std::invalid_argument);
}

}  // namespace
}  // namespace segtrm
