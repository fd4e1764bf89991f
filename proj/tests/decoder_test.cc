#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "segtrm/decoder.h"
#include "segtrm/gradcheck.h"
#include "segtrm/model.h"
#include "test_util.h"

namespace segtrm {
namespace {

using testing::TinyConfig;

SegmentedInput MakeInput(std::size_t content, std::size_t segment_len, std::uint64_t seed,
                         int vocab = 20) {
  std::mt19937_64 rng(seed);
  SegmentOptions opts;
  opts.segment_len = segment_len;
  opts.interval_slots = 4;
  return SegmentEncode(testing::RandomIds(content, vocab, rng), opts);
}

double MaxAbsDiff(const Tensor<double>& a, const Tensor<double>& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double worst = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i)
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

class DecoderTest : public ::testing::Test {
 protected:
  Tensor<double> Logits(SegTrmModel<double>& model, const SegmentedInput& in,
                        const std::vector<int>& prefix) {
    Graph<double> g;
    return model.Run(g, in, prefix).logits.value();
  }

  ModelConfig cfg_ = TinyConfig();
};

TEST_F(DecoderTest, LogitShape) {
  SegTrmModel<double> model(cfg_, 1);
  SegmentedInput in = MakeInput(11, 3, 2);
  const std::vector<int> prefix = {7, kHashSepId, 9};
  EXPECT_EQ(Logits(model, in, prefix).shape(), (Shape{4, cfg_.vocab_size}));
  EXPECT_EQ(Logits(model, in, {}).shape(), (Shape{1, cfg_.vocab_size}));
}

TEST_F(DecoderTest, CausalInvariance) {
  SegTrmModel<double> model(cfg_, 3);
  testing::ScaleWeights(model.params(), 4.0);
  SegmentedInput in = MakeInput(12, 3, 4);
  std::mt19937_64 rng(5);
  const std::vector<int> prefix = testing::RandomIds(6, 20, rng);
  const Tensor<double> base = Logits(model, in, prefix);
  for (std::size_t t = 0; t < prefix.size(); ++t) {
    std::vector<int> changed = prefix;
    for (std::size_t j = t; j < changed.size(); ++j) changed[j] = kNumReserved + (changed[j] + 1) % 10;
    const Tensor<double> other = Logits(model, in, changed);
    // Rows 0..t only see prefix tokens before position t.
    for (std::size_t r = 0; r <= t; ++r)
      for (std::size_t c = 0; c < base.cols(); ++c) EXPECT_EQ(base.at(r, c), other.at(r, c));
    double moved = 0;
    for (std::size_t c = 0; c < base.cols(); ++c)
      moved += std::abs(base.at(t + 1, c) - other.at(t + 1, c));
    EXPECT_GT(moved, 0.0);
  }
}

TEST_F(DecoderTest, CrossAttentionRowsSumToOne) {
  SegTrmModel<double> model(cfg_, 6);
  SegmentedInput in = MakeInput(14, 3, 7);
  AttentionTrace<double> trace;
  Graph<double> g;
  auto pass = model.Run(g, in, std::vector<int>{8, 9, 10}, &trace);
  ASSERT_EQ(trace.decoder_cross.size(), cfg_.decoder.layers * cfg_.decoder.heads);
  for (const auto& w : trace.decoder_cross) {
    ASSERT_EQ(w.rows(), 4u);
    ASSERT_EQ(w.cols(), pass.selection.h_xs.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double total = 0;
      for (double v : w.row(r)) total += v;
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST_F(DecoderTest, PrefixLongerThanLimitThrows) {
  cfg_.decoder.max_target_len = 4;
  SegTrmModel<double> model(cfg_, 8);
  SegmentedInput in = MakeInput(6, 3, 9);
  Graph<double> g;
  EXPECT_NO_THROW(model.Run(g, in, std::vector<int>{7, 7, 7}));
  EXPECT_THROW(model.Run(g, in, std::vector<int>{7, 7, 7, 7}), std::out_of_range);
}

TEST_F(DecoderTest, FullModelGradientCheck) {
  for (SsmMode mode : {SsmMode::kSoft, SsmMode::kHard}) {
    cfg_.ssm.mode = mode;
    SegTrmModel<double> model(cfg_, 10);
    testing::ScaleWeights(model.params(), 5.0);
    SegmentedInput in = MakeInput(10, 3, 11);
    const std::vector<int> target = {7, kHashSepId, 8, 9, kEndId};
    auto report = GradCheck(
        [&](Graph<double>& g) { return model.Loss(g, in, target); }, model.params(), 250, 12);
    EXPECT_LT(report.max_relative_error, 1e-4) << SsmModeName(mode) << " " << report.worst;
    EXPECT_GT(report.nonzero_coordinates, 100u);
  }
}

TEST_F(DecoderTest, UnselectedEncoderRowsDoNotAffectLogits) {
  cfg_.ssm.k = 1;
  SegTrmModel<double> model(cfg_, 13);
  SegmentedInput in = MakeInput(12, 3, 14);
  const std::vector<int> prefix = {7, 8};

  Graph<double> g;
  auto pass = model.Run(g, in, prefix);
  const std::vector<std::size_t> rows = pass.selection.rows;
  const Tensor<double> logits = pass.logits.value();

  // Feed the decoder the same selected rows from an encoder output whose
  // other rows are replaced with noise.
  Tensor<double> h = pass.states.h.value();
  std::mt19937_64 rng(15);
  std::normal_distribution<double> noise;
  for (std::size_t r = 0; r < h.rows(); ++r) {
    if (std::find(rows.begin(), rows.end(), r) != rows.end()) continue;
    for (double& v : h.row(r)) v += 10 * noise(rng);
  }
  Graph<double> g2;
  EncoderStates<double> states = pass.states;
  states.h = g2.Constant(h);
  auto sel = SelectAndRecombine(states, cfg_.ssm);
  if (sel.chosen == pass.selection.chosen) {
    Var<double> h_s = GatherRows(states.h, std::vector<std::size_t>{states.s_index});
    Tensor<double> again =
        DecoderForward(g2, model.params(), cfg_.decoder, prefix, h_s, sel.h_xs).value();
    EXPECT_EQ(again, logits);
  }
  // The selection scores use [SEG] rows only, so perturbing content rows of
  // unchosen segments cannot change the chosen set.
  EXPECT_EQ(sel.chosen.size(), 1u);
}

TEST_F(DecoderTest, TeacherForcedLossIsDeterministic) {
  SegTrmModel<double> model(cfg_, 16);
  SegmentedInput in = MakeInput(9, 3, 17);
  const std::vector<int> target = {7, 8, kEndId};
  Graph<double> a, b;
  EXPECT_EQ(model.Loss(a, in, target).value().values()[0], model.Loss(b, in, target).value().values()[0]);
}

TEST_F(DecoderTest, SoftWithAllSegmentsEqualsSelectionOff) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    SegmentedInput in = MakeInput(5 + rng() % 20, 2 + rng() % 3, rng());
    const std::vector<int> prefix = testing::RandomIds(3, 20, rng);
    ModelConfig soft = cfg_;
    soft.ssm.mode = SsmMode::kSoft;
    soft.ssm.k = in.num_segments() + trial % 3;
    ModelConfig off = cfg_;
    off.ssm.mode = SsmMode::kOff;
    SegTrmModel<double> a(soft, 19), b(off, 19);
    EXPECT_LE(MaxAbsDiff(Logits(a, in, prefix), Logits(b, in, prefix)), 1e-6);
  }
}

TEST_F(DecoderTest, HardWithAllSegmentsIsHardbase) {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 10; ++trial) {
    SegmentedInput in = MakeInput(5 + rng() % 20, 2 + rng() % 3, rng());
    const std::vector<int> prefix = testing::RandomIds(2, 20, rng);
    ModelConfig hard = cfg_;
    hard.ssm.mode = SsmMode::kHard;
    hard.ssm.k = in.num_segments();
    ModelConfig base = hard;
    base.ssm.k = 1000;
    SegTrmModel<double> a(hard, 21), b(base, 21);
    EXPECT_EQ(Logits(a, in, prefix), Logits(b, in, prefix));
  }
}

TEST_F(DecoderTest, OutputProjectionIsTiedToTokenEmbedding) {
  SegTrmModel<double> model(cfg_, 22);
  EXPECT_FALSE(model.params().contains("out.weight"));
  SegmentedInput in = MakeInput(6, 3, 23);
  Graph<double> g;
  g.Backward(model.Loss(g, in, std::vector<int>{7, kEndId}));
  double mag = 0;
  for (double v : model.params().at(kTokenEmbedding).grad.row(7)) mag += std::abs(v);
  EXPECT_GT(mag, 0.0);
}

}  // namespace
}  // namespace segtrm
