#include <gtest/gtest.h>

#include <random>

#include "reference_transformer.h"
#include "segtrm/encoder.h"
#include "segtrm/gradcheck.h"
#include "segtrm/model.h"
#include "test_util.h"

namespace segtrm {
namespace {

using testing::Matrix;
using testing::TinyConfig;

SegmentedInput MakeInput(std::size_t content, std::size_t segment_len, std::uint64_t seed,
                         int vocab = 20, std::size_t pad_to = 0) {
  std::mt19937_64 rng(seed);
  SegmentOptions opts;
  opts.segment_len = segment_len;
  opts.interval_slots = 4;
  opts.pad_to = pad_to;
  return SegmentEncode(testing::RandomIds(content, vocab, rng), opts);
}

Matrix ToMatrix(const Tensor<double>& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

class EncoderTest : public ::testing::Test {
 protected:
  ModelConfig cfg_ = TinyConfig();
  ParamStore<double> params_ = InitModelParams<double>(cfg_, 5);
};

TEST_F(EncoderTest, EmbedWithZeroedTablesIsTokenEmbedding) {
  params_.at("enc.pos_emb").value.Fill(0.0);
  params_.at("enc.seg_emb").value.Fill(0.0);
  SegmentedInput in = MakeInput(7, 3, 1);
  Graph<double> g;
  const Tensor<double>& h = Embed(g, params_, in, cfg_.encoder).value();
  const Tensor<double>& table = params_.at(kTokenEmbedding).value;
  for (std::size_t r = 0; r < in.size(); ++r)
    for (std::size_t c = 0; c < h.cols(); ++c) EXPECT_EQ(h.at(r, c), table.at(in.ids[r], c));
}

TEST_F(EncoderTest, SameTokenAtTwoPositionsDiffersByPositionEmbedding) {
  params_.at("enc.seg_emb").value.Fill(0.0);
  SegmentOptions opts;
  opts.segment_len = 4;
  SegmentedInput in = SegmentEncode(std::vector<int>{9, 9, 9}, opts);
  Graph<double> g;
  const Tensor<double>& h = Embed(g, params_, in, cfg_.encoder).value();
  const Tensor<double>& pos = params_.at("enc.pos_emb").value;
  for (std::size_t c = 0; c < h.cols(); ++c) {
    EXPECT_NEAR(h.at(2, c) - h.at(4, c), pos.at(2, c) - pos.at(4, c), 1e-12);
  }
}

TEST_F(EncoderTest, EmbedRejectsPositionsBeyondTable) {
  cfg_.encoder.max_positions = 8;
  SegmentedInput in = MakeInput(12, 3, 1);
  Graph<double> g;
  EXPECT_THROW(Embed(g, params_, in, cfg_.encoder), std::out_of_range);
}

TEST_F(EncoderTest, EmbedGradientsMatchFiniteDifferences) {
  SegmentedInput in = MakeInput(9, 4, 2);
  std::mt19937_64 rng(3);
  Tensor<double> probe = testing::RandomTensor<double>({in.size(), cfg_.encoder.hidden}, rng);
  ParamStore<double> tables;
  for (const char* name : {kTokenEmbedding, "enc.pos_emb", "enc.seg_emb"}) {
    tables.Add(name, params_.at(name).value);
  }
  auto report = GradCheck(
      [&](Graph<double>& g) {
        Var<double> h = Embed(g, tables, in, cfg_.encoder);
        return Sum(Mul(Mul(h, h), g.Constant(probe)));
      },
      tables, 120, 4);
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
  EXPECT_GT(report.nonzero_coordinates, 0u);
}

TEST_F(EncoderTest, SgtLayerWithAllOnesMaskMatchesVanillaOracle) {
  cfg_.encoder.heads = 1;
  testing::ScaleWeights(params_, 10.0);
  SegmentedInput in = MakeInput(10, 3, 4);
  in.mask.bits.assign(in.size() * in.size(), 1);
  Graph<double> g;
  Var<double> h0 = Embed(g, params_, in, cfg_.encoder);
  Var<double> mask = g.Constant(AdditiveMask<double>(in.mask));
  const Tensor<double>& got = SgtLayer(g, params_, "enc.layer0", h0, mask, cfg_.encoder).value();
  Matrix want = testing::VanillaEncoderLayer(params_, "enc.layer0", ToMatrix(h0.value()), 1, in.size());
  ASSERT_EQ(got.rows(), in.size());
  for (std::size_t r = 0; r < got.rows(); ++r)
    for (std::size_t c = 0; c < got.cols(); ++c) EXPECT_NEAR(got.at(r, c), want[r][c], 1e-10);
}

TEST_F(EncoderTest, OutputShapeMatchesInput) {
  for (std::size_t n : {1u, 4u, 17u}) {
    SegmentedInput in = MakeInput(n, 3, n);
    Graph<double> g;
    EncoderStates<double> s = Encode(g, params_, in, cfg_.encoder);
    EXPECT_EQ(s.h.value().shape(), (Shape{in.size(), cfg_.encoder.hidden}));
    EXPECT_EQ(s.seg_indices, in.seg_marker_positions);
  }
}

TEST_F(EncoderTest, SegmentRowsOnlyAttendWithinTheirSegment) {
  testing::ScaleWeights(params_, 20.0);
  SegmentedInput in = MakeInput(23, 4, 6, 20, 32);
  Graph<double> g;
  AttentionTrace<double> trace;
  Encode(g, params_, in, cfg_.encoder, &trace);
  ASSERT_EQ(trace.encoder_self.size(), cfg_.encoder.layers * cfg_.encoder.heads);
  for (const Tensor<double>& w : trace.encoder_self) {
    for (std::size_t s = 0; s < in.num_segments(); ++s) {
      const std::size_t r = in.seg_marker_positions[s];
      double outside = 0.0;
      for (std::size_t c = 0; c < in.size(); ++c) {
        if (!in.mask.at(r, c)) outside += w.at(r, c);
      }
      EXPECT_LT(outside, 1e-6);
    }
    for (std::size_t r = 0; r < in.size(); ++r) {
      double total = 0;
      for (std::size_t c = 0; c < in.size(); ++c) total += w.at(r, c);
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST_F(EncoderTest, ZeroLayersReturnsEmbedding) {
  cfg_.encoder.layers = 0;
  SegmentedInput in = MakeInput(8, 3, 7);
  Graph<double> g;
  EncoderStates<double> s = Encode(g, params_, in, cfg_.encoder);
  Graph<double> g2;
  EXPECT_EQ(s.h.value(), Embed(g2, params_, in, cfg_.encoder).value());
}

TEST_F(EncoderTest, DeterministicWithDropoutOff) {
  SegmentedInput in = MakeInput(11, 3, 8);
  Graph<double> a(true, 1);
  Graph<double> b(true, 2);
  EXPECT_EQ(Encode(a, params_, in, cfg_.encoder).h.value(),
            Encode(b, params_, in, cfg_.encoder).h.value());
}

TEST_F(EncoderTest, SwappingTwoSegmentsOnlyMovesTheirMarkersAtLayerOne) {
  cfg_.encoder.layers = 1;
  SegmentOptions opts;
  opts.segment_len = 3;
  opts.interval_slots = 4;
  const std::vector<int> ids = {6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17};
  std::vector<int> swapped = ids;
  std::swap_ranges(swapped.begin(), swapped.begin() + 3, swapped.begin() + 6);  // segments 0 and 2
  SegmentedInput a = SegmentEncode(ids, opts);
  SegmentedInput b = SegmentEncode(swapped, opts);
  Graph<double> ga, gb;
  const Tensor<double>& ha = Encode(ga, params_, a, cfg_.encoder).h.value();
  const Tensor<double>& hb = Encode(gb, params_, b, cfg_.encoder).h.value();
  auto row_diff = [&](std::size_t r) {
    double d = 0;
    for (std::size_t c = 0; c < ha.cols(); ++c) d = std::max(d, std::abs(ha.at(r, c) - hb.at(r, c)));
    return d;
  };
  EXPECT_GT(row_diff(a.seg_marker_positions[0]), 1e-6);
  EXPECT_GT(row_diff(a.seg_marker_positions[2]), 1e-6);
  EXPECT_LT(row_diff(a.seg_marker_positions[1]), 1e-12);
  EXPECT_LT(row_diff(a.seg_marker_positions[3]), 1e-12);
}

TEST_F(EncoderTest, FullEncoderGradientCheck) {
  testing::ScaleWeights(params_, 5.0);
  SegmentedInput in = MakeInput(10, 3, 9);
  std::mt19937_64 rng(10);
  Tensor<double> probe = testing::RandomTensor<double>({in.size(), cfg_.encoder.hidden}, rng);
  auto report = GradCheck(
      [&](Graph<double>& g) {
        return Sum(Mul(Encode(g, params_, in, cfg_.encoder).h, g.Constant(probe)));
      },
      params_, 300, 11);
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
}

TEST_F(EncoderTest, SingleLayerOnFiveTokensGradientCheck) {
  SegmentedInput in = MakeInput(3, 3, 12);  // [S] [SEG] a b c
  ASSERT_EQ(in.size(), 5u);
  std::mt19937_64 rng(13);
  const Tensor<double> h0 = testing::RandomTensor<double>({in.size(), cfg_.encoder.hidden}, rng);
  const Tensor<double> probe = testing::RandomTensor<double>({in.size(), cfg_.encoder.hidden}, rng);
  auto report = GradCheck(
      [&](Graph<double>& g) {
        Var<double> mask = g.Constant(AdditiveMask<double>(in.mask));
        Var<double> out = SgtLayer(g, params_, "enc.layer0", g.Constant(h0), mask, cfg_.encoder);
        return Sum(Mul(out, g.Constant(probe)));
      },
      params_, 200, 14);
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst;
}

TEST_F(EncoderTest, AllOnesMaskAndZeroSegmentTableIsVanillaEncoder) {
  params_.at("enc.seg_emb").value.Fill(0.0);
  testing::ScaleWeights(params_, 8.0);
  SegmentedInput in = MakeInput(14, 4, 15);
  in.mask.bits.assign(in.size() * in.size(), 1);
  Graph<double> g;
  const Tensor<double>& got = Encode(g, params_, in, cfg_.encoder).h.value();

  Matrix x(in.size(), std::vector<double>(cfg_.encoder.hidden));
  const Tensor<double>& tok = params_.at(kTokenEmbedding).value;
  const Tensor<double>& pos = params_.at("enc.pos_emb").value;
  for (std::size_t r = 0; r < in.size(); ++r)
    for (std::size_t c = 0; c < x[r].size(); ++c) x[r][c] = tok.at(in.ids[r], c) + pos.at(r, c);
  for (std::size_t l = 0; l < cfg_.encoder.layers; ++l) {
    x = testing::VanillaEncoderLayer(params_, "enc.layer" + std::to_string(l), x,
                                     cfg_.encoder.heads, in.size());
  }
  for (std::size_t r = 0; r < got.rows(); ++r)
    for (std::size_t c = 0; c < got.cols(); ++c) EXPECT_NEAR(got.at(r, c), x[r][c], 1e-5);
}

}  // namespace
}  // namespace segtrm
