#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "segtrm/tokenize.h"

namespace segtrm {
namespace {

std::vector<std::string> Letters(std::size_t n) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n; ++i) tokens.push_back(std::string(1, static_cast<char>('a' + i % 26)));
  return tokens;
}

// Independent rebuild of the mask rule from the layout alone: a [SEG] row
// covers itself and every following content token up to the next marker.
std::set<std::size_t> SegmentMembers(const std::vector<int>& ids, std::size_t marker,
                                     std::size_t length) {
  std::set<std::size_t> members{marker};
  for (std::size_t i = marker + 1; i < length && ids[i] != kSegmentId; ++i) members.insert(i);
  return members;
}

TEST(TokenizeTest, WordModeLowercasesAndSplitsOnWhitespace) {
  EXPECT_EQ(Tokenize("  Farmers\tMARKET  today ", TokenMode::kWord),
            (std::vector<std::string>{"farmers", "market", "today"}));
}

TEST(TokenizeTest, CharModeSplitsCodePointsAndDropsSpaces) {
  EXPECT_EQ(Tokenize("ab", TokenMode::kChar), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(Tokenize("微博 话题", TokenMode::kChar),
            (std::vector<std::string>{"微", "博", "话", "题"}));
  EXPECT_EQ(CharCount("微博ab"), 4u);
}

TEST(VocabularyTest, MinFrequencyFilters) {
  Vocabulary v = Vocabulary::Build({"a a b"}, 2, TokenMode::kWord);
  EXPECT_TRUE(v.Contains("a"));
  EXPECT_FALSE(v.Contains("b"));
  EXPECT_EQ(v.Id("b"), kUnkId);
}

TEST(VocabularyTest, CharModeTokens) {
  Vocabulary v = Vocabulary::Build({"ab"}, 1, TokenMode::kChar);
  EXPECT_EQ(v.size(), static_cast<std::size_t>(kNumReserved) + 2);
  EXPECT_TRUE(v.Contains("a"));
  EXPECT_TRUE(v.Contains("b"));
}

TEST(VocabularyTest, ReservedIdsAndDeterministicOrder) {
  const std::vector<std::string> corpus = {"c b a b c c", "d"};
  Vocabulary v = Vocabulary::Build(corpus, 1, TokenMode::kWord);
  EXPECT_EQ(v, Vocabulary::Build(corpus, 1, TokenMode::kWord));
  EXPECT_EQ(v.Token(kPadId), "[PAD]");
  EXPECT_EQ(v.Token(kUnkId), "[UNK]");
  EXPECT_EQ(v.Token(kGlobalId), "[S]");
  EXPECT_EQ(v.Token(kSegmentId), "[SEG]");
  EXPECT_EQ(v.Token(kEndId), "[SEP]");
  EXPECT_EQ(v.Token(kHashSepId), "#");
  // frequency desc, then lexicographic
  EXPECT_EQ(v.Token(6), "c");
  EXPECT_EQ(v.Token(7), "b");
  EXPECT_EQ(v.Token(8), "a");
  EXPECT_EQ(v.Token(9), "d");
}

TEST(VocabularyTest, SerializationRoundTripAndValidation) {
  Vocabulary v = Vocabulary::Build({"x y z y"}, 1, TokenMode::kWord);
  const std::string text = v.Serialize();
  EXPECT_EQ(text.substr(0, 8), "[PAD]\t0\n");
  EXPECT_EQ(Vocabulary::Deserialize(text), v);
  EXPECT_THROW(Vocabulary::Deserialize("[PAD]\t0\n[UNK]\t2\n"), std::runtime_error);
  EXPECT_THROW(Vocabulary::Deserialize("foo\t0\n"), std::runtime_error);
}

TEST(SegmentEncodeTest, ElevenTokensWithSegmentLengthFive) {
  SegmentOptions opts;
  opts.segment_len = 5;
  Vocabulary v = Vocabulary::Build({"a b c d e f g h i j k"}, 1, TokenMode::kWord);
  SegmentedInput in = SegmentEncode(Letters(11), v, opts);
  EXPECT_EQ(in.size(), 15u);
  EXPECT_EQ(in.num_segments(), 3u);
  ASSERT_EQ(in.segment_spans.size(), 3u);
  EXPECT_EQ(in.segment_spans[0].size(), 5u);
  EXPECT_EQ(in.segment_spans[1].size(), 5u);
  EXPECT_EQ(in.segment_spans[2].size(), 1u);
  EXPECT_EQ(in.ids[0], kGlobalId);
  EXPECT_EQ(in.seg_marker_positions, (std::vector<std::size_t>{1, 7, 13}));
  EXPECT_EQ(in.segment_ids[0], 0);
  EXPECT_EQ(in.segment_ids[1], 1);
  EXPECT_EQ(in.segment_ids[8], 2);
  EXPECT_EQ(in.segment_ids[14], 3);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(in.positions[i], static_cast<int>(i));
}

TEST(SegmentEncodeTest, ExactAndRaggedTails) {
  SegmentOptions opts;
  opts.segment_len = 5;
  SegmentedInput five = SegmentEncode(std::vector<int>(5, 7), opts);
  EXPECT_EQ(five.size(), 7u);
  EXPECT_EQ(five.num_segments(), 1u);
  SegmentedInput six = SegmentEncode(std::vector<int>(6, 7), opts);
  ASSERT_EQ(six.num_segments(), 2u);
  EXPECT_EQ(six.segment_spans[0].size(), 5u);
  EXPECT_EQ(six.segment_spans[1].size(), 1u);
}

TEST(SegmentEncodeTest, IntervalIdsCycleOverSlots) {
  SegmentOptions opts;
  opts.segment_len = 1;
  opts.interval_slots = 3;
  SegmentedInput in = SegmentEncode(std::vector<int>(5, 9), opts);
  std::vector<int> marker_ids;
  for (std::size_t p : in.seg_marker_positions) marker_ids.push_back(in.segment_ids[p]);
  EXPECT_EQ(marker_ids, (std::vector<int>{1, 2, 3, 1, 2}));
}

TEST(SegmentEncodeTest, TruncatesAndRejectsEmpty) {
  SegmentOptions opts;
  opts.segment_len = 2;
  opts.max_content_len = 3;
  SegmentedInput in = SegmentEncode(std::vector<int>(10, 8), opts);
  EXPECT_EQ(in.size(), 1u + 3u + 2u);
  EXPECT_THROW(SegmentEncode(std::vector<int>{}, opts), std::invalid_argument);
  opts.segment_len = 0;
  EXPECT_THROW(SegmentEncode(std::vector<int>{6}, opts), std::invalid_argument);
}

TEST(SegmentMaskTest, FirstSegmentMaskVector) {
  // Eleven positions: [S] then five single-token segments.
  SegmentOptions opts;
  opts.segment_len = 1;
  SegmentedInput in = SegmentEncode(std::vector<int>(5, 6), opts);
  ASSERT_EQ(in.size(), 11u);
  std::vector<int> row;
  for (std::size_t c = 0; c < 11; ++c) row.push_back(in.mask.at(1, c));
  EXPECT_EQ(row, (std::vector<int>{0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0}));
}

TEST(SegmentMaskTest, HandEnumeratedSixPositionLayout) {
  // [S],[SEG],a,b,[SEG],c
  SegmentOptions opts;
  opts.segment_len = 2;
  SegmentedInput in = SegmentEncode(std::vector<int>{6, 7, 8}, opts);
  ASSERT_EQ(in.size(), 6u);
  auto row = [&](std::size_t r) {
    std::vector<int> out;
    for (std::size_t c = 0; c < 6; ++c) out.push_back(in.mask.at(r, c));
    return out;
  };
  EXPECT_EQ(row(1), (std::vector<int>{0, 1, 1, 1, 0, 0}));
  EXPECT_EQ(row(4), (std::vector<int>{0, 0, 0, 0, 1, 1}));
  for (std::size_t r : {0u, 2u, 3u, 5u}) EXPECT_EQ(row(r), std::vector<int>(6, 1)) << r;
}

TEST(SegmentMaskTest, SingleSegmentRowIsAllOnesMinusGlobal) {
  SegmentOptions opts;
  opts.segment_len = 10;
  SegmentedInput in = SegmentEncode(std::vector<int>(4, 6), opts);
  for (std::size_t c = 0; c < in.size(); ++c) {
    EXPECT_EQ(in.mask.at(1, c), c != 0) << c;
  }
}

TEST(SegmentMaskTest, PaddingColumnsAreZero) {
  SegmentOptions opts;
  opts.segment_len = 2;
  opts.pad_to = 9;
  SegmentedInput in = SegmentEncode(std::vector<int>{6, 7, 8}, opts);
  ASSERT_EQ(in.size(), 9u);
  EXPECT_EQ(in.length, 6u);
  for (std::size_t r = 0; r < 9; ++r) {
    for (std::size_t c = 6; c < 9; ++c) EXPECT_FALSE(in.mask.at(r, c));
  }
  EXPECT_EQ(in.ids[8], kPadId);
  EXPECT_EQ(in.segment_ids[8], 0);
}

TEST(SegmentMaskTest, LocalityPropertyAgainstSetBuilder) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    SegmentOptions opts;
    opts.segment_len = 1 + rng() % 7;
    opts.pad_to = rng() % 2 ? n + 1 + 2 * n / opts.segment_len + rng() % 4 : 0;
    SegmentedInput in = SegmentEncode(std::vector<int>(n, 6), opts);
    const std::size_t expected_segments = (n + opts.segment_len - 1) / opts.segment_len;
    ASSERT_EQ(in.num_segments(), expected_segments);
    for (std::size_t marker : in.seg_marker_positions) {
      const auto members = SegmentMembers(in.ids, marker, in.length);
      for (std::size_t c = 0; c < in.size(); ++c) {
        ASSERT_EQ(in.mask.at(marker, c), members.count(c) == 1)
            << "trial " << trial << " marker " << marker << " col " << c;
      }
    }
    for (std::size_t s = 0; s + 1 < in.num_segments(); ++s) {
      ASSERT_EQ(in.segment_spans[s].size(), opts.segment_len);
    }
  }
}

class TargetTest : public ::testing::Test {
 protected:
  Vocabulary vocab_ = Vocabulary::Build({"a b c d e"}, 1, TokenMode::kWord);
  int id(const std::string& t) const { return vocab_.Id(t); }
};

TEST_F(TargetTest, SeparatorsBetweenHashtagsOnly) {
  EXPECT_EQ(EncodeTarget({"a b", "c"}, vocab_, TokenMode::kWord, 32),
            (std::vector<int>{id("a"), id("b"), kHashSepId, id("c"), kEndId}));
  EXPECT_EQ(EncodeTarget({"a"}, vocab_, TokenMode::kWord, 32),
            (std::vector<int>{id("a"), kEndId}));
  auto four = EncodeTarget({"a", "b", "c", "d"}, vocab_, TokenMode::kWord, 32);
  EXPECT_EQ(std::count(four.begin(), four.end(), kHashSepId), 3);
  EXPECT_THROW(EncodeTarget({}, vocab_, TokenMode::kWord, 32), std::invalid_argument);
}

TEST_F(TargetTest, TruncationKeepsTerminatorLast) {
  // a b # c [SEP] cut to 4 would end "a b #", the dangling separator goes.
  EXPECT_EQ(EncodeTarget({"a b", "c"}, vocab_, TokenMode::kWord, 4),
            (std::vector<int>{id("a"), id("b"), kEndId}));
  EXPECT_EQ(EncodeTarget({"a b c"}, vocab_, TokenMode::kWord, 3),
            (std::vector<int>{id("a"), id("b"), kEndId}));
}

TEST_F(TargetTest, DecodeStopsAtTerminatorAndSplits) {
  const std::vector<int> ids = {id("a"), id("b"), kHashSepId, id("c"), kEndId, id("d")};
  EXPECT_EQ(DecodeOutput(ids, vocab_, TokenMode::kWord), (std::vector<std::string>{"a b", "c"}));
  EXPECT_TRUE(DecodeOutput({kEndId}, vocab_, TokenMode::kWord).empty());
  EXPECT_EQ(DecodeOutput({kHashSepId, id("a"), kHashSepId, kHashSepId}, vocab_, TokenMode::kWord),
            (std::vector<std::string>{"a"}));
}

TEST_F(TargetTest, RoundTripOnRandomInVocabularyLists) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> tags(1 + rng() % 4);
    for (auto& tag : tags) {
      const std::size_t len = 1 + rng() % 3;
      for (std::size_t i = 0; i < len; ++i) tag += (i ? " " : "") + words[rng() % words.size()];
    }
    auto ids = EncodeTarget(tags, vocab_, TokenMode::kWord, 64);
    ASSERT_EQ(DecodeOutput(ids, vocab_, TokenMode::kWord), tags);
  }
}

TEST(IdCacheTest, RoundTripAndBadMagic) {
  const auto path = std::filesystem::temp_directory_path() / "segtrm_ids.bin";
  const std::vector<std::vector<int>> seqs = {{1, 2, 3}, {}, {42}};
  WriteIdCache(path, seqs);
  EXPECT_EQ(ReadIdCache(path), seqs);
  {
    std::ofstream out(path, std::ios::binary);
    out << "garbage!";
  }
  EXPECT_THROW(ReadIdCache(path), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace segtrm
