#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace segtrm {

// Reserved ids, fixed for every vocabulary.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kGlobalId = 2;   // [S]
inline constexpr int kSegmentId = 3;  // [SEG]
inline constexpr int kEndId = 4;      // [SEP], terminator
inline constexpr int kHashSepId = 5;  // "#", separator between hashtags
inline constexpr int kNumReserved = 6;

enum class TokenMode { kWord, kChar };

TokenMode ParseTokenMode(std::string_view name);
std::string_view TokenModeName(TokenMode mode);

// Word mode: ASCII-lowercased whitespace split. Char mode: one token per UTF-8
// code point, whitespace dropped.
std::vector<std::string> Tokenize(std::string_view text, TokenMode mode);
std::string JoinTokens(const std::vector<std::string>& tokens, TokenMode mode);

// Number of UTF-8 code points.
std::size_t CharCount(std::string_view text);

class Vocabulary {
 public:
  Vocabulary();

  // Tokens with frequency >= min_freq, ordered by frequency desc, then
  // lexicographically, after the reserved tokens.
  static Vocabulary Build(const std::vector<std::string>& texts, std::size_t min_freq,
                          TokenMode mode);

  int Id(const std::string& token) const;  // kUnkId when absent
  const std::string& Token(int id) const;
  bool Contains(const std::string& token) const { return ids_.count(token) > 0; }
  std::size_t size() const { return tokens_.size(); }
  std::vector<int> Encode(const std::vector<std::string>& tokens) const;

  // "token<TAB>id" per line, reserved tokens first.
  void Save(const std::filesystem::path& path) const;
  static Vocabulary Load(const std::filesystem::path& path);
  std::string Serialize() const;
  static Vocabulary Deserialize(std::string_view text);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void Append(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// n x n 0/1 matrix, row-major.
struct SegmentMask {
  std::size_t n = 0;
  std::vector<std::uint8_t> bits;

  bool at(std::size_t row, std::size_t col) const { return bits[row * n + col] != 0; }
};

struct SegmentSpan {
  std::size_t begin = 0;  // first content position
  std::size_t end = 0;    // one past the last content position
  std::size_t size() const { return end - begin; }
};

// Post laid out as [S] [SEG] t1..tL [SEG] tL+1..t2L ... followed by padding.
struct SegmentedInput {
  std::vector<int> ids;
  std::vector<int> positions;
  // 0 for [S] and padding, (i mod K) + 1 for segment i and its [SEG].
  std::vector<int> segment_ids;
  std::vector<std::size_t> seg_marker_positions;
  std::vector<SegmentSpan> segment_spans;
  std::size_t length = 0;  // non-padding positions
  SegmentMask mask;

  std::size_t size() const { return ids.size(); }
  std::size_t num_segments() const { return seg_marker_positions.size(); }
};

struct SegmentOptions {
  std::size_t segment_len = 5;       // L
  std::size_t max_content_len = 512;
  std::size_t interval_slots = 16;   // K
  std::size_t pad_to = 0;            // total length after padding; 0 = none
};

SegmentedInput SegmentEncode(const std::vector<int>& content_ids, const SegmentOptions& opts);
SegmentedInput SegmentEncode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                             const SegmentOptions& opts);

// [SEG] rows see their own marker and content tokens only; every other row
// sees all non-padding columns; padding columns are 0 everywhere.
SegmentMask BuildSegmentMask(const SegmentedInput& input);

// tokens(Y1) # tokens(Y2) # ... tokens(YN) [SEP], truncated to max_len with
// [SEP] kept last and no separator directly before it.
std::vector<int> EncodeTarget(const std::vector<std::string>& hashtags, const Vocabulary& vocab,
                              TokenMode mode, std::size_t max_len);

// Stops at the first [SEP], splits on "#", drops empty fragments.
std::vector<std::string> DecodeOutput(const std::vector<int>& ids, const Vocabulary& vocab,
                                      TokenMode mode);

// Encoded dataset cache: magic, version, then length-prefixed id arrays.
void WriteIdCache(const std::filesystem::path& path, const std::vector<std::vector<int>>& seqs);
std::vector<std::vector<int>> ReadIdCache(const std::filesystem::path& path);

}  // namespace segtrm
