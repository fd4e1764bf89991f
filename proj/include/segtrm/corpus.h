#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "segtrm/tokenize.h"

namespace segtrm {

struct PostRecord {
  std::string body;
  std::vector<std::string> hashtags;
  std::string source_id;

  bool operator==(const PostRecord&) const = default;
};

// Weibo marks a hashtag as "#topic#", Twitter as "#token".
enum class HashtagStyle { kWeibo, kTwitter };

HashtagStyle ParseHashtagStyle(std::string_view name);
// 60 for Weibo, 0 for Twitter.
std::size_t DefaultMinBodyChars(HashtagStyle style);

struct Extraction {
  std::string body;
  std::vector<std::string> hashtags;
};

// Moves hashtags at the start and end of the post into the hashtag list
// (order kept); hashtags in the middle stay in the body verbatim. Throws
// std::invalid_argument on malformed marking such as an unterminated "#...".
Extraction ExtractHashtags(std::string_view raw_post, HashtagStyle style);

// Inverse of ExtractHashtags for boundary-only posts: body followed by the
// marked hashtags.
std::string RenderPost(const std::string& body, const std::vector<std::string>& hashtags,
                       HashtagStyle style);

// Keeps records whose body has >= min_body_chars code points and at least one
// hashtag; drops exact duplicates (first occurrence wins).
std::vector<PostRecord> FilterRecords(const std::vector<PostRecord>& records,
                                      std::size_t min_body_chars);

struct CorpusStats {
  std::size_t pair_count = 0;
  double avg_source_len = 0;
  std::size_t cov_source_len_95 = 0;
  double avg_target_len = 0;
  std::size_t cov_target_len_95 = 0;
  double avg_hashtags = 0;
};

// Smallest L with at least 95% of lengths <= L.
std::size_t CoverageLength95(std::vector<std::size_t> lengths);

// Source length counts body tokens; target length counts the full encoded
// target (hashtag tokens, separators and terminator).
CorpusStats ComputeCorpusStats(const std::vector<PostRecord>& records, TokenMode mode);
std::string StatsToJson(const CorpusStats& stats);
std::string StatsToTable(const CorpusStats& stats);

struct CorpusSplit {
  std::vector<PostRecord> train;
  std::vector<PostRecord> dev;
  std::vector<PostRecord> test;
};

CorpusSplit SplitCorpus(std::vector<PostRecord> records, double train_ratio, double dev_ratio,
                        double test_ratio, std::uint64_t seed);

// One {"post": ..., "hashtags": [...]} object per line. "id" is optional.
std::vector<PostRecord> ReadRecords(const std::filesystem::path& path);
void WriteRecords(const std::filesystem::path& path, const std::vector<PostRecord>& records);

struct IngestReport {
  std::vector<PostRecord> records;
  std::vector<std::string> diagnostics;
};

// Reads raw posts ("post" holds the unextracted text) and extracts
// boundary hashtags. Malformed or hashtag-less posts are reported, not fatal.
IngestReport IngestRawPosts(const std::filesystem::path& path, HashtagStyle style);

}  // namespace segtrm
