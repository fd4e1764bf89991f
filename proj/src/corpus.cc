#include "segtrm/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace segtrm {
namespace {

bool IsBlank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

struct Span {
  std::size_t begin;  // first byte of the marked span
  std::size_t end;    // one past its last byte
  std::string text;
};

std::vector<Span> WeiboSpans(std::string_view post) {
  std::vector<std::size_t> marks;
  for (std::size_t i = 0; i < post.size(); ++i) {
    if (post[i] == '#') marks.push_back(i);
  }
  if (marks.size() % 2 != 0) {
    throw std::invalid_argument("unterminated '#' hashtag at byte " + std::to_string(marks.back()));
  }
  std::vector<Span> spans;
  for (std::size_t i = 0; i < marks.size(); i += 2) {
    const auto inner = Trim(post.substr(marks[i] + 1, marks[i + 1] - marks[i] - 1));
    if (inner.empty()) {
      throw std::invalid_argument("empty '##' hashtag at byte " + std::to_string(marks[i]));
    }
    spans.push_back({marks[i], marks[i + 1] + 1, std::string(inner)});
  }
  return spans;
}

bool IsTwitterTag(std::string_view token) {
  return token.size() > 1 && token[0] == '#' && token.find('#', 1) == std::string_view::npos;
}

std::vector<Span> TwitterTokens(std::string_view post) {
  std::vector<Span> tokens;
  std::size_t i = 0;
  while (i < post.size()) {
    while (i < post.size() && std::isspace(static_cast<unsigned char>(post[i]))) ++i;
    if (i >= post.size()) break;
    std::size_t j = i;
    while (j < post.size() && !std::isspace(static_cast<unsigned char>(post[j]))) ++j;
    tokens.push_back({i, j, std::string(post.substr(i, j - i))});
    i = j;
  }
  return tokens;
}

}  // namespace

HashtagStyle ParseHashtagStyle(std::string_view name) {
  if (name == "weibo") return HashtagStyle::kWeibo;
  if (name == "twitter") return HashtagStyle::kTwitter;
  throw std::invalid_argument("unknown hashtag style: " + std::string(name));
}

std::size_t DefaultMinBodyChars(HashtagStyle style) {
  return style == HashtagStyle::kWeibo ? 60 : 0;
}

Extraction ExtractHashtags(std::string_view raw_post, HashtagStyle style) {
  Extraction out;
  std::vector<std::string> trailing;
  std::size_t body_begin = 0;
  std::size_t body_end = raw_post.size();

  if (style == HashtagStyle::kWeibo) {
    const auto spans = WeiboSpans(raw_post);
    std::size_t lead = 0;
    while (lead < spans.size() &&
           IsBlank(raw_post.substr(body_begin, spans[lead].begin - body_begin))) {
      out.hashtags.push_back(spans[lead].text);
      body_begin = spans[lead].end;
      ++lead;
    }
    for (std::size_t j = spans.size(); j > lead; --j) {
      const Span& span = spans[j - 1];
      if (!IsBlank(raw_post.substr(span.end, body_end - span.end))) break;
      trailing.push_back(span.text);
      body_end = span.begin;
    }
  } else {
    const auto tokens = TwitterTokens(raw_post);
    std::size_t lead = 0;
    while (lead < tokens.size() && IsTwitterTag(tokens[lead].text)) {
      out.hashtags.push_back(tokens[lead].text.substr(1));
      body_begin = tokens[lead].end;
      ++lead;
    }
    for (std::size_t j = tokens.size(); j > lead && IsTwitterTag(tokens[j - 1].text); --j) {
      trailing.push_back(tokens[j - 1].text.substr(1));
      body_end = tokens[j - 1].begin;
    }
  }
  out.hashtags.insert(out.hashtags.end(), trailing.rbegin(), trailing.rend());
  out.body = std::string(Trim(raw_post.substr(body_begin, body_end - body_begin)));
  return out;
}

std::string RenderPost(const std::string& body, const std::vector<std::string>& hashtags,
                       HashtagStyle style) {
  std::string out = body;
  for (const auto& tag : hashtags) {
    out += style == HashtagStyle::kWeibo ? " #" + tag + "#" : " #" + tag;
  }
  return out;
}

std::vector<PostRecord> FilterRecords(const std::vector<PostRecord>& records,
                                      std::size_t min_body_chars) {
  std::set<std::pair<std::string, std::vector<std::string>>> seen;
  std::vector<PostRecord> kept;
  for (const auto& r : records) {
    if (r.hashtags.empty() || r.body.empty() || CharCount(r.body) < min_body_chars) continue;
    if (!seen.emplace(r.body, r.hashtags).second) continue;
    kept.push_back(r);
  }
  return kept;
}

std::size_t CoverageLength95(std::vector<std::size_t> lengths) {
  if (lengths.empty()) throw std::invalid_argument("coverage length of an empty list");
  std::sort(lengths.begin(), lengths.end());
  // Need count c with 100 * c >= 95 * n.
  const std::size_t need = (95 * lengths.size() + 99) / 100;
  return lengths[std::max<std::size_t>(need, 1) - 1];
}

CorpusStats ComputeCorpusStats(const std::vector<PostRecord>& records, TokenMode mode) {
  if (records.empty()) throw std::invalid_argument("corpus statistics need a nonempty corpus");
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
  std::size_t hashtags = 0;
  for (const auto& r : records) {
    source.push_back(Tokenize(r.body, mode).size());
    std::size_t len = 0;
    std::size_t nonempty = 0;
    for (const auto& tag : r.hashtags) {
      const std::size_t n = Tokenize(tag, mode).size();
      len += n;
      nonempty += n > 0;
    }
    len += (nonempty > 0 ? nonempty - 1 : 0) + 1;
    target.push_back(len);
    hashtags += r.hashtags.size();
  }
  auto mean = [](const std::vector<std::size_t>& v) {
    double total = 0;
    for (auto x : v) total += static_cast<double>(x);
    return total / static_cast<double>(v.size());
  };
  CorpusStats stats;
  stats.pair_count = records.size();
  stats.avg_source_len = mean(source);
  stats.cov_source_len_95 = CoverageLength95(source);
  stats.avg_target_len = mean(target);
  stats.cov_target_len_95 = CoverageLength95(target);
  stats.avg_hashtags = static_cast<double>(hashtags) / static_cast<double>(records.size());
  return stats;
}

std::string StatsToJson(const CorpusStats& stats) {
  nlohmann::json j = {
      {"pair_count", stats.pair_count},
      {"avg_source_len", stats.avg_source_len},
      {"cov_source_len_95", stats.cov_source_len_95},
      {"avg_target_len", stats.avg_target_len},
      {"cov_target_len_95", stats.cov_target_len_95},
      {"avg_hashtags", stats.avg_hashtags},
  };
  return j.dump(2);
}

std::string StatsToTable(const CorpusStats& stats) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(22) << "Pairs" << stats.pair_count << "\n"
      << std::setw(22) << "AvgSourceLen" << stats.avg_source_len << "\n"
      << std::setw(22) << "CovSourceLen(95%)" << stats.cov_source_len_95 << "\n"
      << std::setw(22) << "AvgTargetLen" << stats.avg_target_len << "\n"
      << std::setw(22) << "CovTargetLen(95%)" << stats.cov_target_len_95 << "\n"
      << std::setw(22) << "AvgHashtags" << stats.avg_hashtags << "\n";
  return out.str();
}

CorpusSplit SplitCorpus(std::vector<PostRecord> records, double train_ratio, double dev_ratio,
                        double test_ratio, std::uint64_t seed) {
  for (double r : {train_ratio, dev_ratio, test_ratio}) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("split ratios must lie in [0, 1]");
  }
  if (std::abs(train_ratio + dev_ratio + test_ratio - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(records.begin(), records.end(), rng);
  const std::size_t n = records.size();
  const auto n_train = std::min<std::size_t>(n, std::llround(train_ratio * static_cast<double>(n)));
  const auto n_dev =
      std::min<std::size_t>(n - n_train, std::llround(dev_ratio * static_cast<double>(n)));
  CorpusSplit split;
  split.train.assign(records.begin(), records.begin() + n_train);
  split.dev.assign(records.begin() + n_train, records.begin() + n_train + n_dev);
  split.test.assign(records.begin() + n_train + n_dev, records.end());
  return split;
}

std::vector<PostRecord> ReadRecords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<PostRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (IsBlank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    PostRecord r;
    r.body = j.value("post", std::string());
    r.hashtags = j.value("hashtags", std::vector<std::string>());
    r.source_id = j.contains("id") ? j["id"].get<std::string>() : std::to_string(line_no);
    records.push_back(std::move(r));
  }
  return records;
}

void WriteRecords(const std::filesystem::path& path, const std::vector<PostRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::json j = {{"id", r.source_id}, {"post", r.body}, {"hashtags", r.hashtags}};
    out << j.dump() << "\n";
  }
}

IngestReport IngestRawPosts(const std::filesystem::path& path, HashtagStyle style) {
  IngestReport report;
  for (auto& r : ReadRecords(path)) {
    if (!r.hashtags.empty()) {
      report.records.push_back(std::move(r));
      continue;
    }
    try {
      Extraction e = ExtractHashtags(r.body, style);
      if (e.hashtags.empty()) {
        report.diagnostics.push_back(r.source_id + ": no boundary hashtag");
        continue;
      }
      if (e.body.empty()) {
        report.diagnostics.push_back(r.source_id + ": empty body after extraction");
        continue;
      }
      report.records.push_back({std::move(e.body), std::move(e.hashtags), r.source_id});
    } catch (const std::invalid_argument& err) {
      report.diagnostics.push_back(r.source_id + ": " + err.what());
    }
  }
  return report;
}

}  // namespace segtrm
