#include "segtrm/tokenize.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace segtrm {
namespace {

constexpr std::array<const char*, kNumReserved> kReservedTokens = {
    "[PAD]", "[UNK]", "[S]", "[SEG]", "[SEP]", "#"};

constexpr char kCacheMagic[8] = {'S', 'G', 'T', 'I', 'D', 'S', '0', '1'};
constexpr std::uint32_t kCacheVersion = 1;

bool IsSpace(unsigned char c) { return std::isspace(c) != 0; }

std::size_t CodePointWidth(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // stray continuation byte, taken on its own
}

}  // namespace

TokenMode ParseTokenMode(std::string_view name) {
  if (name == "word") return TokenMode::kWord;
  if (name == "char") return TokenMode::kChar;
  throw std::invalid_argument("unknown token mode: " + std::string(name));
}

std::string_view TokenModeName(TokenMode mode) {
  return mode == TokenMode::kWord ? "word" : "char";
}

std::vector<std::string> Tokenize(std::string_view text, TokenMode mode) {
  std::vector<std::string> tokens;
  if (mode == TokenMode::kWord) {
    std::string current;
    for (char ch : text) {
      const auto c = static_cast<unsigned char>(ch);
      if (IsSpace(c)) {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
      } else {
        current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
      }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
  }
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    const std::size_t width = std::min(CodePointWidth(lead), text.size() - i);
    if (!(width == 1 && IsSpace(lead))) tokens.emplace_back(text.substr(i, width));
    i += width;
  }
  return tokens;
}

std::string JoinTokens(const std::vector<std::string>& tokens, TokenMode mode) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i && mode == TokenMode::kWord) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::size_t CharCount(std::string_view text) {
  std::size_t count = 0;
  for (char ch : text) {
    if ((static_cast<unsigned char>(ch) & 0xC0) != 0x80) ++count;
  }
  return count;
}

// ---- Vocabulary -------------------------------------------------------------

Vocabulary::Vocabulary() {
  for (const char* token : kReservedTokens) Append(token);
}

void Vocabulary::Append(const std::string& token) {
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::Build(const std::vector<std::string>& texts, std::size_t min_freq,
                             TokenMode mode) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& token : Tokenize(text, mode)) ++counts[std::move(token)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (const auto& [token, count] : ranked) {
    if (count < min_freq || vocab.Contains(token)) continue;
    vocab.Append(token);
  }
  return vocab;
}

int Vocabulary::Id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::Token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::vector<int> Vocabulary::Encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(Id(t));
  return ids;
}

std::string Vocabulary::Serialize() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\t';
    out += std::to_string(i);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::Deserialize(std::string_view text) {
  Vocabulary vocab;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw std::runtime_error("vocabulary line without tab: " + line);
    const std::string token = line.substr(0, tab);
    const std::size_t id = std::stoul(line.substr(tab + 1));
    if (id != expected) {
      throw std::runtime_error("vocabulary ids must be contiguous; expected " +
                               std::to_string(expected) + " at token '" + token + "'");
    }
    if (id < kNumReserved) {
      if (token != kReservedTokens[id]) {
        throw std::runtime_error("vocabulary reserved id " + std::to_string(id) + " is '" + token +
                                 "', expected '" + kReservedTokens[id] + "'");
      }
    } else {
      if (vocab.Contains(token)) throw std::runtime_error("duplicate vocabulary token: " + token);
      vocab.Append(token);
    }
    ++expected;
  }
  if (expected < kNumReserved) throw std::runtime_error("vocabulary is missing reserved tokens");
  return vocab;
}

void Vocabulary::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary: " + path.string());
  out << Serialize();
}

Vocabulary Vocabulary::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return Deserialize(buf.str());
}

// ---- segmentation -----------------------------------------------------------

SegmentedInput SegmentEncode(const std::vector<int>& content_ids, const SegmentOptions& opts) {
  if (content_ids.empty()) throw std::invalid_argument("SegmentEncode: empty token list");
  if (opts.segment_len == 0) throw std::invalid_argument("SegmentEncode: segment length must be >= 1");
  if (opts.interval_slots == 0) throw std::invalid_argument("SegmentEncode: need >= 1 interval slot");
  const std::size_t content = std::min(content_ids.size(), opts.max_content_len);
  if (content == 0) throw std::invalid_argument("SegmentEncode: max_content_len is 0");

  SegmentedInput in;
  in.ids.push_back(kGlobalId);
  in.segment_ids.push_back(0);
  for (std::size_t start = 0, seg = 0; start < content; start += opts.segment_len, ++seg) {
    const int interval = static_cast<int>(seg % opts.interval_slots) + 1;
    in.seg_marker_positions.push_back(in.ids.size());
    in.ids.push_back(kSegmentId);
    in.segment_ids.push_back(interval);
    const std::size_t stop = std::min(content, start + opts.segment_len);
    SegmentSpan span{in.ids.size(), in.ids.size() + (stop - start)};
    for (std::size_t t = start; t < stop; ++t) {
      in.ids.push_back(content_ids[t]);
      in.segment_ids.push_back(interval);
    }
    in.segment_spans.push_back(span);
  }
  in.length = in.ids.size();
  if (opts.pad_to > in.length) {
    in.ids.resize(opts.pad_to, kPadId);
    in.segment_ids.resize(opts.pad_to, 0);
  }
  in.positions.resize(in.ids.size());
  for (std::size_t i = 0; i < in.positions.size(); ++i) in.positions[i] = static_cast<int>(i);
  in.mask = BuildSegmentMask(in);
  return in;
}

SegmentedInput SegmentEncode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                             const SegmentOptions& opts) {
  return SegmentEncode(vocab.Encode(tokens), opts);
}

SegmentMask BuildSegmentMask(const SegmentedInput& input) {
  SegmentMask mask;
  const std::size_t n = input.size();
  mask.n = n;
  mask.bits.assign(n * n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    std::fill_n(mask.bits.begin() + r * n, input.length, 1);
  }
  for (std::size_t s = 0; s < input.num_segments(); ++s) {
    const std::size_t r = input.seg_marker_positions[s];
    auto row = mask.bits.begin() + r * n;
    std::fill_n(row, n, 0);
    row[r] = 1;
    const SegmentSpan& span = input.segment_spans[s];
    std::fill(row + span.begin, row + span.end, 1);
  }
  return mask;
}

// ---- targets ----------------------------------------------------------------

std::vector<int> EncodeTarget(const std::vector<std::string>& hashtags, const Vocabulary& vocab,
                              TokenMode mode, std::size_t max_len) {
  if (hashtags.empty()) throw std::invalid_argument("EncodeTarget: empty hashtag list");
  if (max_len == 0) throw std::invalid_argument("EncodeTarget: max_len must be >= 1");
  std::vector<int> ids;
  for (const auto& tag : hashtags) {
    auto tokens = Tokenize(tag, mode);
    if (tokens.empty()) continue;
    if (!ids.empty()) ids.push_back(kHashSepId);
    for (int id : vocab.Encode(tokens)) ids.push_back(id);
  }
  if (ids.size() > max_len - 1) ids.resize(max_len - 1);
  while (!ids.empty() && ids.back() == kHashSepId) ids.pop_back();
  ids.push_back(kEndId);
  return ids;
}

std::vector<std::string> DecodeOutput(const std::vector<int>& ids, const Vocabulary& vocab,
                                      TokenMode mode) {
  std::vector<std::string> hashtags;
  std::vector<std::string> current;
  auto flush = [&] {
    if (!current.empty()) hashtags.push_back(JoinTokens(current, mode));
    current.clear();
  };
  for (int id : ids) {
    if (id == kEndId) break;
    if (id == kHashSepId) {
      flush();
    } else if (id != kPadId && id != kGlobalId && id != kSegmentId) {
      current.push_back(vocab.Token(id));
    }
  }
  flush();
  return hashtags;
}

// ---- id cache ---------------------------------------------------------------

void WriteIdCache(const std::filesystem::path& path, const std::vector<std::vector<int>>& seqs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write id cache: " + path.string());
  out.write(kCacheMagic, sizeof(kCacheMagic));
  out.write(reinterpret_cast<const char*>(&kCacheVersion), sizeof(kCacheVersion));
  const std::uint64_t count = seqs.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& seq : seqs) {
    const std::uint32_t len = static_cast<std::uint32_t>(seq.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    for (int id : seq) {
      const std::int32_t v = id;
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  if (!out) throw std::runtime_error("failed writing id cache: " + path.string());
}

std::vector<std::vector<int>> ReadIdCache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read id cache: " + path.string());
  char magic[sizeof(kCacheMagic)];
  std::uint32_t version = 0;
  std::uint64_t count = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not an id cache: " + path.string());
  }
  if (version != kCacheVersion) {
    throw std::runtime_error("id cache version " + std::to_string(version) + " unsupported");
  }
  std::vector<std::vector<int>> seqs;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::vector<std::int32_t> raw(len);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(len * sizeof(std::int32_t)));
    if (!in) throw std::runtime_error("truncated id cache: " + path.string());
    seqs.emplace_back(raw.begin(), raw.end());
  }
  return seqs;
}

}  // namespace segtrm
