#include "segtrm/eval.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "segtrm/infer.h"

namespace segtrm {
namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> NgramCounts(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Ngram(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return counts;
}

double NgramF1(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
               std::size_t n) {
  const auto c = NgramCounts(cand, n);
  const auto r = NgramCounts(ref, n);
  std::size_t overlap = 0, c_total = 0, r_total = 0;
  for (const auto& [gram, count] : c) {
    c_total += count;
    auto it = r.find(gram);
    if (it != r.end()) overlap += std::min(count, it->second);
  }
  for (const auto& [gram, count] : r) r_total += count;
  if (overlap == 0) return 0.0;
  return 100.0 * F1(static_cast<double>(overlap) / c_total, static_cast<double>(overlap) / r_total);
}

}  // namespace

double F1(double precision, double recall) {
  if (precision <= 0.0 || recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::size_t LcsLength(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScores RougeF1(const std::vector<std::string>& candidate,
                    const std::vector<std::string>& reference) {
  RougeScores s;
  s.rouge1 = NgramF1(candidate, reference, 1);
  s.rouge2 = NgramF1(candidate, reference, 2);
  const std::size_t lcs = LcsLength(candidate, reference);
  if (lcs > 0) {
    s.rougeL = 100.0 * F1(static_cast<double>(lcs) / candidate.size(),
                          static_cast<double>(lcs) / reference.size());
  }
  return s;
}

std::vector<std::string> HashtagSequence(const std::vector<std::string>& hashtags,
                                         TokenMode mode) {
  std::vector<std::string> seq;
  for (std::size_t i = 0; i < hashtags.size(); ++i) {
    if (i > 0) seq.push_back("#");
    for (std::string& tok : Tokenize(hashtags[i], mode)) seq.push_back(std::move(tok));
  }
  return seq;
}

RougeScores SequenceRouge(const std::vector<std::string>& predicted,
                          const std::vector<std::string>& gold, TokenMode mode) {
  return RougeF1(HashtagSequence(predicted, mode), HashtagSequence(gold, mode));
}

double F1AtK(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  std::set<std::string> g, p;
  for (const auto& tag : gold) g.insert(NormalizeHashtag(tag));
  for (const auto& tag : predicted) p.insert(NormalizeHashtag(tag));
  g.erase("");
  p.erase("");
  if (g.empty()) throw std::invalid_argument("F1@k: empty gold hashtag set");
  std::size_t hits = 0;
  for (const auto& tag : p) hits += g.count(tag);
  if (hits == 0) return 0.0;
  return F1(static_cast<double>(hits) / p.size(), static_cast<double>(hits) / g.size());
}

double NgramOverlap(const std::vector<std::string>& generated,
                    const std::vector<std::string>& source, std::size_t n) {
  if (n == 0) throw std::invalid_argument("n-gram order must be at least 1");
  const auto gen = NgramCounts(generated, n);
  if (gen.empty()) return 0.0;
  const auto src = NgramCounts(source, n);
  std::size_t hits = 0;
  for (const auto& [gram, count] : gen) hits += src.count(gram);
  return static_cast<double>(hits) / gen.size();
}

EvalReport Evaluate(const std::vector<EvalInstance>& instances, TokenMode mode,
                    const std::vector<std::size_t>& overlap_orders) {
  EvalReport report;
  report.instances = instances.size();
  if (instances.empty()) return report;
  for (const EvalInstance& inst : instances) {
    const RougeScores r = SequenceRouge(inst.predicted, inst.gold, mode);
    report.rouge.rouge1 += r.rouge1;
    report.rouge.rouge2 += r.rouge2;
    report.rouge.rougeL += r.rougeL;
    for (const auto& [k, set] : inst.topk_sets) report.f1_at_k[k] += F1AtK(set, inst.gold);
    std::vector<std::string> generated;
    for (const auto& tag : inst.predicted) {
      for (std::string& tok : Tokenize(tag, mode)) generated.push_back(std::move(tok));
    }
    for (std::size_t n : overlap_orders) {
      report.ngram_overlap[n] += NgramOverlap(generated, inst.source_tokens, n);
    }
  }
  const double count = static_cast<double>(instances.size());
  report.rouge.rouge1 /= count;
  report.rouge.rouge2 /= count;
  report.rouge.rougeL /= count;
  for (auto& [k, v] : report.f1_at_k) v /= count;
  for (auto& [n, v] : report.ngram_overlap) v /= count;
  return report;
}

std::string ReportToJson(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["instances"] = report.instances;
  j["rouge1_f1"] = report.rouge.rouge1;
  j["rouge2_f1"] = report.rouge.rouge2;
  j["rougeL_f1"] = report.rouge.rougeL;
  nlohmann::ordered_json f1 = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.f1_at_k) f1[std::to_string(k)] = v;
  j["f1_at_k"] = f1;
  nlohmann::ordered_json overlap = nlohmann::ordered_json::object();
  for (const auto& [n, v] : report.ngram_overlap) overlap[std::to_string(n)] = v;
  j["ngram_overlap"] = overlap;
  return j.dump(2);
}

std::string ReportToTable(const EvalReport& report) {
  std::ostringstream header, row;
  auto cell = [&](const std::string& name, double value, int precision) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    const std::size_t width = std::max<std::size_t>(name.size(), 8);
    header << (header.tellp() > 0 ? "  " : "") << std::string(width - name.size(), ' ') << name;
    row << (row.tellp() > 0 ? "  " : "") << std::string(width - std::string(buf).size(), ' ')
        << buf;
  };
  cell("ROUGE-1", report.rouge.rouge1, 2);
  cell("ROUGE-2", report.rouge.rouge2, 2);
  cell("ROUGE-L", report.rouge.rougeL, 2);
  for (const auto& [k, v] : report.f1_at_k) cell("F1@" + std::to_string(k), v, 4);
  for (const auto& [n, v] : report.ngram_overlap) cell(std::to_string(n) + "-gram", v, 4);
  return header.str() + "\n" + row.str() + "\n";
}

}  // namespace segtrm
