#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "segtrm/tokenize.h"

namespace segtrm {

// Percentages in [0, 100].
struct RougeScores {
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
};

// 2PR / (P + R), 0 when either side is 0.
double F1(double precision, double recall);

std::size_t LcsLength(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Clipped n-gram overlap F1 for n = 1, 2 and LCS F1.
RougeScores RougeF1(const std::vector<std::string>& candidate,
                    const std::vector<std::string>& reference);

// Tokens of every hashtag, joined by the "#" separator token.
std::vector<std::string> HashtagSequence(const std::vector<std::string>& hashtags, TokenMode mode);

RougeScores SequenceRouge(const std::vector<std::string>& predicted,
                          const std::vector<std::string>& gold, TokenMode mode);

// Set F1 in [0, 1] over normalized hashtags. Throws on an empty gold set.
double F1AtK(const std::vector<std::string>& predicted, const std::vector<std::string>& gold);

// Fraction of the distinct n-grams of `generated` that occur in `source`;
// 0 when `generated` has fewer than n tokens.
double NgramOverlap(const std::vector<std::string>& generated,
                    const std::vector<std::string>& source, std::size_t n);

struct EvalReport {
  RougeScores rouge;
  std::map<std::size_t, double> f1_at_k;
  std::map<std::size_t, double> ngram_overlap;
  std::size_t instances = 0;
};

struct EvalInstance {
  std::vector<std::string> predicted;                  // best hashtag list
  std::map<std::size_t, std::vector<std::string>> topk_sets;  // k -> set
  std::vector<std::string> gold;
  std::vector<std::string> source_tokens;
};

// Corpus means of every per-instance score.
EvalReport Evaluate(const std::vector<EvalInstance>& instances, TokenMode mode,
                    const std::vector<std::size_t>& overlap_orders = {1, 2});

std::string ReportToJson(const EvalReport& report);
std::string ReportToTable(const EvalReport& report);

}  // namespace segtrm
