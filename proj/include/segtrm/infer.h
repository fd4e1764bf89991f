#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segtrm/model.h"
#include "segtrm/tokenize.h"

namespace segtrm {

enum class LengthNorm { kMean, kOff };

LengthNorm ParseLengthNorm(std::string_view name);
std::string_view LengthNormName(LengthNorm norm);

struct BeamOptions {
  std::size_t beam_size = 20;
  std::size_t max_len = 16;
  LengthNorm length_norm = LengthNorm::kMean;
};

struct Hypothesis {
  std::vector<int> ids;
  double log_prob = 0.0;  // sum over ids
  double score = 0.0;     // log_prob, divided by ids.size() under kMean
  bool finished = false;  // ends with [SEP]
};

// Log-probabilities over the vocabulary for the token after `prefix`.
using NextLogProbFn = std::function<std::vector<double>(std::span<const int> prefix)>;

// Reserved ids other than [SEP] and "#" never appear in generated output.
bool Generatable(int id);

double HypothesisScore(const std::vector<int>& ids, double log_prob, LengthNorm norm);

// Orders by score descending, then ids lexicographically ascending.
bool RanksBefore(const Hypothesis& a, const Hypothesis& b);

// Expands every live hypothesis by each generatable token and keeps the best
// (beam_size - finished) by cumulative log-probability, ties broken by id
// order. A hypothesis is complete when it emits [SEP] or reaches max_len.
// Returns the completed hypotheses ranked by RanksBefore.
std::vector<Hypothesis> BeamSearch(const NextLogProbFn& next, const BeamOptions& opts);

template <typename T>
std::vector<Hypothesis> BeamSearch(const SegTrmModel<T>& model, const EncodedPost<T>& post,
                                   const BeamOptions& opts);

// Lowercase, trim, collapse internal whitespace runs to one space.
std::string NormalizeHashtag(std::string_view tag);

struct GeneratedHashtags {
  std::vector<std::string> best;      // decoded top hypothesis
  std::vector<std::string> topk_set;  // normalized union over the top_k hypotheses
  std::vector<Hypothesis> beams;
};

// Deduplicated union of normalized hashtags from the first top_k beams, in
// first-seen order.
std::vector<std::string> TopKHashtagSet(const std::vector<std::vector<std::string>>& decoded,
                                        std::size_t top_k);

template <typename T>
GeneratedHashtags GenerateHashtags(const SegTrmModel<T>& model, const SegmentedInput& input,
                                   const Vocabulary& vocab, TokenMode mode,
                                   const BeamOptions& opts, std::size_t top_k);

}  // namespace segtrm
