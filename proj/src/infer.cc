#include "segtrm/infer.h"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

namespace segtrm {

LengthNorm ParseLengthNorm(std::string_view name) {
  if (name == "mean") return LengthNorm::kMean;
  if (name == "off") return LengthNorm::kOff;
  throw std::invalid_argument("unknown length normalization: " + std::string(name));
}

std::string_view LengthNormName(LengthNorm norm) {
  return norm == LengthNorm::kMean ? "mean" : "off";
}

bool Generatable(int id) {
  return id == kEndId || id == kHashSepId || id >= kNumReserved;
}

double HypothesisScore(const std::vector<int>& ids, double log_prob, LengthNorm norm) {
  if (norm == LengthNorm::kOff || ids.empty()) return log_prob;
  return log_prob / static_cast<double>(ids.size());
}

bool RanksBefore(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.ids < b.ids;
}

std::vector<Hypothesis> BeamSearch(const NextLogProbFn& next, const BeamOptions& opts) {
  if (opts.beam_size == 0) throw std::invalid_argument("beam size must be at least 1");
  if (opts.max_len == 0) throw std::invalid_argument("max_len must be at least 1");

  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> done;
  while (!live.empty() && done.size() < opts.beam_size) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& h : live) {
      const std::vector<double> log_probs = next(h.ids);
      for (std::size_t id = 0; id < log_probs.size(); ++id) {
        if (!Generatable(static_cast<int>(id))) continue;
        Hypothesis c;
        c.ids = h.ids;
        c.ids.push_back(static_cast<int>(id));
        c.log_prob = h.log_prob + log_probs[id];
        candidates.push_back(std::move(c));
      }
    }
    const std::size_t keep = std::min(candidates.size(), opts.beam_size - done.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(),
                      [](const Hypothesis& a, const Hypothesis& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        return a.ids < b.ids;
                      });
    candidates.resize(keep);
    live.clear();
    for (Hypothesis& c : candidates) {
      c.finished = c.ids.back() == kEndId;
      if (c.finished || c.ids.size() >= opts.max_len) {
        c.score = HypothesisScore(c.ids, c.log_prob, opts.length_norm);
        done.push_back(std::move(c));
      } else {
        live.push_back(std::move(c));
      }
    }
  }
  std::sort(done.begin(), done.end(), RanksBefore);
  return done;
}

template <typename T>
std::vector<Hypothesis> BeamSearch(const SegTrmModel<T>& model, const EncodedPost<T>& post,
                                   const BeamOptions& opts) {
  BeamOptions bounded = opts;
  bounded.max_len = std::min(opts.max_len, model.config().decoder.max_target_len);
  return BeamSearch(
      [&](std::span<const int> prefix) { return model.NextLogProbs(post, prefix); }, bounded);
}

std::string NormalizeHashtag(std::string_view tag) {
  std::string out;
  bool pending_space = false;
  for (char ch : tag) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

std::vector<std::string> TopKHashtagSet(const std::vector<std::vector<std::string>>& decoded,
                                        std::size_t top_k) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < std::min(top_k, decoded.size()); ++i) {
    for (const std::string& tag : decoded[i]) {
      std::string norm = NormalizeHashtag(tag);
      if (!norm.empty() && seen.insert(norm).second) out.push_back(std::move(norm));
    }
  }
  return out;
}

template <typename T>
GeneratedHashtags GenerateHashtags(const SegTrmModel<T>& model, const SegmentedInput& input,
                                   const Vocabulary& vocab, TokenMode mode,
                                   const BeamOptions& opts, std::size_t top_k) {
  if (top_k > opts.beam_size) {
    throw std::invalid_argument("top_k " + std::to_string(top_k) + " exceeds beam size " +
                                std::to_string(opts.beam_size));
  }
  GeneratedHashtags out;
  out.beams = BeamSearch(model, model.EncodeForInference(input), opts);
  std::vector<std::vector<std::string>> decoded;
  for (const Hypothesis& h : out.beams) decoded.push_back(DecodeOutput(h.ids, vocab, mode));
  if (!decoded.empty()) out.best = decoded.front();
  out.topk_set = TopKHashtagSet(decoded, top_k);
  return out;
}

template std::vector<Hypothesis> BeamSearch(const SegTrmModel<float>&, const EncodedPost<float>&,
                                            const BeamOptions&);
template std::vector<Hypothesis> BeamSearch(const SegTrmModel<double>&,
                                            const EncodedPost<double>&, const BeamOptions&);
template GeneratedHashtags GenerateHashtags(const SegTrmModel<float>&, const SegmentedInput&,
                                            const Vocabulary&, TokenMode, const BeamOptions&,
                                            std::size_t);
template GeneratedHashtags GenerateHashtags(const SegTrmModel<double>&, const SegmentedInput&,
                                            const Vocabulary&, TokenMode, const BeamOptions&,
                                            std::size_t);

}  // namespace segtrm
