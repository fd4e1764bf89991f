#include "segtrm/ssm.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace segtrm {

double Similarity(std::span<const double> global, std::span<const double> segment,
                  SimilarityMetric metric, std::span<const std::vector<double>> population) {
  if (global.size() != segment.size()) {
    throw std::invalid_argument("Similarity: dimension mismatch " + std::to_string(global.size()) +
                                " vs " + std::to_string(segment.size()));
  }
  const std::size_t dim = global.size();
  if (metric == SimilarityMetric::kMahalanobis && population.size() < 2) {
    metric = SimilarityMetric::kEuclidean;
  }
  switch (metric) {
    case SimilarityMetric::kCosine: {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t i = 0; i < dim; ++i) {
        dot += global[i] * segment[i];
        na += global[i] * global[i];
        nb += segment[i] * segment[i];
      }
      if (na == 0.0 || nb == 0.0) return 0.0;
      return dot / (std::sqrt(na) * std::sqrt(nb));
    }
    case SimilarityMetric::kEuclidean: {
      double sq = 0;
      for (std::size_t i = 0; i < dim; ++i) sq += (global[i] - segment[i]) * (global[i] - segment[i]);
      return -std::sqrt(sq);
    }
    case SimilarityMetric::kManhattan: {
      double total = 0;
      for (std::size_t i = 0; i < dim; ++i) total += std::abs(global[i] - segment[i]);
      return -total;
    }
    case SimilarityMetric::kMahalanobis: {
      const double count = static_cast<double>(population.size());
      double sq = 0;
      for (std::size_t i = 0; i < dim; ++i) {
        double mean = 0;
        for (const auto& v : population) mean += v.at(i);
        mean /= count;
        double var = 0;
        for (const auto& v : population) var += (v[i] - mean) * (v[i] - mean);
        var /= count;
        const double diff = global[i] - segment[i];
        sq += diff * diff / (var + kMahalanobisEpsilon);
      }
      return -std::sqrt(sq);
    }
  }
  return 0.0;
}

std::vector<std::size_t> TopKSegments(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(std::min(k, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> SoftRows(std::size_t s_index, std::span<const std::size_t> seg_indices,
                                  std::span<const SegmentSpan> spans,
                                  std::span<const std::size_t> chosen) {
  std::vector<std::size_t> rows{s_index};
  for (std::size_t i : chosen) {
    rows.push_back(seg_indices[i]);
    for (std::size_t r = spans[i].begin; r < spans[i].end; ++r) rows.push_back(r);
  }
  return rows;
}

std::vector<std::size_t> HardRows(std::size_t s_index, std::span<const std::size_t> seg_indices,
                                  std::span<const std::size_t> chosen) {
  std::vector<std::size_t> rows{s_index};
  for (std::size_t i : chosen) rows.push_back(seg_indices[i]);
  return rows;
}

namespace {

template <typename T>
std::vector<double> RowAsDouble(const Tensor<T>& h, std::size_t r) {
  auto row = h.row(r);
  return {row.begin(), row.end()};
}

}  // namespace

template <typename T>
std::vector<double> ScoreSegments(const EncoderStates<T>& states, SimilarityMetric metric) {
  const Tensor<T>& h = states.h.value();
  const std::vector<double> global = RowAsDouble(h, states.s_index);
  std::vector<std::vector<double>> segs;
  segs.reserve(states.seg_indices.size());
  for (std::size_t idx : states.seg_indices) segs.push_back(RowAsDouble(h, idx));
  std::vector<double> scores;
  scores.reserve(segs.size());
  for (const auto& seg : segs) scores.push_back(Similarity(global, seg, metric, segs));
  return scores;
}

template <typename T>
SelectionResult<T> SelectAndRecombine(const EncoderStates<T>& states, const SsmConfig& cfg) {
  SelectionResult<T> result;
  result.mode = cfg.mode;
  if (cfg.mode == SsmMode::kOff) {
    result.chosen.resize(states.seg_indices.size());
    std::iota(result.chosen.begin(), result.chosen.end(), 0);
    result.rows.resize(states.length);
    std::iota(result.rows.begin(), result.rows.end(), 0);
  } else {
    if (cfg.k == 0) throw std::invalid_argument("ssm.k must be >= 1");
    result.scores = ScoreSegments(states, cfg.metric);
    if (cfg.invert_scores) {
      for (double& s : result.scores) s = -s;
    }
    result.chosen = TopKSegments(result.scores, cfg.k);
    result.rows = cfg.mode == SsmMode::kSoft
                      ? SoftRows(states.s_index, states.seg_indices, states.segment_spans,
                                 result.chosen)
                      : HardRows(states.s_index, states.seg_indices, result.chosen);
  }
  result.h_xs = GatherRows(states.h, std::span<const std::size_t>(result.rows));
  return result;
}

template std::vector<double> ScoreSegments(const EncoderStates<float>&, SimilarityMetric);
template std::vector<double> ScoreSegments(const EncoderStates<double>&, SimilarityMetric);
template SelectionResult<float> SelectAndRecombine(const EncoderStates<float>&, const SsmConfig&);
template SelectionResult<double> SelectAndRecombine(const EncoderStates<double>&, const SsmConfig&);

}  // namespace segtrm
