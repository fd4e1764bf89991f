#pragma once

// Segments selection: score every [SEG] state against the [S] state, keep
// the top k, and gather the rows the decoder will cross-attend to.

#include <cstddef>
#include <span>
#include <vector>

#include "segtrm/autograd.h"
#include "segtrm/encoder.h"
#include "segtrm/model_config.h"

namespace segtrm {

inline constexpr double kMahalanobisEpsilon = 1e-5;

// Higher means more similar. Distances are negated; cosine of a zero vector
// is 0. Mahalanobis uses the diagonal variance of `population` (+epsilon) and
// degrades to Euclidean when the population has fewer than two vectors.
double Similarity(std::span<const double> global, std::span<const double> segment,
                  SimilarityMetric metric,
                  std::span<const std::vector<double>> population = {});

// Top-k by score, ties to the lower index, returned in source order.
std::vector<std::size_t> TopKSegments(std::span<const double> scores, std::size_t k);

// [S] row, then for each chosen segment its [SEG] row and content rows.
std::vector<std::size_t> SoftRows(std::size_t s_index, std::span<const std::size_t> seg_indices,
                                  std::span<const SegmentSpan> spans,
                                  std::span<const std::size_t> chosen);
// [S] row, then the chosen [SEG] rows.
std::vector<std::size_t> HardRows(std::size_t s_index, std::span<const std::size_t> seg_indices,
                                  std::span<const std::size_t> chosen);

template <typename T>
struct SelectionResult {
  SsmMode mode = SsmMode::kSoft;
  std::vector<std::size_t> chosen;
  std::vector<double> scores;  // per segment, as ranked
  std::vector<std::size_t> rows;
  Var<T> h_xs;
};

template <typename T>
std::vector<double> ScoreSegments(const EncoderStates<T>& states, SimilarityMetric metric);

// Scoring reads values only; the gather is the sole path gradients take, so
// unselected rows get exactly zero gradient.
template <typename T>
SelectionResult<T> SelectAndRecombine(const EncoderStates<T>& states, const SsmConfig& cfg);

}  // namespace segtrm
