#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace segtrm {

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t hidden = 128;
  std::size_t heads = 4;
  std::size_t ffn_dims = 512;
  double dropout = 0.1;
  std::size_t max_positions = 512;
  std::size_t interval_slots = 16;  // K
  std::size_t segment_len = 5;      // L

  void Validate() const;
};

struct DecoderConfig {
  std::size_t layers = 2;
  std::size_t hidden = 128;
  std::size_t heads = 4;
  std::size_t ffn_dims = 512;
  double dropout = 0.1;
  std::size_t max_target_len = 64;

  void Validate() const;
};

enum class SsmMode { kOff, kSoft, kHard };
enum class SimilarityMetric { kEuclidean, kCosine, kMahalanobis, kManhattan };

SsmMode ParseSsmMode(std::string_view name);
std::string_view SsmModeName(SsmMode mode);
SimilarityMetric ParseMetric(std::string_view name);
std::string_view MetricName(SimilarityMetric metric);

struct SsmConfig {
  SsmMode mode = SsmMode::kSoft;
  SimilarityMetric metric = SimilarityMetric::kCosine;
  std::size_t k = 5;
  // Ranks segments by negated score; only useful as a crippled baseline.
  bool invert_scores = false;
};

struct ModelConfig {
  std::size_t vocab_size = 0;
  EncoderConfig encoder;
  DecoderConfig decoder;
  SsmConfig ssm;

  void Validate() const;
};

}  // namespace segtrm
