#include "segtrm/model_config.h"

#include <stdexcept>
#include <string>

#include "segtrm/tokenize.h"

namespace segtrm {
namespace {

void Require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void EncoderConfig::Validate() const {
  Require(hidden > 0 && heads > 0 && hidden % heads == 0,
          "encoder hidden size must be divisible by the head count");
  Require(ffn_dims > 0, "encoder ffn_dims must be positive");
  Require(dropout >= 0.0 && dropout < 1.0, "encoder dropout must lie in [0, 1)");
  Require(max_positions >= 3, "encoder max_positions must be >= 3");
  Require(interval_slots >= 1, "interval segment embedding count must be >= 1");
  Require(segment_len >= 1, "segment length must be >= 1");
}

void DecoderConfig::Validate() const {
  Require(hidden > 0 && heads > 0 && hidden % heads == 0,
          "decoder hidden size must be divisible by the head count");
  Require(ffn_dims > 0, "decoder ffn_dims must be positive");
  Require(dropout >= 0.0 && dropout < 1.0, "decoder dropout must lie in [0, 1)");
  Require(max_target_len >= 1, "decoder max_target_len must be >= 1");
}

void ModelConfig::Validate() const {
  encoder.Validate();
  decoder.Validate();
  Require(encoder.hidden == decoder.hidden, "encoder and decoder hidden sizes must match");
  Require(vocab_size > kNumReserved, "vocabulary holds only reserved tokens");
  Require(ssm.k >= 1, "ssm.k must be >= 1");
}

SsmMode ParseSsmMode(std::string_view name) {
  if (name == "off") return SsmMode::kOff;
  if (name == "soft") return SsmMode::kSoft;
  if (name == "hard") return SsmMode::kHard;
  throw std::invalid_argument("unknown ssm mode: " + std::string(name));
}

std::string_view SsmModeName(SsmMode mode) {
  switch (mode) {
    case SsmMode::kOff: return "off";
    case SsmMode::kSoft: return "soft";
    case SsmMode::kHard: return "hard";
  }
  return "?";
}

SimilarityMetric ParseMetric(std::string_view name) {
  if (name == "es") return SimilarityMetric::kEuclidean;
  if (name == "cs") return SimilarityMetric::kCosine;
  if (name == "mass") return SimilarityMetric::kMahalanobis;
  if (name == "mhts") return SimilarityMetric::kManhattan;
  throw std::invalid_argument("unknown similarity metric: " + std::string(name));
}

std::string_view MetricName(SimilarityMetric metric) {
  switch (metric) {
    case SimilarityMetric::kEuclidean: return "es";
    case SimilarityMetric::kCosine: return "cs";
    case SimilarityMetric::kMahalanobis: return "mass";
    case SimilarityMetric::kManhattan: return "mhts";
  }
  return "?";
}

}  // namespace segtrm
