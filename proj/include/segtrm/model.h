#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "segtrm/autograd.h"
#include "segtrm/decoder.h"
#include "segtrm/encoder.h"
#include "segtrm/model_config.h"
#include "segtrm/params.h"
#include "segtrm/ssm.h"
#include "segtrm/tokenize.h"

namespace segtrm {

// Encoder output reduced to what decoding needs, detached from any graph.
template <typename T>
struct EncodedPost {
  Tensor<T> h_s;   // [1, hidden]
  Tensor<T> h_xs;  // [rows, hidden]
  std::vector<std::size_t> chosen;
  std::vector<double> scores;
};

template <typename T>
class SegTrmModel {
 public:
  SegTrmModel(const ModelConfig& cfg, std::uint64_t seed);
  // Adopts existing parameters, e.g. from a checkpoint; names and shapes must
  // match what `cfg` would create.
  SegTrmModel(const ModelConfig& cfg, ParamStore<T> params);

  const ModelConfig& config() const { return cfg_; }
  ModelConfig& mutable_config() { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  struct Pass {
    EncoderStates<T> states;
    SelectionResult<T> selection;
    Var<T> logits;
  };

  // encode -> select -> decode with the given decoder prefix.
  Pass Run(Graph<T>& g, const SegmentedInput& input, std::span<const int> prefix,
           AttentionTrace<T>* trace = nullptr);

  // Teacher-forced mean cross entropy over non-PAD positions of `target`.
  Var<T> Loss(Graph<T>& g, const SegmentedInput& input, std::span<const int> target);

  EncodedPost<T> EncodeForInference(const SegmentedInput& input) const;
  // Log-probabilities of the token following `prefix`.
  std::vector<double> NextLogProbs(const EncodedPost<T>& post, std::span<const int> prefix) const;

 private:
  // Inference graphs run in GradMode::kNone and only read parameters.
  ParamStore<T>& shared_params() const { return const_cast<ParamStore<T>&>(params_); }

  ModelConfig cfg_;
  ParamStore<T> params_;
};

template <typename T>
ParamStore<T> InitModelParams(const ModelConfig& cfg, std::uint64_t seed);

extern template class SegTrmModel<float>;
extern template class SegTrmModel<double>;

}  // namespace segtrm
