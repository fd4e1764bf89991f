#pragma once

// Building blocks shared by the encoder and the decoder.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "segtrm/autograd.h"
#include "segtrm/params.h"
#include "segtrm/tokenize.h"

namespace segtrm {

inline constexpr double kMaskedLogit = -1e9;

// Post-softmax attention weights, one entry per (layer, head) in call order.
template <typename T>
struct AttentionTrace {
  std::vector<Tensor<T>> encoder_self;
  std::vector<Tensor<T>> decoder_self;
  std::vector<Tensor<T>> decoder_cross;
};

// 0 where the mask allows attention, kMaskedLogit elsewhere.
template <typename T>
Tensor<T> AdditiveMask(const SegmentMask& mask);
// Lower-triangular additive mask for n decoder positions.
template <typename T>
Tensor<T> CausalMask(std::size_t n);

// Registers prefix.{wq,bq,wk,bk,wv,bv,wo,bo}.
template <typename T>
void AddAttentionParams(ParamStore<T>& params, const std::string& prefix, std::size_t hidden,
                        std::mt19937_64& rng);
// Registers prefix.{w1,b1,w2,b2}.
template <typename T>
void AddFeedForwardParams(ParamStore<T>& params, const std::string& prefix, std::size_t hidden,
                          std::size_t ffn_dims, std::mt19937_64& rng);
// Registers prefix.{gamma,beta}.
template <typename T>
void AddLayerNormParams(ParamStore<T>& params, const std::string& prefix, std::size_t hidden);

// Scaled dot-product attention over `heads` heads. `mask` is an additive
// [queries, keys] constant or nullptr for none. Weights go to `trace` when set.
template <typename T>
Var<T> MultiHeadAttention(Graph<T>& g, ParamStore<T>& params, const std::string& prefix,
                          Var<T> queries, Var<T> keys_values, std::size_t heads,
                          const Var<T>* mask, double dropout, std::vector<Tensor<T>>* trace);

template <typename T>
Var<T> FeedForward(Graph<T>& g, ParamStore<T>& params, const std::string& prefix, Var<T> x,
                   double dropout);

template <typename T>
Var<T> ApplyLayerNorm(Graph<T>& g, ParamStore<T>& params, const std::string& prefix, Var<T> x);

}  // namespace segtrm
