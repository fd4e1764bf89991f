#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "segtrm/autograd.h"
#include "segtrm/layers.h"
#include "segtrm/model_config.h"
#include "segtrm/params.h"
#include "segtrm/tokenize.h"

namespace segtrm {

inline constexpr const char* kTokenEmbedding = "tok_emb";

template <typename T>
struct EncoderStates {
  Var<T> h;  // [n, hidden], padding rows included
  std::size_t s_index = 0;
  std::vector<std::size_t> seg_indices;
  std::vector<SegmentSpan> segment_spans;
  std::size_t length = 0;  // non-padding rows
};

// enc.pos_emb, enc.seg_emb and per-layer attention / ffn / layer norms. The
// token table is shared with the decoder and registered by the model.
template <typename T>
void AddEncoderParams(ParamStore<T>& params, const EncoderConfig& cfg, std::mt19937_64& rng);

// tok_emb[id] + pos_emb[position] + seg_emb[interval id] per row.
template <typename T>
Var<T> Embed(Graph<T>& g, ParamStore<T>& params, const SegmentedInput& input,
             const EncoderConfig& cfg);

// Post-norm transformer layer whose self-attention adds `mask` to the logits.
template <typename T>
Var<T> SgtLayer(Graph<T>& g, ParamStore<T>& params, const std::string& prefix, Var<T> h,
                Var<T> mask, const EncoderConfig& cfg, std::vector<Tensor<T>>* trace = nullptr);

// Embedding followed by cfg.layers SgT layers sharing the same segment mask.
template <typename T>
EncoderStates<T> Encode(Graph<T>& g, ParamStore<T>& params, const SegmentedInput& input,
                        const EncoderConfig& cfg, AttentionTrace<T>* trace = nullptr);

}  // namespace segtrm
