#pragma once

#include <cstddef>
#include <random>
#include <span>

#include "segtrm/autograd.h"
#include "segtrm/layers.h"
#include "segtrm/model_config.h"
#include "segtrm/params.h"

namespace segtrm {

template <typename T>
void AddDecoderParams(ParamStore<T>& params, const DecoderConfig& cfg, std::size_t vocab_size,
                      std::mt19937_64& rng);

// Row 0 of the decoder input is the encoder's [S] state, rows 1.. embed
// `prefix`; every row gets a decoder position embedding. Returns
// [|prefix| + 1, vocab] logits where row t predicts target token t. The output
// projection reuses the token embedding table.
template <typename T>
Var<T> DecoderForward(Graph<T>& g, ParamStore<T>& params, const DecoderConfig& cfg,
                      std::span<const int> prefix, Var<T> h_s, Var<T> h_xs,
                      AttentionTrace<T>* trace = nullptr);

}  // namespace segtrm
