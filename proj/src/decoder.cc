#include "segtrm/decoder.h"

#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "segtrm/encoder.h"

namespace segtrm {

template <typename T>
void AddDecoderParams(ParamStore<T>& params, const DecoderConfig& cfg, std::size_t vocab_size,
                      std::mt19937_64& rng) {
  params.AddNormal("dec.pos_emb", {cfg.max_target_len, cfg.hidden}, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string prefix = "dec.layer" + std::to_string(l);
    AddAttentionParams(params, prefix + ".self", cfg.hidden, rng);
    AddLayerNormParams(params, prefix + ".ln1", cfg.hidden);
    AddAttentionParams(params, prefix + ".cross", cfg.hidden, rng);
    AddLayerNormParams(params, prefix + ".ln2", cfg.hidden);
    AddFeedForwardParams(params, prefix + ".ffn", cfg.hidden, cfg.ffn_dims, rng);
    AddLayerNormParams(params, prefix + ".ln3", cfg.hidden);
  }
  params.AddConstant("out.bias", {vocab_size}, T(0));
}

template <typename T>
Var<T> DecoderForward(Graph<T>& g, ParamStore<T>& params, const DecoderConfig& cfg,
                      std::span<const int> prefix, Var<T> h_s, Var<T> h_xs,
                      AttentionTrace<T>* trace) {
  const std::size_t rows = prefix.size() + 1;
  if (rows > cfg.max_target_len) {
    throw std::out_of_range("decoder prefix of " + std::to_string(prefix.size()) +
                            " tokens exceeds max_target_len " + std::to_string(cfg.max_target_len));
  }
  if (h_s.rows() != 1) throw std::invalid_argument("decoder expects a single [S] row");

  Var<T> table = g.Parameter(params.at(kTokenEmbedding));
  Var<T> x = h_s;
  if (!prefix.empty()) {
    const Var<T> parts[] = {h_s, EmbeddingLookup(table, prefix)};
    x = ConcatRows<T>(parts);
  }
  std::vector<int> positions(rows);
  std::iota(positions.begin(), positions.end(), 0);
  x = Add(x, EmbeddingLookup(g.Parameter(params.at("dec.pos_emb")), positions));
  x = Dropout(x, cfg.dropout);

  Var<T> causal = g.Constant(CausalMask<T>(rows));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string prefix_name = "dec.layer" + std::to_string(l);
    Var<T> self = MultiHeadAttention(g, params, prefix_name + ".self", x, x, cfg.heads, &causal,
                                     cfg.dropout, trace ? &trace->decoder_self : nullptr);
    x = ApplyLayerNorm(g, params, prefix_name + ".ln1", Add(x, Dropout(self, cfg.dropout)));
    Var<T> cross = MultiHeadAttention<T>(g, params, prefix_name + ".cross", x, h_xs, cfg.heads,
                                      nullptr, cfg.dropout,
                                      trace ? &trace->decoder_cross : nullptr);
    x = ApplyLayerNorm(g, params, prefix_name + ".ln2", Add(x, Dropout(cross, cfg.dropout)));
    Var<T> ffn = FeedForward(g, params, prefix_name + ".ffn", x, cfg.dropout);
    x = ApplyLayerNorm(g, params, prefix_name + ".ln3", Add(x, Dropout(ffn, cfg.dropout)));
  }
  return AddBias(MatMul(x, table, true), g.Parameter(params.at("out.bias")));
}

template void AddDecoderParams(ParamStore<float>&, const DecoderConfig&, std::size_t,
                               std::mt19937_64&);
template void AddDecoderParams(ParamStore<double>&, const DecoderConfig&, std::size_t,
                               std::mt19937_64&);
template Var<float> DecoderForward(Graph<float>&, ParamStore<float>&, const DecoderConfig&,
                                   std::span<const int>, Var<float>, Var<float>,
                                   AttentionTrace<float>*);
template Var<double> DecoderForward(Graph<double>&, ParamStore<double>&, const DecoderConfig&,
                                    std::span<const int>, Var<double>, Var<double>,
                                    AttentionTrace<double>*);

}  // namespace segtrm
