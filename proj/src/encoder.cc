#include "segtrm/encoder.h"

#include <stdexcept>

namespace segtrm {

template <typename T>
void AddEncoderParams(ParamStore<T>& params, const EncoderConfig& cfg, std::mt19937_64& rng) {
  params.AddNormal("enc.pos_emb", {cfg.max_positions, cfg.hidden}, rng);
  params.AddNormal("enc.seg_emb", {cfg.interval_slots + 1, cfg.hidden}, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string prefix = "enc.layer" + std::to_string(l);
    AddAttentionParams(params, prefix + ".attn", cfg.hidden, rng);
    AddLayerNormParams(params, prefix + ".ln1", cfg.hidden);
    AddFeedForwardParams(params, prefix + ".ffn", cfg.hidden, cfg.ffn_dims, rng);
    AddLayerNormParams(params, prefix + ".ln2", cfg.hidden);
  }
}

template <typename T>
Var<T> Embed(Graph<T>& g, ParamStore<T>& params, const SegmentedInput& input,
             const EncoderConfig& cfg) {
  if (input.size() > cfg.max_positions) {
    throw std::out_of_range("input of length " + std::to_string(input.size()) +
                            " exceeds max_positions " + std::to_string(cfg.max_positions));
  }
  for (int s : input.segment_ids) {
    if (s < 0 || static_cast<std::size_t>(s) > cfg.interval_slots) {
      throw std::out_of_range("segment id " + std::to_string(s) + " outside " +
                              std::to_string(cfg.interval_slots) + " interval slots");
    }
  }
  Var<T> tokens = EmbeddingLookup(g.Parameter(params.at(kTokenEmbedding)), input.ids);
  Var<T> positions = EmbeddingLookup(g.Parameter(params.at("enc.pos_emb")), input.positions);
  Var<T> segments = EmbeddingLookup(g.Parameter(params.at("enc.seg_emb")), input.segment_ids);
  return Add(Add(tokens, positions), segments);
}

template <typename T>
Var<T> SgtLayer(Graph<T>& g, ParamStore<T>& params, const std::string& prefix, Var<T> h,
                Var<T> mask, const EncoderConfig& cfg, std::vector<Tensor<T>>* trace) {
  Var<T> attended = MultiHeadAttention(g, params, prefix + ".attn", h, h, cfg.heads, &mask,
                                       cfg.dropout, trace);
  h = ApplyLayerNorm(g, params, prefix + ".ln1", Add(h, Dropout(attended, cfg.dropout)));
  Var<T> ffn = FeedForward(g, params, prefix + ".ffn", h, cfg.dropout);
  return ApplyLayerNorm(g, params, prefix + ".ln2", Add(h, Dropout(ffn, cfg.dropout)));
}

template <typename T>
EncoderStates<T> Encode(Graph<T>& g, ParamStore<T>& params, const SegmentedInput& input,
                        const EncoderConfig& cfg, AttentionTrace<T>* trace) {
  Var<T> h = Dropout(Embed(g, params, input, cfg), cfg.dropout);
  if (cfg.layers > 0) {
    Var<T> mask = g.Constant(AdditiveMask<T>(input.mask));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      h = SgtLayer(g, params, "enc.layer" + std::to_string(l), h, mask, cfg,
                   trace ? &trace->encoder_self : nullptr);
    }
  }
  EncoderStates<T> states;
  states.h = h;
  states.s_index = 0;
  states.seg_indices = input.seg_marker_positions;
  states.segment_spans = input.segment_spans;
  states.length = input.length;
  return states;
}

#define SEGTRM_INSTANTIATE_ENCODER(T)                                                        \
  template void AddEncoderParams(ParamStore<T>&, const EncoderConfig&, std::mt19937_64&);   \
  template Var<T> Embed(Graph<T>&, ParamStore<T>&, const SegmentedInput&,                   \
                        const EncoderConfig&);                                              \
  template Var<T> SgtLayer(Graph<T>&, ParamStore<T>&, const std::string&, Var<T>, Var<T>,   \
                           const EncoderConfig&, std::vector<Tensor<T>>*);                  \
  template EncoderStates<T> Encode(Graph<T>&, ParamStore<T>&, const SegmentedInput&,        \
                                   const EncoderConfig&, AttentionTrace<T>*);

SEGTRM_INSTANTIATE_ENCODER(float)
SEGTRM_INSTANTIATE_ENCODER(double)

#undef SEGTRM_INSTANTIATE_ENCODER

}  // namespace segtrm
