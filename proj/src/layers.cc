#include "segtrm/layers.h"

#include <cmath>
#include <stdexcept>

namespace segtrm {

template <typename T>
Tensor<T> AdditiveMask(const SegmentMask& mask) {
  Tensor<T> out = Tensor<T>::Matrix(mask.n, mask.n);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    out[i] = mask.bits[i] ? T(0) : static_cast<T>(kMaskedLogit);
  }
  return out;
}

template <typename T>
Tensor<T> CausalMask(std::size_t n) {
  Tensor<T> out = Tensor<T>::Matrix(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = r + 1; c < n; ++c) out.at(r, c) = static_cast<T>(kMaskedLogit);
  }
  return out;
}

template <typename T>
void AddAttentionParams(ParamStore<T>& params, const std::string& prefix, std::size_t hidden,
                        std::mt19937_64& rng) {
  for (const char* proj : {"q", "k", "v", "o"}) {
    params.AddNormal(prefix + ".w" + proj, {hidden, hidden}, rng);
    params.AddConstant(prefix + ".b" + proj, {hidden}, T(0));
  }
}

template <typename T>
void AddFeedForwardParams(ParamStore<T>& params, const std::string& prefix, std::size_t hidden,
                          std::size_t ffn_dims, std::mt19937_64& rng) {
  params.AddNormal(prefix + ".w1", {hidden, ffn_dims}, rng);
  params.AddConstant(prefix + ".b1", {ffn_dims}, T(0));
  params.AddNormal(prefix + ".w2", {ffn_dims, hidden}, rng);
  params.AddConstant(prefix + ".b2", {hidden}, T(0));
}

template <typename T>
void AddLayerNormParams(ParamStore<T>& params, const std::string& prefix, std::size_t hidden) {
  params.AddConstant(prefix + ".gamma", {hidden}, T(1));
  params.AddConstant(prefix + ".beta", {hidden}, T(0));
}

namespace {

template <typename T>
Var<T> Project(Graph<T>& g, ParamStore<T>& params, const std::string& prefix, char which,
               Var<T> x) {
  return AddBias(MatMul(x, g.Parameter(params.at(prefix + ".w" + which))),
                 g.Parameter(params.at(prefix + ".b" + which)));
}

}  // namespace

template <typename T>
Var<T> MultiHeadAttention(Graph<T>& g, ParamStore<T>& params, const std::string& prefix,
                          Var<T> queries, Var<T> keys_values, std::size_t heads,
                          const Var<T>* mask, double dropout, std::vector<Tensor<T>>* trace) {
  const std::size_t hidden = queries.cols();
  if (heads == 0 || hidden % heads != 0) {
    throw std::invalid_argument("attention: hidden " + std::to_string(hidden) +
                                " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t head_dim = hidden / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
  Var<T> q = Project(g, params, prefix, 'q', queries);
  Var<T> k = Project(g, params, prefix, 'k', keys_values);
  Var<T> v = Project(g, params, prefix, 'v', keys_values);

  std::vector<Var<T>> contexts;
  contexts.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t begin = h * head_dim;
    Var<T> scores =
        Scale(MatMul(SliceCols(q, begin, head_dim), SliceCols(k, begin, head_dim), true), scale);
    if (mask) scores = Add(scores, *mask);
    Var<T> weights = Softmax(scores, 1);
    if (trace) trace->push_back(weights.value());
    weights = Dropout(weights, dropout);
    contexts.push_back(MatMul(weights, SliceCols(v, begin, head_dim)));
  }
  Var<T> merged = heads == 1 ? contexts[0] : ConcatCols<T>(contexts);
  return Project(g, params, prefix, 'o', merged);
}

template <typename T>
Var<T> FeedForward(Graph<T>& g, ParamStore<T>& params, const std::string& prefix, Var<T> x,
                   double dropout) {
  Var<T> inner = AddBias(MatMul(x, g.Parameter(params.at(prefix + ".w1"))),
                         g.Parameter(params.at(prefix + ".b1")));
  inner = Dropout(Gelu(inner), dropout);
  return AddBias(MatMul(inner, g.Parameter(params.at(prefix + ".w2"))),
                 g.Parameter(params.at(prefix + ".b2")));
}

template <typename T>
Var<T> ApplyLayerNorm(Graph<T>& g, ParamStore<T>& params, const std::string& prefix, Var<T> x) {
  return LayerNorm(x, g.Parameter(params.at(prefix + ".gamma")),
                   g.Parameter(params.at(prefix + ".beta")));
}

#define SEGTRM_INSTANTIATE_LAYERS(T)                                                          \
  template Tensor<T> AdditiveMask<T>(const SegmentMask&);                                    \
  template Tensor<T> CausalMask<T>(std::size_t);                                             \
  template void AddAttentionParams(ParamStore<T>&, const std::string&, std::size_t,          \
                                   std::mt19937_64&);                                        \
  template void AddFeedForwardParams(ParamStore<T>&, const std::string&, std::size_t,        \
                                     std::size_t, std::mt19937_64&);                         \
  template void AddLayerNormParams(ParamStore<T>&, const std::string&, std::size_t);         \
  template Var<T> MultiHeadAttention(Graph<T>&, ParamStore<T>&, const std::string&, Var<T>,  \
                                     Var<T>, std::size_t, const Var<T>*, double,             \
                                     std::vector<Tensor<T>>*);                               \
  template Var<T> FeedForward(Graph<T>&, ParamStore<T>&, const std::string&, Var<T>, double); \
  template Var<T> ApplyLayerNorm(Graph<T>&, ParamStore<T>&, const std::string&, Var<T>);

SEGTRM_INSTANTIATE_LAYERS(float)
SEGTRM_INSTANTIATE_LAYERS(double)

#undef SEGTRM_INSTANTIATE_LAYERS

}  // namespace segtrm
