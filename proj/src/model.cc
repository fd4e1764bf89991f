#include "segtrm/model.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace segtrm {

template <typename T>
ParamStore<T> InitModelParams(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.Validate();
  std::mt19937_64 rng(seed);
  ParamStore<T> params;
  params.AddNormal(kTokenEmbedding, {cfg.vocab_size, cfg.encoder.hidden}, rng);
  AddEncoderParams(params, cfg.encoder, rng);
  AddDecoderParams(params, cfg.decoder, cfg.vocab_size, rng);
  return params;
}

template <typename T>
SegTrmModel<T>::SegTrmModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), params_(InitModelParams<T>(cfg, seed)) {}

template <typename T>
SegTrmModel<T>::SegTrmModel(const ModelConfig& cfg, ParamStore<T> params)
    : cfg_(cfg), params_(std::move(params)) {
  const ParamStore<T> expected = InitModelParams<T>(cfg, 0);
  if (expected.size() != params_.size()) {
    throw std::invalid_argument("parameter count " + std::to_string(params_.size()) +
                                " does not match configuration (" +
                                std::to_string(expected.size()) + ")");
  }
  for (const auto& [name, p] : expected) {
    if (!params_.contains(name)) throw std::invalid_argument("missing parameter: " + name);
    if (params_.at(name).value.shape() != p.value.shape()) {
      throw std::invalid_argument("parameter " + name + " has shape " +
                                  ShapeToString(params_.at(name).value.shape()) + ", expected " +
                                  ShapeToString(p.value.shape()));
    }
  }
}

template <typename T>
typename SegTrmModel<T>::Pass SegTrmModel<T>::Run(Graph<T>& g, const SegmentedInput& input,
                                                  std::span<const int> prefix,
                                                  AttentionTrace<T>* trace) {
  Pass pass{Encode(g, params_, input, cfg_.encoder, trace), {}, {}};
  pass.selection = SelectAndRecombine(pass.states, cfg_.ssm);
  const std::size_t s_row[] = {pass.states.s_index};
  Var<T> h_s = GatherRows(pass.states.h, std::span<const std::size_t>(s_row));
  pass.logits = DecoderForward(g, params_, cfg_.decoder, prefix, h_s, pass.selection.h_xs, trace);
  return pass;
}

template <typename T>
Var<T> SegTrmModel<T>::Loss(Graph<T>& g, const SegmentedInput& input,
                            std::span<const int> target) {
  if (target.empty()) throw std::invalid_argument("Loss: empty target");
  Pass pass = Run(g, input, target.first(target.size() - 1));
  return CrossEntropy(pass.logits, target, kPadId);
}

template <typename T>
EncodedPost<T> SegTrmModel<T>::EncodeForInference(const SegmentedInput& input) const {
  Graph<T> g(false, 0, GradMode::kNone);
  ParamStore<T>& params = shared_params();
  EncoderStates<T> states = Encode(g, params, input, cfg_.encoder);
  SelectionResult<T> sel = SelectAndRecombine(states, cfg_.ssm);
  EncodedPost<T> post;
  post.h_s = Tensor<T>::Matrix(1, cfg_.encoder.hidden);
  auto src = states.h.value().row(states.s_index);
  std::copy(src.begin(), src.end(), post.h_s.data());
  post.h_xs = sel.h_xs.value();
  post.chosen = std::move(sel.chosen);
  post.scores = std::move(sel.scores);
  return post;
}

template <typename T>
std::vector<double> SegTrmModel<T>::NextLogProbs(const EncodedPost<T>& post,
                                                 std::span<const int> prefix) const {
  Graph<T> g(false, 0, GradMode::kNone);
  Var<T> logits = DecoderForward(g, shared_params(), cfg_.decoder, prefix, g.View(post.h_s),
                                 g.View(post.h_xs));
  auto row = logits.value().row(prefix.size());
  std::vector<double> out(row.begin(), row.end());
  const double max = *std::max_element(out.begin(), out.end());
  double denom = 0;
  for (double v : out) denom += std::exp(v - max);
  const double log_z = max + std::log(denom);
  for (double& v : out) v -= log_z;
  return out;
}

template ParamStore<float> InitModelParams(const ModelConfig&, std::uint64_t);
template ParamStore<double> InitModelParams(const ModelConfig&, std::uint64_t);
template class SegTrmModel<float>;
template class SegTrmModel<double>;

}  // namespace segtrm
