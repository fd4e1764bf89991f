#include "segtrm/train.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace segtrm {
namespace {

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

void TrainConfig::Validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(lr_max > 0 && std::isfinite(lr_max), "train.lr must be positive");
  require(beta1 >= 0 && beta1 < 1, "train.beta1 must be in [0, 1)");
  require(beta2 >= 0 && beta2 < 1, "train.beta2 must be in [0, 1)");
  require(eps > 0, "train.eps must be positive");
  require(warmup_ratio >= 1, "train.warmup_ratio must be at least 1");
  require(warmup_proportion > 0 && warmup_proportion < 1,
          "train.warmup_proportion must be in (0, 1)");
  require(std::isfinite(clip_min) && std::isfinite(clip_max) && clip_min < clip_max,
          "train.clip bounds must be finite with min < max");
  require(weight_decay >= 0, "train.weight_decay must be non-negative");
  require(batch_size > 0, "train.batch_size must be positive");
  require(total_steps > 0, "train.steps must be positive");
}

std::size_t TrainConfig::WarmupSteps() const {
  const auto w = static_cast<std::size_t>(std::llround(warmup_proportion * total_steps));
  return std::clamp<std::size_t>(w, 1, total_steps);
}

double LearningRate(std::size_t step, const TrainConfig& cfg) {
  const double floor = cfg.lr_max / cfg.warmup_ratio;
  const std::size_t warmup = cfg.WarmupSteps();
  step = std::min(step, cfg.total_steps);
  if (step <= warmup) {
    return floor + (cfg.lr_max - floor) * static_cast<double>(step) / warmup;
  }
  const double remaining =
      static_cast<double>(cfg.total_steps - step) / static_cast<double>(cfg.total_steps - warmup);
  return floor + (cfg.lr_max - floor) * remaining;
}

template <typename T>
void ClipGradients(ParamStore<T>& params, double lo, double hi) {
  for (auto& [name, p] : params) {
    for (T& g : p.grad.values()) g = static_cast<T>(std::clamp<double>(g, lo, hi));
  }
}

template <typename T>
void AdamUpdate(ParamStore<T>& params, const TrainConfig& cfg, double lr, std::size_t t) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& [name, p] : params) {
    const double decay = p.decay ? cfg.weight_decay : 0.0;
    T* w = p.value.data();
    T* m = p.first_moment.data();
    T* v = p.second_moment.data();
    const T* g = p.grad.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = (mi / c1) / (std::sqrt(vi / c2) + cfg.eps) + decay * w[i];
      w[i] = static_cast<T>(w[i] - lr * update);
    }
  }
}

std::size_t CountedTokens(const TrainExample& example) {
  return static_cast<std::size_t>(
      std::count_if(example.target.begin(), example.target.end(), [](int id) { return id != kPadId; }));
}

std::vector<std::size_t> EpochPermutation(std::uint64_t seed, std::size_t epoch,
                                          std::size_t dataset_size) {
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(SplitMix(seed ^ SplitMix(epoch + 1)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::uint64_t DropoutSeed(std::uint64_t seed, std::size_t step, std::size_t j) {
  return SplitMix(SplitMix(SplitMix(seed) ^ step) ^ (j + 0x5bd1e995ull));
}

template <typename T>
Trainer<T>::Trainer(SegTrmModel<T>& model, TrainConfig cfg, std::vector<TrainExample> data)
    : model_(model), cfg_(cfg), data_(std::move(data)) {
  cfg_.Validate();
  if (data_.empty()) throw std::invalid_argument("training set is empty");
  for (const auto& ex : data_) {
    if (CountedTokens(ex) == 0) throw std::invalid_argument("training example without target");
  }
}

template <typename T>
std::size_t Trainer<T>::ExampleAt(std::size_t position) {
  const std::size_t epoch = position / data_.size();
  if (epoch != cached_epoch_) {
    order_ = EpochPermutation(cfg_.seed, epoch, data_.size());
    cached_epoch_ = epoch;
  }
  return order_[position % data_.size()];
}

template <typename T>
double Trainer<T>::Step() {
  std::vector<std::size_t> batch(cfg_.batch_size);
  std::size_t tokens = 0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    batch[j] = ExampleAt(step_ * cfg_.batch_size + j);
    tokens += CountedTokens(data_[batch[j]]);
  }

  ParamStore<T>& params = model_.params();
  params.ZeroGrad();
  double loss = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const TrainExample& ex = data_[batch[j]];
    const double weight = static_cast<double>(CountedTokens(ex)) / static_cast<double>(tokens);
    Graph<T> g(true, DropoutSeed(cfg_.seed, step_, j));
    Var<T> l = model_.Loss(g, ex.input, ex.target);
    const double value = l.value()[0];
    if (!std::isfinite(value)) {
      throw std::runtime_error("non-finite loss " + std::to_string(value) + " at step " +
                               std::to_string(step_) + " on example " + std::to_string(batch[j]));
    }
    loss += weight * value;
    g.Backward(l, static_cast<T>(weight));
  }
  ClipGradients(params, cfg_.clip_min, cfg_.clip_max);
  AdamUpdate(params, cfg_, LearningRate(step_, cfg_), step_ + 1);
  ++step_;
  return loss;
}

template <typename T>
double DatasetLoss(SegTrmModel<T>& model, const std::vector<TrainExample>& data) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : data) {
    Graph<T> g(false, 0, GradMode::kNone);
    const std::size_t n = CountedTokens(ex);
    total += static_cast<double>(model.Loss(g, ex.input, ex.target).value()[0]) * n;
    tokens += n;
  }
  return tokens == 0 ? 0.0 : total / tokens;
}

template void ClipGradients(ParamStore<float>&, double, double);
template void ClipGradients(ParamStore<double>&, double, double);
template void AdamUpdate(ParamStore<float>&, const TrainConfig&, double, std::size_t);
template void AdamUpdate(ParamStore<double>&, const TrainConfig&, double, std::size_t);
template double DatasetLoss(SegTrmModel<float>&, const std::vector<TrainExample>&);
template double DatasetLoss(SegTrmModel<double>&, const std::vector<TrainExample>&);
template class Trainer<float>;
template class Trainer<double>;

}  // namespace segtrm
