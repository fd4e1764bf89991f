#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "segtrm/model.h"
#include "segtrm/params.h"
#include "segtrm/tokenize.h"

namespace segtrm {

struct TrainConfig {
  double lr_max = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double warmup_ratio = 32.0;       // lr_max / lowest rate
  double warmup_proportion = 0.04;  // fraction of total_steps spent warming up
  double clip_min = -1.0;
  double clip_max = 1.0;
  double weight_decay = 0.0;
  std::size_t batch_size = 8;
  std::size_t total_steps = 1000;
  std::uint64_t seed = 0;

  void Validate() const;
  std::size_t WarmupSteps() const;
};

// Piecewise linear: lr_max / ratio at step 0, lr_max at the end of warmup,
// lr_max / ratio again at total_steps.
double LearningRate(std::size_t step, const TrainConfig& cfg);

// Clamps every gradient value into [lo, hi].
template <typename T>
void ClipGradients(ParamStore<T>& params, double lo, double hi);

// One Adam step with bias correction; `t` counts updates from 1. Decoupled
// weight decay applies only to params flagged `decay`.
template <typename T>
void AdamUpdate(ParamStore<T>& params, const TrainConfig& cfg, double lr, std::size_t t);

struct TrainExample {
  SegmentedInput input;
  std::vector<int> target;  // ends with [SEP], may carry trailing PAD
};

// Number of non-PAD target tokens, i.e. the positions the loss counts.
std::size_t CountedTokens(const TrainExample& example);

// Visiting order for one pass over the data, seeded from (seed, epoch). Batch
// `step` takes positions step * batch_size .. of the concatenated epochs, so
// the order depends only on the step and replays exactly after a resume.
std::vector<std::size_t> EpochPermutation(std::uint64_t seed, std::size_t epoch,
                                          std::size_t dataset_size);

// Dropout seed for slot `j` of batch `step`.
std::uint64_t DropoutSeed(std::uint64_t seed, std::size_t step, std::size_t j);

template <typename T>
class Trainer {
 public:
  Trainer(SegTrmModel<T>& model, TrainConfig cfg, std::vector<TrainExample> data);

  // Runs one optimisation step and returns the batch loss: mean cross entropy
  // over every non-PAD target token in the batch. Throws std::runtime_error on
  // a non-finite loss, before touching the parameters.
  double Step();

  std::size_t step() const { return step_; }
  void set_step(std::size_t step) { step_ = step; }
  const TrainConfig& config() const { return cfg_; }
  SegTrmModel<T>& model() { return model_; }

 private:
  SegTrmModel<T>& model_;
  TrainConfig cfg_;
  std::size_t ExampleAt(std::size_t position);

  std::vector<TrainExample> data_;
  std::size_t step_ = 0;
  std::size_t cached_epoch_ = static_cast<std::size_t>(-1);
  std::vector<std::size_t> order_;
};

// Mean teacher-forced loss over `data`, dropout off.
template <typename T>
double DatasetLoss(SegTrmModel<T>& model, const std::vector<TrainExample>& data);

extern template class Trainer<float>;
extern template class Trainer<double>;

}  // namespace segtrm
