#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "segtrm/tensor.h"

namespace segtrm {

// A learnable tensor with its gradient slot and Adam moments.
template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> first_moment;
  Tensor<T> second_moment;
  // Biases and layer-norm parameters are excluded from weight decay.
  bool decay = true;

  Param() = default;
  Param(Tensor<T> init, bool decay_flag);
};

// Named parameters in deterministic (sorted) order.
template <typename T>
class ParamStore {
 public:
  Param<T>& Add(const std::string& name, Tensor<T> init, bool decay = true);
  // std 0.02 normal init, decayed.
  Param<T>& AddNormal(const std::string& name, Shape shape, std::mt19937_64& rng,
                      double stddev = 0.02);
  Param<T>& AddConstant(const std::string& name, Shape shape, T value);

  Param<T>& at(const std::string& name);
  const Param<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t NumScalars() const;
  void ZeroGrad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Param<T>> params_;
};

extern template struct Param<float>;
extern template struct Param<double>;
extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace segtrm
