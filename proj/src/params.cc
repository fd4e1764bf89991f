#include "segtrm/params.h"

#include <stdexcept>

namespace segtrm {

template <typename T>
Param<T>::Param(Tensor<T> init, bool decay_flag)
    : value(std::move(init)),
      grad(value.shape()),
      first_moment(value.shape()),
      second_moment(value.shape()),
      decay(decay_flag) {}

template <typename T>
Param<T>& ParamStore<T>::Add(const std::string& name, Tensor<T> init, bool decay) {
  auto [it, inserted] = params_.try_emplace(name, std::move(init), decay);
  if (!inserted) throw std::invalid_argument("duplicate parameter: " + name);
  return it->second;
}

template <typename T>
Param<T>& ParamStore<T>::AddNormal(const std::string& name, Shape shape,
                                   std::mt19937_64& rng, double stddev) {
  Tensor<T> init(std::move(shape));
  std::normal_distribution<double> normal(0.0, stddev);
  for (auto& v : init.values()) v = static_cast<T>(normal(rng));
  return Add(name, std::move(init), true);
}

template <typename T>
Param<T>& ParamStore<T>::AddConstant(const std::string& name, Shape shape, T value) {
  return Add(name, Tensor<T>(std::move(shape), value), false);
}

template <typename T>
Param<T>& ParamStore<T>::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

template <typename T>
const Param<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::NumScalars() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

template <typename T>
void ParamStore<T>::ZeroGrad() {
  for (auto& [name, p] : params_) p.grad.Fill(T(0));
}

template struct Param<float>;
template struct Param<double>;
template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace segtrm
