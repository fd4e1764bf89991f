#include "segtrm/tensor.h"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace segtrm {

std::size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill)
    : shape_(std::move(shape)), values_(NumElements(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != NumElements(shape_)) {
    throw std::invalid_argument("tensor of shape " + ShapeToString(shape_) +
                                " cannot hold " + std::to_string(values_.size()) +
                                " values");
  }
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  if (shape_.size() < 2) return 1;
  return values_.size() / shape_.back();
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  if (shape_.empty()) return 1;
  return shape_.back();
}

template <typename T>
void Tensor<T>::Fill(T value) {
  std::fill(values_.begin(), values_.end(), value);
}

template <typename T>
void Tensor<T>::Reshape(Shape shape) {
  if (NumElements(shape) != values_.size()) {
    throw std::invalid_argument("cannot reshape " + ShapeToString(shape_) + " to " +
                                ShapeToString(shape));
  }
  shape_ = std::move(shape);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace segtrm
