#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace segtrm {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Dense row-major array. Anything of rank >= 2 is viewed as a matrix whose
// column count is the last extent; rank 0 and rank 1 are a single row.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor Matrix(std::size_t rows, std::size_t cols, T fill = T(0)) {
    return Tensor(Shape{rows, cols}, fill);
  }
  static Tensor Scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::size_t rows() const;
  std::size_t cols() const;

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::span<T> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }
  std::span<const T> row(std::size_t r) const {
    return {values_.data() + r * cols(), cols()};
  }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  void Fill(T value);
  // Same element count required.
  void Reshape(Shape shape);

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> values_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace segtrm
