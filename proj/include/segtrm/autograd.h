#pragma once

// Tape-based reverse-mode differentiation over dense tensors.
//
// A Graph records every op applied to its Vars in creation order, which is
// already a topological order, so Backward() simply replays the tape in
// reverse. Parameter leaves accumulate straight into the Param's grad slot.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "segtrm/tensor.h"

namespace segtrm {

template <typename T>
struct Param;

template <typename T>
class Graph;

template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return graph->value(*this); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// kNone turns parameters into read-only views, so graphs built for
// inference never touch gradient slots and may share params across threads.
enum class GradMode { kTrack, kNone };

template <typename T>
class Graph {
 public:
  explicit Graph(bool training = false, std::uint64_t seed = 0,
                 GradMode grad_mode = GradMode::kTrack)
      : training_(training), grad_mode_(grad_mode), rng_(seed) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const { return training_; }
  std::mt19937_64& rng() { return rng_; }

  Var<T> Constant(Tensor<T> value);
  // The param must outlive the graph; its grad slot receives gradients.
  Var<T> Parameter(Param<T>& param);
  // Read-only view of a tensor owned elsewhere; never receives gradient.
  Var<T> View(const Tensor<T>& value);

  const Tensor<T>& value(Var<T> v) const;
  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }
  // Gradient accumulated so far; empty when nothing flowed into the node.
  const Tensor<T>& grad(Var<T> v) const;

  // Seeds d(loss) = seed and runs the tape backwards. loss must hold one value.
  void Backward(Var<T> loss, T seed = T(1));

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var<T> Record(Tensor<T> value, std::vector<Var<T>> inputs,
                std::function<void(const Tensor<T>& out_grad)> backward);
  Tensor<T>& GradSlot(Var<T> v);

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    Tensor<T>* grad_sink = nullptr;
    bool requires_grad = false;
    std::function<void(const Tensor<T>&)> backward;
  };

  bool training_;
  GradMode grad_mode_;
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
};

// ---- primitive ops ------------------------------------------------------

// a[m,k] x b[k,n]; with transpose_b, b is [n,k] and the product is a x b^T.
template <typename T>
Var<T> MatMul(Var<T> a, Var<T> b, bool transpose_b = false);
template <typename T>
Var<T> Add(Var<T> a, Var<T> b);
// a[m,n] + bias[n] on every row.
template <typename T>
Var<T> AddBias(Var<T> a, Var<T> bias);
template <typename T>
Var<T> Mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> Scale(Var<T> a, T factor);
// axis 1 normalises each row, axis 0 each column.
template <typename T>
Var<T> Softmax(Var<T> a, int axis = 1);
template <typename T>
Var<T> LayerNorm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5));
// tanh approximation.
template <typename T>
Var<T> Gelu(Var<T> x);
// Inverted dropout; identity when the graph is not training or p == 0.
template <typename T>
Var<T> Dropout(Var<T> x, double p);
template <typename T>
Var<T> EmbeddingLookup(Var<T> table, std::span<const int> ids);
template <typename T>
Var<T> ConcatRows(std::span<const Var<T>> parts);
template <typename T>
Var<T> ConcatCols(std::span<const Var<T>> parts);
template <typename T>
Var<T> GatherRows(Var<T> x, std::span<const std::size_t> rows);
template <typename T>
Var<T> SliceCols(Var<T> x, std::size_t begin, std::size_t count);
template <typename T>
Var<T> Sum(Var<T> x);
// Mean token cross entropy over rows whose target differs from ignore_id.
// Returns 0 when every row is ignored.
template <typename T>
Var<T> CrossEntropy(Var<T> logits, std::span<const int> targets, int ignore_id = -1);

}  // namespace segtrm
