#include "segtrm/autograd.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "segtrm/params.h"

namespace segtrm {
namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<RowMajor<T>> AsMatrix(Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
Eigen::Map<const RowMajor<T>> AsMatrix(const Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

[[noreturn]] void ShapeError(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              ShapeToString(a) + " and " + ShapeToString(b));
}

template <typename T>
Graph<T>& SameGraph(Var<T> a, Var<T> b) {
  if (a.graph != b.graph) throw std::invalid_argument("vars belong to different graphs");
  return *a.graph;
}

}  // namespace

// ---- Graph ----------------------------------------------------------------

template <typename T>
Var<T> Graph<T>::Constant(Tensor<T> value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Graph<T>::View(const Tensor<T>& value) {
  Node node;
  node.external = &value;
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Graph<T>::Parameter(Param<T>& param) {
  if (grad_mode_ == GradMode::kNone) return View(param.value);
  Node node;
  node.external = &param.value;
  node.grad_sink = &param.grad;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var<T> v) const {
  const Node& node = nodes_.at(v.id);
  return node.external ? *node.external : node.value;
}

template <typename T>
const Tensor<T>& Graph<T>::grad(Var<T> v) const {
  const Node& node = nodes_.at(v.id);
  return node.grad_sink ? *node.grad_sink : node.grad;
}

template <typename T>
Tensor<T>& Graph<T>::GradSlot(Var<T> v) {
  Node& node = nodes_[v.id];
  if (node.grad_sink) {
    if (node.grad_sink->shape() != value(v).shape()) *node.grad_sink = Tensor<T>(value(v).shape());
    return *node.grad_sink;
  }
  if (node.grad.empty() && !value(v).empty()) node.grad = Tensor<T>(value(v).shape());
  return node.grad;
}

template <typename T>
Var<T> Graph<T>::Record(Tensor<T> value, std::vector<Var<T>> inputs,
                        std::function<void(const Tensor<T>&)> backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                   [this](Var<T> in) { return requires_grad(in); });
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

template <typename T>
void Graph<T>::Backward(Var<T> loss, T seed) {
  if (value(loss).size() != 1) {
    throw std::invalid_argument("Backward needs a scalar loss, got shape " +
                                ShapeToString(value(loss).shape()));
  }
  if (!nodes_[loss.id].requires_grad) return;
  GradSlot(loss)[0] += seed;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.empty()) continue;
    // Inputs never alias their consumer, so the reference stays valid even
    // though GradSlot may touch other nodes.
    node.backward(node.grad);
  }
}

// ---- ops ------------------------------------------------------------------

template <typename T>
Var<T> MatMul(Var<T> a, Var<T> b, bool transpose_b) {
  Graph<T>& g = SameGraph(a, b);
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const std::size_t inner_b = transpose_b ? bv.cols() : bv.rows();
  if (av.rank() > 2 || bv.rank() > 2 || av.cols() != inner_b) {
    ShapeError("MatMul", av.shape(), bv.shape());
  }
  const std::size_t n = transpose_b ? bv.rows() : bv.cols();
  Tensor<T> out = Tensor<T>::Matrix(av.rows(), n);
  if (transpose_b) {
    AsMatrix(out).noalias() = AsMatrix(av) * AsMatrix(bv).transpose();
  } else {
    AsMatrix(out).noalias() = AsMatrix(av) * AsMatrix(bv);
  }
  return g.Record(std::move(out), {a, b}, [&g, a, b, transpose_b](const Tensor<T>& dc) {
    auto dcm = AsMatrix(dc);
    if (g.requires_grad(a)) {
      auto da = AsMatrix(g.GradSlot(a));
      if (transpose_b) {
        da.noalias() += dcm * AsMatrix(b.value());
      } else {
        da.noalias() += dcm * AsMatrix(b.value()).transpose();
      }
    }
    if (g.requires_grad(b)) {
      auto db = AsMatrix(g.GradSlot(b));
      if (transpose_b) {
        db.noalias() += dcm.transpose() * AsMatrix(a.value());
      } else {
        db.noalias() += AsMatrix(a.value()).transpose() * dcm;
      }
    }
  });
}

template <typename T>
Var<T> Add(Var<T> a, Var<T> b) {
  Graph<T>& g = SameGraph(a, b);
  if (a.shape() != b.shape()) ShapeError("Add", a.shape(), b.shape());
  Tensor<T> out = a.value();
  AsMatrix(out) += AsMatrix(b.value());
  return g.Record(std::move(out), {a, b}, [&g, a, b](const Tensor<T>& d) {
    for (Var<T> v : {a, b}) {
      if (g.requires_grad(v)) AsMatrix(g.GradSlot(v)) += AsMatrix(d);
    }
  });
}

template <typename T>
Var<T> AddBias(Var<T> a, Var<T> bias) {
  Graph<T>& g = SameGraph(a, bias);
  if (bias.value().size() != a.cols()) ShapeError("AddBias", a.shape(), bias.shape());
  Tensor<T> out = a.value();
  {
    auto m = AsMatrix(out);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(
        bias.value().data(), static_cast<Eigen::Index>(bias.value().size()));
    m.rowwise() += bv;
  }
  return g.Record(std::move(out), {a, bias}, [&g, a, bias](const Tensor<T>& d) {
    if (g.requires_grad(a)) AsMatrix(g.GradSlot(a)) += AsMatrix(d);
    if (g.requires_grad(bias)) {
      Tensor<T>& db = g.GradSlot(bias);
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> dbv(
          db.data(), static_cast<Eigen::Index>(db.size()));
      dbv += AsMatrix(d).colwise().sum();
    }
  });
}

template <typename T>
Var<T> Mul(Var<T> a, Var<T> b) {
  Graph<T>& g = SameGraph(a, b);
  if (a.shape() != b.shape()) ShapeError("Mul", a.shape(), b.shape());
  Tensor<T> out = a.value();
  AsMatrix(out).array() *= AsMatrix(b.value()).array();
  return g.Record(std::move(out), {a, b}, [&g, a, b](const Tensor<T>& d) {
    if (g.requires_grad(a))
      AsMatrix(g.GradSlot(a)).array() += AsMatrix(d).array() * AsMatrix(b.value()).array();
    if (g.requires_grad(b))
      AsMatrix(g.GradSlot(b)).array() += AsMatrix(d).array() * AsMatrix(a.value()).array();
  });
}

template <typename T>
Var<T> Scale(Var<T> a, T factor) {
  Graph<T>& g = *a.graph;
  Tensor<T> out = a.value();
  AsMatrix(out) *= factor;
  return g.Record(std::move(out), {a}, [&g, a, factor](const Tensor<T>& d) {
    AsMatrix(g.GradSlot(a)) += factor * AsMatrix(d);
  });
}

template <typename T>
Var<T> Softmax(Var<T> a, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("Softmax: axis must be 0 or 1");
  Graph<T>& g = *a.graph;
  Tensor<T> out = a.value();
  RowMajor<T> work = AsMatrix(out);
  if (axis == 0) work.transposeInPlace();
  for (Eigen::Index r = 0; r < work.rows(); ++r) {
    auto row = work.row(r);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  if (axis == 0) work.transposeInPlace();
  AsMatrix(out) = work;
  // The backward rule reads the node's own output.
  const Var<T> result{&g, g.size()};
  return g.Record(std::move(out), {a}, [&g, a, result, axis](const Tensor<T>& d) {
    RowMajor<T> y = AsMatrix(result.value());
    RowMajor<T> dy = AsMatrix(d);
    if (axis == 0) {
      y.transposeInPlace();
      dy.transposeInPlace();
    }
    Eigen::Matrix<T, Eigen::Dynamic, 1> dots = (dy.array() * y.array()).rowwise().sum();
    RowMajor<T> dx = y.array() * (dy.colwise() - dots).array();
    if (axis == 0) dx.transposeInPlace();
    AsMatrix(g.GradSlot(a)) += dx;
  });
}

template <typename T>
Var<T> LayerNorm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  Graph<T>& g = SameGraph(x, gamma);
  const std::size_t n = x.cols();
  if (gamma.value().size() != n || beta.value().size() != n) {
    ShapeError("LayerNorm", x.shape(), gamma.shape());
  }
  const std::size_t rows = x.rows();
  Tensor<T> normed(x.shape());
  std::vector<T> inv_std(rows);
  const Tensor<T>& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = xv.row(r);
    T mean = 0;
    for (T v : in) mean += v;
    mean /= static_cast<T>(n);
    T var = 0;
    for (T v : in) var += (v - mean) * (v - mean);
    var /= static_cast<T>(n);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    auto out = normed.row(r);
    for (std::size_t c = 0; c < n; ++c) out[c] = (in[c] - mean) * inv_std[r];
  }
  Tensor<T> out(x.shape());
  const Tensor<T>& gv = gamma.value();
  const Tensor<T>& bv = beta.value();
  for (std::size_t r = 0; r < rows; ++r) {
    auto src = normed.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < n; ++c) dst[c] = src[c] * gv[c] + bv[c];
  }
  return g.Record(
      std::move(out), {x, gamma, beta},
      [&g, x, gamma, beta, normed = std::move(normed), inv_std = std::move(inv_std)](
          const Tensor<T>& d) {
        const std::size_t rows = normed.rows();
        const std::size_t n = normed.cols();
        const Tensor<T>& gv = gamma.value();
        if (g.requires_grad(gamma) || g.requires_grad(beta)) {
          Tensor<T>& dg = g.GradSlot(gamma);
          Tensor<T>& db = g.GradSlot(beta);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
              dg[c] += d.at(r, c) * normed.at(r, c);
              db[c] += d.at(r, c);
            }
          }
        }
        if (!g.requires_grad(x)) return;
        Tensor<T>& dx = g.GradSlot(x);
        std::vector<T> dxhat(n);
        for (std::size_t r = 0; r < rows; ++r) {
          T mean_d = 0;
          T mean_dx = 0;
          for (std::size_t c = 0; c < n; ++c) {
            dxhat[c] = d.at(r, c) * gv[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * normed.at(r, c);
          }
          mean_d /= static_cast<T>(n);
          mean_dx /= static_cast<T>(n);
          for (std::size_t c = 0; c < n; ++c) {
            dx.at(r, c) += inv_std[r] * (dxhat[c] - mean_d - normed.at(r, c) * mean_dx);
          }
        }
      });
}

template <typename T>
Var<T> Gelu(Var<T> x) {
  Graph<T>& g = *x.graph;
  constexpr T kC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = static_cast<T>(0.044715);
  Tensor<T> out = x.value();
  for (T& v : out.values()) v = T(0.5) * v * (T(1) + std::tanh(kC * (v + kA * v * v * v)));
  return g.Record(std::move(out), {x}, [&g, x](const Tensor<T>& d) {
    const Tensor<T>& xv = x.value();
    Tensor<T>& dx = g.GradSlot(x);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const T v = xv[i];
      const T th = std::tanh(kC * (v + kA * v * v * v));
      const T deriv =
          T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * kC * (T(1) + T(3) * kA * v * v);
      dx[i] += d[i] * deriv;
    }
  });
}

template <typename T>
Var<T> Dropout(Var<T> x, double p) {
  Graph<T>& g = *x.graph;
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("Dropout: p must be in [0, 1)");
  if (!g.training() || p == 0.0) return x;
  Tensor<T> keep(x.shape());
  std::bernoulli_distribution coin(1.0 - p);
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (T& k : keep.values()) k = coin(g.rng()) ? scale : T(0);
  Tensor<T> out = x.value();
  AsMatrix(out).array() *= AsMatrix(keep).array();
  return g.Record(std::move(out), {x}, [&g, x, keep = std::move(keep)](const Tensor<T>& d) {
    AsMatrix(g.GradSlot(x)).array() += AsMatrix(d).array() * AsMatrix(keep).array();
  });
}

template <typename T>
Var<T> EmbeddingLookup(Var<T> table, std::span<const int> ids) {
  Graph<T>& g = *table.graph;
  const Tensor<T>& tv = table.value();
  const std::size_t dim = tv.cols();
  Tensor<T> out = Tensor<T>::Matrix(ids.size(), dim);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= tv.rows()) {
      throw std::out_of_range("EmbeddingLookup: id " + std::to_string(ids[r]) +
                              " outside table of shape " + ShapeToString(tv.shape()));
    }
    std::copy_n(tv.row(ids[r]).data(), dim, out.row(r).data());
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return g.Record(std::move(out), {table}, [&g, table, saved = std::move(saved)](const Tensor<T>& d) {
    Tensor<T>& dt = g.GradSlot(table);
    const std::size_t dim = dt.cols();
    for (std::size_t r = 0; r < saved.size(); ++r) {
      auto src = d.row(r);
      auto dst = dt.row(saved[r]);
      for (std::size_t c = 0; c < dim; ++c) dst[c] += src[c];
    }
  });
}

template <typename T>
Var<T> ConcatRows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("ConcatRows: no inputs");
  Graph<T>& g = *parts[0].graph;
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (Var<T> p : parts) {
    if (p.cols() != cols) ShapeError("ConcatRows", parts[0].shape(), p.shape());
    rows += p.rows();
  }
  Tensor<T> out = Tensor<T>::Matrix(rows, cols);
  std::size_t offset = 0;
  for (Var<T> p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + offset);
    offset += p.value().size();
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return g.Record(std::move(out), inputs, [&g, inputs](const Tensor<T>& d) {
    std::size_t offset = 0;
    for (Var<T> p : inputs) {
      const std::size_t count = p.value().size();
      if (g.requires_grad(p)) {
        Tensor<T>& dp = g.GradSlot(p);
        for (std::size_t i = 0; i < count; ++i) dp[i] += d[offset + i];
      }
      offset += count;
    }
  });
}

template <typename T>
Var<T> ConcatCols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("ConcatCols: no inputs");
  Graph<T>& g = *parts[0].graph;
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (Var<T> p : parts) {
    if (p.rows() != rows) ShapeError("ConcatCols", parts[0].shape(), p.shape());
    cols += p.cols();
  }
  Tensor<T> out = Tensor<T>::Matrix(rows, cols);
  std::size_t offset = 0;
  for (Var<T> p : parts) {
    AsMatrix(out).middleCols(offset, p.cols()) = AsMatrix(p.value());
    offset += p.cols();
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return g.Record(std::move(out), inputs, [&g, inputs](const Tensor<T>& d) {
    std::size_t offset = 0;
    for (Var<T> p : inputs) {
      if (g.requires_grad(p)) {
        AsMatrix(g.GradSlot(p)) += AsMatrix(d).middleCols(offset, p.cols());
      }
      offset += p.cols();
    }
  });
}

template <typename T>
Var<T> GatherRows(Var<T> x, std::span<const std::size_t> rows) {
  Graph<T>& g = *x.graph;
  const Tensor<T>& xv = x.value();
  const std::size_t cols = xv.cols();
  Tensor<T> out = Tensor<T>::Matrix(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= xv.rows()) {
      throw std::out_of_range("GatherRows: row " + std::to_string(rows[r]) +
                              " outside shape " + ShapeToString(xv.shape()));
    }
    std::copy_n(xv.row(rows[r]).data(), cols, out.row(r).data());
  }
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  return g.Record(std::move(out), {x}, [&g, x, saved = std::move(saved)](const Tensor<T>& d) {
    Tensor<T>& dx = g.GradSlot(x);
    const std::size_t cols = dx.cols();
    for (std::size_t r = 0; r < saved.size(); ++r) {
      auto src = d.row(r);
      auto dst = dx.row(saved[r]);
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

template <typename T>
Var<T> SliceCols(Var<T> x, std::size_t begin, std::size_t count) {
  Graph<T>& g = *x.graph;
  if (begin + count > x.cols()) {
    ShapeError("SliceCols", x.shape(), Shape{begin, count});
  }
  Tensor<T> out = Tensor<T>::Matrix(x.rows(), count);
  AsMatrix(out) = AsMatrix(x.value()).middleCols(begin, count);
  return g.Record(std::move(out), {x}, [&g, x, begin, count](const Tensor<T>& d) {
    AsMatrix(g.GradSlot(x)).middleCols(begin, count) += AsMatrix(d);
  });
}

template <typename T>
Var<T> Sum(Var<T> x) {
  Graph<T>& g = *x.graph;
  T total = 0;
  for (T v : x.value().values()) total += v;
  return g.Record(Tensor<T>::Scalar(total), {x}, [&g, x](const Tensor<T>& d) {
    Tensor<T>& dx = g.GradSlot(x);
    for (T& v : dx.values()) v += d[0];
  });
}

template <typename T>
Var<T> CrossEntropy(Var<T> logits, std::span<const int> targets, int ignore_id) {
  Graph<T>& g = *logits.graph;
  const Tensor<T>& z = logits.value();
  if (z.rows() != targets.size()) {
    ShapeError("CrossEntropy", z.shape(), Shape{targets.size()});
  }
  const std::size_t vocab = z.cols();
  Tensor<T> probs(z.shape());
  std::size_t counted = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (targets[r] == ignore_id) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= vocab) {
      throw std::out_of_range("CrossEntropy: target " + std::to_string(targets[r]) +
                              " outside vocabulary of " + std::to_string(vocab));
    }
    auto row = z.row(r);
    const T max = *std::max_element(row.begin(), row.end());
    T denom = 0;
    for (std::size_t c = 0; c < vocab; ++c) {
      probs.at(r, c) = std::exp(row[c] - max);
      denom += probs.at(r, c);
    }
    for (std::size_t c = 0; c < vocab; ++c) probs.at(r, c) /= denom;
    total += static_cast<double>(max + std::log(denom) - row[targets[r]]);
    ++counted;
  }
  const T mean = counted ? static_cast<T>(total / static_cast<double>(counted)) : T(0);
  std::vector<int> saved(targets.begin(), targets.end());
  return g.Record(
      Tensor<T>::Scalar(mean), {logits},
      [&g, logits, saved = std::move(saved), probs = std::move(probs), counted,
       ignore_id](const Tensor<T>& d) {
        if (counted == 0) return;
        Tensor<T>& dz = g.GradSlot(logits);
        const T scale = d[0] / static_cast<T>(counted);
        const std::size_t vocab = dz.cols();
        for (std::size_t r = 0; r < saved.size(); ++r) {
          if (saved[r] == ignore_id) continue;
          for (std::size_t c = 0; c < vocab; ++c) dz.at(r, c) += scale * probs.at(r, c);
          dz.at(r, saved[r]) -= scale;
        }
      });
}

#define SEGTRM_INSTANTIATE_OPS(T)                                                     \
  template class Graph<T>;                                                           \
  template Var<T> MatMul(Var<T>, Var<T>, bool);                                      \
  template Var<T> Add(Var<T>, Var<T>);                                               \
  template Var<T> AddBias(Var<T>, Var<T>);                                           \
  template Var<T> Mul(Var<T>, Var<T>);                                               \
  template Var<T> Scale(Var<T>, T);                                                  \
  template Var<T> Softmax(Var<T>, int);                                              \
  template Var<T> LayerNorm(Var<T>, Var<T>, Var<T>, T);                              \
  template Var<T> Gelu(Var<T>);                                                      \
  template Var<T> Dropout(Var<T>, double);                                           \
  template Var<T> EmbeddingLookup(Var<T>, std::span<const int>);                     \
  template Var<T> ConcatRows(std::span<const Var<T>>);                               \
  template Var<T> ConcatCols(std::span<const Var<T>>);                               \
  template Var<T> GatherRows(Var<T>, std::span<const std::size_t>);                  \
  template Var<T> SliceCols(Var<T>, std::size_t, std::size_t);                       \
  template Var<T> Sum(Var<T>);                                                       \
  template Var<T> CrossEntropy(Var<T>, std::span<const int>, int);

SEGTRM_INSTANTIATE_OPS(float)
SEGTRM_INSTANTIATE_OPS(double)

#undef SEGTRM_INSTANTIATE_OPS

}  // namespace segtrm
