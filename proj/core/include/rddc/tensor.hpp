// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit arrays with a dynamic reverse-mode tape.
//
// Ops record onto the Graph activated for the calling thread (see GradScope)
// whenever at least one operand requires a gradient. With no active graph the
// same ops run forward only, which is how evaluation paths avoid tape cost.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rddc {

class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  std::size_t numel() const noexcept;
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::string str() const;

  bool operator==(const Shape&) const = default;

 private:
  std::vector<std::size_t> dims_;
};

namespace detail {
struct TensorNode;
}

/// Shared handle to a node of the differentiation graph. Copies alias the same
/// storage; use clone() for an independent leaf.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                          bool requires_grad = false);
  static Tensor from_vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().rank(); }
  std::size_t numel() const { return shape().numel(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  /// In-place access for optimizers and initializers. Never call while the
  /// tensor is an input of a recorded, not yet back-propagated op.
  std::span<double> mutable_data();

  double item() const;
  double operator()(std::size_t i) const;
  double operator()(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  Tensor clone() const;
  Tensor detach() const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend struct detail::TensorNode;
  friend class Graph;
  friend struct OpAccess;
};

/// Append-only tape of executed ops.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  ~Graph();

  std::size_t size() const noexcept { return entries_.size(); }

  /// Seeds d(loss)/d(loss) = 1, runs every recorded closure once in reverse
  /// append order, then clears the tape.
  void backward(const Tensor& loss);
  void clear() noexcept;

  /// Graph active on this thread, or nullptr.
  static Graph* current() noexcept;

  struct Entry {
    std::shared_ptr<detail::TensorNode> output;
    std::function<void(std::span<const double> grad_out)> backward;
  };
  void record(Entry entry);

 private:
  std::vector<Entry> entries_;
};

/// Activates a graph for the current thread for the lifetime of the scope.
class GradScope {
 public:
  explicit GradScope(Graph& graph);
  GradScope(const GradScope&) = delete;
  GradScope& operator=(const GradScope&) = delete;
  ~GradScope();

 private:
  Graph* previous_;
};

/// Back-propagates through the graph active on this thread.
void backward(const Tensor& loss);

// Linear algebra --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Elementwise. Binary ops accept equal shapes, or one operand with a single
// element which is broadcast.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// Throws DomainError on a zero denominator.
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
/// Throws DomainError if any result overflows.
Tensor exp(const Tensor& x);
/// Throws DomainError on negative input.
Tensor sqrt(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor square(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& x);
Tensor operator+(const Tensor& a, double b);
Tensor operator+(double a, const Tensor& b);
Tensor operator-(const Tensor& a, double b);
Tensor operator-(double a, const Tensor& b);
Tensor operator*(const Tensor& a, double b);
Tensor operator*(double a, const Tensor& b);
Tensor operator/(const Tensor& a, double b);
Tensor operator/(double a, const Tensor& b);

// Reductions ------------------------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Removes `axis` from the shape. A rank-1 input reduces to shape {1}.
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);

// Structural ------------------------------------------------------------------

/// Concatenates rank-1 or rank-2 tensors along `axis`.
Tensor concat(const std::vector<Tensor>& xs, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);
/// Rows [begin, begin + count) of a rank-2 tensor.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
/// out[r] = x[index[r]], or a zero row where index[r] < 0.
Tensor gather_rows(const Tensor& x, std::span<const long> index);
/// out[r] = take_first[r] ? a[r] : b[r].
Tensor select_rows(const std::vector<bool>& take_first, const Tensor& a, const Tensor& b);
/// Repeats a rank-1 tensor of length m as the rows of an n×m matrix.
Tensor broadcast_rows(const Tensor& v, std::size_t n);
/// Repeats a rank-1 tensor of length n as the columns of an n×m matrix.
Tensor broadcast_cols(const Tensor& v, std::size_t m);
/// Main diagonal of a square matrix as a rank-1 tensor.
Tensor diagonal(const Tensor& x);
/// Sum of the strictly upper-triangular entries of a square matrix.
Tensor triu_sum(const Tensor& x);

// Row-wise --------------------------------------------------------------------

/// D[l, m] = ||x_l - y_m||^2, evaluated directly so that identical rows give
/// exactly zero.
Tensor sq_dists(const Tensor& x, const Tensor& y);
/// Max-subtracted softmax over each row.
Tensor softmax_rows(const Tensor& x);

}  // namespace rddc
