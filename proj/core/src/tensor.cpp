// SPDX-License-Identifier: Apache-2.0
#include "rddc/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rddc/errors.hpp"

namespace rddc {

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool has_grad = false;
  bool requires_grad = false;

  double* grad_buffer() {
    if (!has_grad) {
      grad.assign(value.size(), 0.0);
      has_grad = true;
    }
    return grad.data();
  }
};

}  // namespace detail

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct OpAccess {
  static const NodePtr& node(const Tensor& t) {
    if (!t.node_) throw ContractError("operation on an undefined tensor");
    return t.node_;
  }
  static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }
};

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

thread_local Graph* g_current = nullptr;

ConstMap as_matrix(const std::vector<double>& v, std::size_t r, std::size_t c) {
  return ConstMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

MutMap as_matrix(double* v, std::size_t r, std::size_t c) {
  return MutMap(v, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + t.shape().str());
  }
}

// Builds the output node and records `make_backward(out)` when any input
// requires a gradient and a graph is active.
template <class MakeBackward>
Tensor finish(Shape shape, std::vector<double> value, std::initializer_list<const Tensor*> inputs,
              MakeBackward&& make_backward) {
  auto out = std::make_shared<TensorNode>();
  out->shape = std::move(shape);
  out->value = std::move(value);
  Graph* graph = Graph::current();
  if (graph) {
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Tensor* t) { return OpAccess::node(*t)->requires_grad; });
    if (any) {
      out->requires_grad = true;
      graph->record({out, make_backward(out)});
    }
  }
  return OpAccess::wrap(std::move(out));
}

// Elementwise binary op with scalar broadcast.
struct BinaryOperands {
  NodePtr a, b;
  bool a_scalar, b_scalar;
  Shape shape;
  std::size_t n;
};

BinaryOperands binary_operands(const Tensor& a, const Tensor& b, const char* op) {
  BinaryOperands o{OpAccess::node(a), OpAccess::node(b), false, false, {}, 0};
  if (a.shape() == b.shape()) {
    o.shape = a.shape();
  } else if (b.numel() == 1 && (a.numel() != 1 || a.shape().rank() >= b.shape().rank())) {
    o.b_scalar = true;
    o.shape = a.shape();
  } else if (a.numel() == 1) {
    o.a_scalar = true;
    o.shape = b.shape();
  } else {
    throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape().str() + " and " +
                         b.shape().str());
  }
  o.n = o.shape.numel();
  return o;
}

// Adds g[i] * scale_i into node's gradient, summing when the node was broadcast.
template <class F>
void accumulate_binary(const NodePtr& node, bool broadcast, std::size_t n, F&& term) {
  if (!node->requires_grad) return;
  double* g = node->grad_buffer();
  if (broadcast) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += term(i);
    g[0] += s;
  } else {
    for (std::size_t i = 0; i < n; ++i) g[i] += term(i);
  }
}

template <class Fwd, class Bwd>
Tensor unary(const Tensor& x, Fwd&& fwd, Bwd&& dfdx) {
  NodePtr in = OpAccess::node(x);
  std::vector<double> out(in->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in->value[i]);
  return finish(x.shape(), std::move(out), {&x}, [in, dfdx](const NodePtr& o) {
    return [in, o, dfdx](std::span<const double> g) {
      if (!in->requires_grad) return;
      double* gi = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * dfdx(in->value[i], o->value[i]);
    };
  });
}

Shape reduced_shape(const Shape& s, std::size_t axis) {
  std::vector<std::size_t> dims = s.dims();
  dims.erase(dims.begin() + static_cast<std::ptrdiff_t>(axis));
  if (dims.empty()) dims.push_back(1);
  return Shape(std::move(dims));
}

// outer × axis × inner decomposition of a row-major shape.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit a;
  for (std::size_t i = 0; i < s.rank(); ++i) {
    if (i < axis) a.outer *= s[i];
    else if (i == axis) a.extent = s[i];
    else a.inner *= s[i];
  }
  return a;
}

}  // namespace

// Shape ------------------------------------------------------------------------

Shape::Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {}
Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}

std::size_t Shape::numel() const noexcept {
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
  os << ']';
  return os.str();
}

// Tensor -----------------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.rank() == 0) throw DimensionError("tensor rank must be at least 1");
  if (shape.numel() != data.size()) {
    throw DimensionError("shape " + shape.str() + " holds " + std::to_string(shape.numel()) +
                         " elements, data has " + std::to_string(data.size()));
  }
  node_ = std::make_shared<TensorNode>();
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape.numel();
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data), requires_grad);
}

Tensor Tensor::from_vector(std::vector<double> values, bool requires_grad) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return OpAccess::node(*this)->shape; }

std::size_t Tensor::rows() const {
  require_rank(*this, 2, "rows");
  return shape()[0];
}

std::size_t Tensor::cols() const {
  require_rank(*this, 2, "cols");
  return shape()[1];
}

std::span<const double> Tensor::data() const { return OpAccess::node(*this)->value; }
std::span<double> Tensor::mutable_data() { return OpAccess::node(*this)->value; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape().str());
  return data()[0];
}

double Tensor::operator()(std::size_t i) const { return data()[i]; }

double Tensor::operator()(std::size_t i, std::size_t j) const { return data()[i * cols() + j]; }

bool Tensor::requires_grad() const { return OpAccess::node(*this)->requires_grad; }
void Tensor::set_requires_grad(bool on) { OpAccess::node(*this)->requires_grad = on; }
bool Tensor::has_grad() const { return OpAccess::node(*this)->has_grad; }

std::span<const double> Tensor::grad() const {
  const auto& n = OpAccess::node(*this);
  if (!n->has_grad) throw ContractError("tensor has no gradient; run backward first");
  return n->grad;
}

void Tensor::zero_grad() {
  auto& n = OpAccess::node(*this);
  n->grad.clear();
  n->has_grad = false;
}

Tensor Tensor::clone() const {
  const auto& n = OpAccess::node(*this);
  return Tensor(n->shape, n->value, n->requires_grad);
}

Tensor Tensor::detach() const {
  const auto& n = OpAccess::node(*this);
  return Tensor(n->shape, n->value, false);
}

// Graph ------------------------------------------------------------------------

Graph::~Graph() {
  if (g_current == this) g_current = nullptr;
}

Graph* Graph::current() noexcept { return g_current; }

void Graph::record(Entry entry) { entries_.push_back(std::move(entry)); }

void Graph::clear() noexcept { entries_.clear(); }

void Graph::backward(const Tensor& loss) {
  const NodePtr& root = OpAccess::node(loss);
  if (root->value.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + root->shape.str());
  }
  if (!root->requires_grad) {
    clear();
    throw ContractError("backward: loss does not depend on any tensor that requires grad");
  }
  root->grad_buffer()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->has_grad) it->backward(it->output->grad);
  }
  clear();
}

GradScope::GradScope(Graph& graph) : previous_(g_current) { g_current = &graph; }
GradScope::~GradScope() { g_current = previous_; }

void backward(const Tensor& loss) {
  Graph* g = Graph::current();
  if (!g) {
    // A leaf loss has no tape to walk.
    const NodePtr& root = OpAccess::node(loss);
    if (root->value.size() != 1) throw ContractError("backward requires a scalar loss");
    if (!root->requires_grad) throw ContractError("backward: no active graph");
    root->grad_buffer()[0] += 1.0;
    return;
  }
  g->backward(loss);
}

// Linear algebra ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: cannot multiply " + a.shape().str() + " by " + b.shape().str());
  }
  std::size_t m = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
  NodePtr na = OpAccess::node(a), nb = OpAccess::node(b);
  std::vector<double> out(m * q);
  as_matrix(out.data(), m, q).noalias() = as_matrix(na->value, m, p) * as_matrix(nb->value, p, q);
  return finish(Shape{m, q}, std::move(out), {&a, &b}, [=](const NodePtr&) {
    return [=](std::span<const double> g) {
      ConstMap G(g.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(q));
      if (na->requires_grad) {
        as_matrix(na->grad_buffer(), m, p).noalias() += G * as_matrix(nb->value, p, q).transpose();
      }
      if (nb->requires_grad) {
        as_matrix(nb->grad_buffer(), p, q).noalias() += as_matrix(na->value, m, p).transpose() * G;
      }
    };
  });
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  std::size_t r = x.shape()[0], c = x.shape()[1];
  NodePtr in = OpAccess::node(x);
  std::vector<double> out(r * c);
  as_matrix(out.data(), c, r) = as_matrix(in->value, r, c).transpose();
  return finish(Shape{c, r}, std::move(out), {&x}, [=](const NodePtr&) {
    return [=](std::span<const double> g) {
      if (!in->requires_grad) return;
      ConstMap G(g.data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r));
      as_matrix(in->grad_buffer(), r, c) += G.transpose();
    };
  });
}

// Elementwise ------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  auto o = binary_operands(a, b, "add");
  std::vector<double> out(o.n);
  for (std::size_t i = 0; i < o.n; ++i) {
    out[i] = o.a->value[o.a_scalar ? 0 : i] + o.b->value[o.b_scalar ? 0 : i];
  }
  return finish(o.shape, std::move(out), {&a, &b}, [o](const NodePtr&) {
    return [o](std::span<const double> g) {
      accumulate_binary(o.a, o.a_scalar, o.n, [&](std::size_t i) { return g[i]; });
      accumulate_binary(o.b, o.b_scalar, o.n, [&](std::size_t i) { return g[i]; });
    };
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto o = binary_operands(a, b, "sub");
  std::vector<double> out(o.n);
  for (std::size_t i = 0; i < o.n; ++i) {
    out[i] = o.a->value[o.a_scalar ? 0 : i] - o.b->value[o.b_scalar ? 0 : i];
  }
  return finish(o.shape, std::move(out), {&a, &b}, [o](const NodePtr&) {
    return [o](std::span<const double> g) {
      accumulate_binary(o.a, o.a_scalar, o.n, [&](std::size_t i) { return g[i]; });
      accumulate_binary(o.b, o.b_scalar, o.n, [&](std::size_t i) { return -g[i]; });
    };
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto o = binary_operands(a, b, "mul");
  std::vector<double> out(o.n);
  for (std::size_t i = 0; i < o.n; ++i) {
    out[i] = o.a->value[o.a_scalar ? 0 : i] * o.b->value[o.b_scalar ? 0 : i];
  }
  return finish(o.shape, std::move(out), {&a, &b}, [o](const NodePtr&) {
    return [o](std::span<const double> g) {
      accumulate_binary(o.a, o.a_scalar, o.n,
                        [&](std::size_t i) { return g[i] * o.b->value[o.b_scalar ? 0 : i]; });
      accumulate_binary(o.b, o.b_scalar, o.n,
                        [&](std::size_t i) { return g[i] * o.a->value[o.a_scalar ? 0 : i]; });
    };
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  auto o = binary_operands(a, b, "div");
  std::vector<double> out(o.n);
  for (std::size_t i = 0; i < o.n; ++i) {
    double den = o.b->value[o.b_scalar ? 0 : i];
    if (den == 0.0) throw DomainError("div: division by zero");
    out[i] = o.a->value[o.a_scalar ? 0 : i] / den;
  }
  return finish(o.shape, std::move(out), {&a, &b}, [o](const NodePtr&) {
    return [o](std::span<const double> g) {
      accumulate_binary(o.a, o.a_scalar, o.n,
                        [&](std::size_t i) { return g[i] / o.b->value[o.b_scalar ? 0 : i]; });
      accumulate_binary(o.b, o.b_scalar, o.n, [&](std::size_t i) {
        double den = o.b->value[o.b_scalar ? 0 : i];
        return -g[i] * o.a->value[o.a_scalar ? 0 : i] / (den * den);
      });
    };
  });
}

Tensor neg(const Tensor& x) {
  return unary(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        double r = std::exp(v);
        if (!std::isfinite(r)) throw DomainError("exp: overflow at " + std::to_string(v));
        return r;
      },
      [](double, double y) { return y; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v < 0.0) throw DomainError("sqrt: negative argument " + std::to_string(v));
        return std::sqrt(v);
      },
      // Derivative at 0 is unbounded; report 0 rather than inf.
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
Tensor operator-(const Tensor& x) { return neg(x); }
Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor operator+(double a, const Tensor& b) { return add(Tensor::scalar(a), b); }
Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
Tensor operator-(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor operator*(double a, const Tensor& b) { return mul(Tensor::scalar(a), b); }
Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
Tensor operator/(double a, const Tensor& b) { return div(Tensor::scalar(a), b); }

// Reductions -------------------------------------------------------------------

Tensor sum(const Tensor& x) {
  NodePtr in = OpAccess::node(x);
  double s = std::accumulate(in->value.begin(), in->value.end(), 0.0);
  return finish(Shape{1}, {s}, {&x}, [in](const NodePtr&) {
    return [in](std::span<const double> g) {
      if (!in->requires_grad) return;
      double* gi = in->grad_buffer();
      for (std::size_t i = 0; i < in->value.size(); ++i) gi[i] += g[0];
    };
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of an empty tensor");
  return sum(x) / static_cast<double>(x.numel());
}

Tensor sum(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("sum: axis " + std::to_string(axis) + " out of range for shape " +
                         x.shape().str());
  }
  NodePtr in = OpAccess::node(x);
  AxisSplit s = split_at(x.shape(), axis);
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t a = 0; a < s.extent; ++a)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += in->value[(o * s.extent + a) * s.inner + i];
  return finish(reduced_shape(x.shape(), axis), std::move(out), {&x}, [in, s](const NodePtr&) {
    return [in, s](std::span<const double> g) {
      if (!in->requires_grad) return;
      double* gi = in->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t a = 0; a < s.extent; ++a)
          for (std::size_t i = 0; i < s.inner; ++i)
            gi[(o * s.extent + a) * s.inner + i] += g[o * s.inner + i];
    };
  });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("mean: axis " + std::to_string(axis) + " out of range for shape " +
                         x.shape().str());
  }
  if (x.shape()[axis] == 0) throw DimensionError("mean over an empty axis");
  return sum(x, axis) / static_cast<double>(x.shape()[axis]);
}

// Structural -------------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& xs, std::size_t axis) {
  if (xs.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = xs.front().shape();
  if (axis >= first.rank()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for shape " +
                         first.str());
  }
  std::vector<std::size_t> dims = first.dims();
  dims[axis] = 0;
  for (const auto& t : xs) {
    const Shape& s = t.shape();
    bool ok = s.rank() == first.rank();
    for (std::size_t d = 0; ok && d < s.rank(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) {
      throw DimensionError("concat: shape " + s.str() + " incompatible with " + first.str() +
                           " along axis " + std::to_string(axis));
    }
    dims[axis] += s[axis];
  }
  Shape out_shape(dims);
  AxisSplit total = split_at(out_shape, axis);
  std::vector<NodePtr> ins;
  std::vector<std::size_t> offsets;  // along axis
  std::vector<double> out(out_shape.numel());
  std::size_t offset = 0;
  for (const auto& t : xs) {
    NodePtr n = OpAccess::node(t);
    std::size_t ext = t.shape()[axis];
    for (std::size_t o = 0; o < total.outer; ++o) {
      std::copy_n(n->value.begin() + static_cast<std::ptrdiff_t>(o * ext * total.inner),
                  ext * total.inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * total.extent + offset) * total.inner));
    }
    ins.push_back(std::move(n));
    offsets.push_back(offset);
    offset += ext;
  }
  bool any = std::any_of(ins.begin(), ins.end(), [](const NodePtr& n) { return n->requires_grad; });
  auto result = OpAccess::wrap(std::make_shared<TensorNode>());
  auto node = OpAccess::node(result);
  node->shape = out_shape;
  node->value = std::move(out);
  if (Graph* g = Graph::current(); g && any) {
    node->requires_grad = true;
    g->record({node, [ins, offsets, total, axis](std::span<const double> grad) {
                 for (std::size_t k = 0; k < ins.size(); ++k) {
                   const NodePtr& n = ins[k];
                   if (!n->requires_grad) continue;
                   std::size_t ext = n->shape[axis];
                   double* gi = n->grad_buffer();
                   for (std::size_t o = 0; o < total.outer; ++o)
                     for (std::size_t j = 0; j < ext * total.inner; ++j)
                       gi[o * ext * total.inner + j] +=
                           grad[(o * total.extent + offsets[k]) * total.inner + j];
                 }
               }});
  }
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape.numel() != x.numel()) {
    throw DimensionError("reshape: cannot view " + x.shape().str() + " as " + shape.str());
  }
  NodePtr in = OpAccess::node(x);
  return finish(std::move(shape), in->value, {&x}, [in](const NodePtr&) {
    return [in](std::span<const double> g) {
      if (!in->requires_grad) return;
      double* gi = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    };
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank(x, 2, "slice_rows");
  std::size_t r = x.shape()[0], c = x.shape()[1];
  if (begin + count > r) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " + x.shape().str());
  }
  NodePtr in = OpAccess::node(x);
  auto first = in->value.begin() + static_cast<std::ptrdiff_t>(begin * c);
  std::vector<double> out(first, first + static_cast<std::ptrdiff_t>(count * c));
  return finish(Shape{count, c}, std::move(out), {&x}, [in, begin, c](const NodePtr&) {
    return [in, begin, c](std::span<const double> g) {
      if (!in->requires_grad) return;
      double* gi = in->grad_buffer() + begin * c;
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    };
  });
}

Tensor gather_rows(const Tensor& x, std::span<const long> index) {
  require_rank(x, 2, "gather_rows");
  std::size_t r = x.shape()[0], c = x.shape()[1];
  for (long i : index) {
    if (i >= static_cast<long>(r)) {
      throw DimensionError("gather_rows: index " + std::to_string(i) + " out of range for " +
                           x.shape().str());
    }
  }
  NodePtr in = OpAccess::node(x);
  std::vector<long> idx(index.begin(), index.end());
  std::vector<double> out(idx.size() * c, 0.0);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0) continue;
    std::copy_n(in->value.begin() + idx[k] * static_cast<long>(c), c,
                out.begin() + static_cast<std::ptrdiff_t>(k * c));
  }
  return finish(Shape{idx.size(), c}, std::move(out), {&x}, [in, idx, c](const NodePtr&) {
    return [in, idx, c](std::span<const double> g) {
      if (!in->requires_grad) return;
      double* gi = in->grad_buffer();
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0) continue;
        for (std::size_t j = 0; j < c; ++j) gi[static_cast<std::size_t>(idx[k]) * c + j] += g[k * c + j];
      }
    };
  });
}

Tensor select_rows(const std::vector<bool>& take_first, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "select_rows");
  if (a.shape() != b.shape() || take_first.size() != a.shape()[0]) {
    throw DimensionError("select_rows: shapes " + a.shape().str() + " and " + b.shape().str() +
                         " with mask of " + std::to_string(take_first.size()) + " rows");
  }
  std::size_t r = a.shape()[0], c = a.shape()[1];
  NodePtr na = OpAccess::node(a), nb = OpAccess::node(b);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const auto& src = take_first[i] ? na->value : nb->value;
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(i * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return finish(a.shape(), std::move(out), {&a, &b}, [=](const NodePtr&) {
    return [=](std::span<const double> g) {
      for (std::size_t i = 0; i < r; ++i) {
        const NodePtr& dst = take_first[i] ? na : nb;
        if (!dst->requires_grad) continue;
        double* gd = dst->grad_buffer() + i * c;
        for (std::size_t j = 0; j < c; ++j) gd[j] += g[i * c + j];
      }
    };
  });
}

Tensor broadcast_rows(const Tensor& v, std::size_t n) {
  require_rank(v, 1, "broadcast_rows");
  std::size_t m = v.shape()[0];
  NodePtr in = OpAccess::node(v);
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) std::copy(in->value.begin(), in->value.end(), out.begin() + static_cast<std::ptrdiff_t>(i * m));
  return finish(Shape{n, m}, std::move(out), {&v}, [in, n, m](const NodePtr&) {
    return [in, n, m](std::span<const double> g) {
      if (!in->requires_grad) return;
      double* gi = in->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gi[j] += g[i * m + j];
    };
  });
}

Tensor broadcast_cols(const Tensor& v, std::size_t m) {
  require_rank(v, 1, "broadcast_cols");
  std::size_t n = v.shape()[0];
  NodePtr in = OpAccess::node(v);
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = in->value[i];
  return finish(Shape{n, m}, std::move(out), {&v}, [in, n, m](const NodePtr&) {
    return [in, n, m](std::span<const double> g) {
      if (!in->requires_grad) return;
      double* gi = in->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gi[i] += g[i * m + j];
    };
  });
}

Tensor diagonal(const Tensor& x) {
  require_rank(x, 2, "diagonal");
  std::size_t n = x.shape()[0];
  if (x.shape()[1] != n) throw DimensionError("diagonal: matrix " + x.shape().str() + " is not square");
  NodePtr in = OpAccess::node(x);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = in->value[i * n + i];
  return finish(Shape{n}, std::move(out), {&x}, [in, n](const NodePtr&) {
    return [in, n](std::span<const double> g) {
      if (!in->requires_grad) return;
      double* gi = in->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) gi[i * n + i] += g[i];
    };
  });
}

Tensor triu_sum(const Tensor& x) {
  require_rank(x, 2, "triu_sum");
  std::size_t n = x.shape()[0];
  if (x.shape()[1] != n) throw DimensionError("triu_sum: matrix " + x.shape().str() + " is not square");
  NodePtr in = OpAccess::node(x);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s += in->value[i * n + j];
  return finish(Shape{1}, {s}, {&x}, [in, n](const NodePtr&) {
    return [in, n](std::span<const double> g) {
      if (!in->requires_grad) return;
      double* gi = in->grad_buffer();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) gi[i * n + j] += g[0];
    };
  });
}

// Row-wise ---------------------------------------------------------------------

Tensor sq_dists(const Tensor& x, const Tensor& y) {
  require_rank(x, 2, "sq_dists");
  require_rank(y, 2, "sq_dists");
  if (x.shape()[1] != y.shape()[1]) {
    throw DimensionError("sq_dists: row widths differ, " + x.shape().str() + " vs " + y.shape().str());
  }
  std::size_t n = x.shape()[0], m = y.shape()[0], p = x.shape()[1];
  NodePtr nx = OpAccess::node(x), ny = OpAccess::node(y);
  std::vector<double> out(n * m);
  for (std::size_t l = 0; l < n; ++l) {
    const double* xl = nx->value.data() + l * p;
    for (std::size_t k = 0; k < m; ++k) {
      const double* yk = ny->value.data() + k * p;
      double s = 0.0;
      for (std::size_t c = 0; c < p; ++c) {
        double d = xl[c] - yk[c];
        s += d * d;
      }
      out[l * m + k] = s;
    }
  }
  return finish(Shape{n, m}, std::move(out), {&x, &y}, [=](const NodePtr&) {
    return [=](std::span<const double> g) {
      double* gx = nx->requires_grad ? nx->grad_buffer() : nullptr;
      double* gy = ny->requires_grad ? ny->grad_buffer() : nullptr;
      for (std::size_t l = 0; l < n; ++l) {
        const double* xl = nx->value.data() + l * p;
        for (std::size_t k = 0; k < m; ++k) {
          double w = 2.0 * g[l * m + k];
          if (w == 0.0) continue;
          const double* yk = ny->value.data() + k * p;
          for (std::size_t c = 0; c < p; ++c) {
            double d = w * (xl[c] - yk[c]);
            if (gx) gx[l * p + c] += d;
            if (gy) gy[k * p + c] -= d;
          }
        }
      }
    };
  });
}

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  std::size_t n = x.shape()[0], k = x.shape()[1];
  NodePtr in = OpAccess::node(x);
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = in->value.data() + i * k;
    double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += (out[i * k + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= z;
  }
  return finish(x.shape(), std::move(out), {&x}, [in, n, k](const NodePtr& o) {
    return [in, o, n, k](std::span<const double> g) {
      if (!in->requires_grad) return;
      double* gi = in->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const double* y = o->value.data() + i * k;
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) dot += g[i * k + j] * y[j];
        for (std::size_t j = 0; j < k; ++j) gi[i * k + j] += y[j] * (g[i * k + j] - dot);
      }
    };
  });
}

}  // namespace rddc
