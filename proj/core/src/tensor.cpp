#include "mrolab/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace mrolab::tensor {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;

MapMatrix as_matrix(std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return MapMatrix(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

[[noreturn]] void fail(const std::string& op, const std::string& what) {
  throw ShapeError(op + ": " + what);
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) fail(op, "undefined tensor argument");
}

// Rows/cols view of a rank-1 or rank-2 tensor along its last axis.
std::pair<std::size_t, std::size_t> rows_cols(const Tensor& t, const char* op) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  fail(op, "expected rank 1 or 2, got " + shape_str(t.shape()));
}

bool wants_grad(const Tensor& t) { return t.requires_grad(); }

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, fill), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("Tensor::from: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_size(shape)) + " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({}, {v}, requires_grad); }

detail::Node& Tensor::node() const {
  if (!node_) throw std::logic_error("use of undefined Tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("Tensor::dim: axis out of range for " + shape_str(s));
  return s[axis];
}

std::span<const double> Tensor::values() const { return node().value; }
std::span<double> Tensor::mutable_values() { return node().value; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("Tensor::item: tensor has shape " + shape_str(shape()));
  return node().value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const auto& n = node();
  if (n.shape.size() != 2 || row >= n.shape[0] || col >= n.shape[1]) {
    throw ShapeError("Tensor::at: index out of range for " + shape_str(n.shape));
  }
  return n.value[row * n.shape[1] + col];
}

bool Tensor::requires_grad() const { return node().requires_grad; }
bool Tensor::has_grad() const { return !node().grad.empty(); }
std::span<const double> Tensor::grad() const { return node().grad; }
std::span<double> Tensor::mutable_grad() { return node().grad_buffer(); }

void Tensor::zero_grad() {
  auto& g = node().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

void Tensor::clear_grad() { node().grad.clear(); }

Tensor Tensor::detach() const { return from(shape(), node().value, false); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                           std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  for (auto& p : parents) {
    if (p.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  auto& root = node();
  if (root.value.size() != 1) {
    throw ShapeError("backward: root must be a scalar, got shape " + shape_str(root.shape));
  }
  if (!root.requires_grad) throw std::logic_error("backward: root does not require grad");

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{&root, 0}};
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    fail("matmul", "cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  as_matrix(out, m, n).noalias() = as_matrix(a.node().value, m, k) * as_matrix(b.node().value, k, n);
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [a, b, m, k, n](detail::Node& self) {
    const auto dout = as_matrix(self.grad, m, n);
    if (wants_grad(a)) {
      as_matrix(a.node().grad_buffer(), m, k).noalias() += dout * as_matrix(b.node().value, k, n).transpose();
    }
    if (wants_grad(b)) {
      as_matrix(b.node().grad_buffer(), k, n).noalias() += as_matrix(a.node().value, m, k).transpose() * dout;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.size());
    const auto av = a.values(), bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](detail::Node& self) {
      for (const Tensor* t : {&a, &b}) {
        if (!wants_grad(*t)) continue;
        auto& g = t->node().grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    });
  }
  if (a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0)) {
    const std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<double> out(m * n);
    const auto av = a.values(), bv = b.values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + bv[j];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b, m, n](detail::Node& self) {
      if (wants_grad(a)) {
        auto& g = a.node().grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (wants_grad(b)) {
        auto& g = b.node().grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
      }
    });
  }
  fail("add", "incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  if (a.shape() != b.shape()) {
    fail("sub", "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(a.size());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](detail::Node& self) {
    if (wants_grad(a)) {
      auto& g = a.node().grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(b)) {
      auto& g = b.node().grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  if (a.shape() != b.shape()) {
    fail("mul", "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(a.size());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [a, b](detail::Node& self) {
    if (wants_grad(a)) {
      auto& g = a.node().grad_buffer();
      const auto& bv = b.node().value;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants_grad(b)) {
      auto& g = b.node().grad_buffer();
      const auto& av = a.node().value;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  require_defined(a, "scale");
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& x : out) x *= factor;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [a, factor](detail::Node& self) {
    auto& g = a.node().grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double offset) {
  require_defined(a, "add_scalar");
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& x : out) x += offset;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [a](detail::Node& self) {
    auto& g = a.node().grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  require_defined(x, "relu");
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [x](detail::Node& self) {
    auto& g = x.node().grad_buffer();
    const auto& xv = x.node().value;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) g[i] += self.grad[i];
  });
}

Tensor gelu(const Tensor& x) {
  require_defined(x, "gelu");
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  std::vector<double> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * kInvSqrt2));
  return Tensor::make_result(x.shape(), std::move(out), {x}, [x](detail::Node& self) {
    auto& g = x.node().grad_buffer();
    const auto& xv = x.node().value;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(xv[i] * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xv[i] * xv[i]);
      g[i] += self.grad[i] * (cdf + xv[i] * pdf);
    }
  });
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double total = 0.0;
  for (double v : x.values()) total += v;
  return Tensor::make_result({}, {total}, {x}, [x](detail::Node& self) {
    auto& g = x.node().grad_buffer();
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  if (x.size() == 0) fail("mean", "empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_size(shape) != x.size()) {
    fail("reshape", "cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [x](detail::Node& self) {
    auto& g = x.node().grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Row-structured ops

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_defined(x, "layer_norm");
  const auto [m, n] = rows_cols(x, "layer_norm");
  if (gamma.shape() != Shape{n} || beta.shape() != Shape{n}) {
    fail("layer_norm", "gamma/beta must have shape [" + std::to_string(n) + "], got " +
                           shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
  }
  std::vector<double> out(m * n);
  std::vector<double> xhat(m * n);
  std::vector<double> inv_std(m);
  const auto xv = x.values(), gv = gamma.values(), bv = beta.values();
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xv[i * n + j] - mu) * inv_std[i];
      out[i * n + j] = xhat[i * n + j] * gv[j] + bv[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [x, gamma, beta, m = m, n = n, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
        const auto& dy = self.grad;
        if (wants_grad(gamma) || wants_grad(beta)) {
          auto& gg = gamma.node().grad_buffer();
          auto& gb = beta.node().grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              gg[j] += dy[i * n + j] * xhat[i * n + j];
              gb[j] += dy[i * n + j];
            }
        }
        if (wants_grad(x)) {
          auto& gx = x.node().grad_buffer();
          const auto& gv = gamma.node().value;
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = dy[i * n + j] * gv[j];
              mean_d += d;
              mean_dx += d * xhat[i * n + j];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = dy[i * n + j] * gv[j];
              gx[i * n + j] += inv_std[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
            }
          }
        }
      });
}

Tensor softmax(const Tensor& x) {
  require_defined(x, "softmax");
  const auto [m, n] = rows_cols(x, "softmax");
  if (n == 0) fail("softmax", "empty last axis");
  std::vector<double> out(m * n);
  const auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double mx = *std::max_element(xv.begin() + i * n, xv.begin() + (i + 1) * n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += out[i * n + j] = std::exp(xv[i * n + j] - mx);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return Tensor::make_result(x.shape(), out, {x}, [x, y = out, m = m, n = n](detail::Node& self) {
    auto& g = x.node().grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[i * n + j] * (self.grad[i * n + j] - dot);
    }
  });
}

Tensor logsumexp(const Tensor& x) {
  require_defined(x, "logsumexp");
  const auto [m, n] = rows_cols(x, "logsumexp");
  if (n == 0) fail("logsumexp", "empty last axis");
  std::vector<double> out(m);
  std::vector<double> probs(m * n);
  const auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double mx = *std::max_element(xv.begin() + i * n, xv.begin() + (i + 1) * n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += probs[i * n + j] = std::exp(xv[i * n + j] - mx);
    out[i] = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= z;
  }
  Shape shape = x.rank() == 1 ? Shape{} : Shape{m};
  return Tensor::make_result(std::move(shape), std::move(out), {x},
                             [x, probs = std::move(probs), m = m, n = n](detail::Node& self) {
                               auto& g = x.node().grad_buffer();
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i] * probs[i * n + j];
                             });
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> indices) {
  require_defined(table, "embedding");
  if (table.rank() != 2) fail("embedding", "table must be rank 2, got " + shape_str(table.shape()));
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> out(idx.size() * d);
  const auto tv = table.values();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= vocab) {
      fail("embedding", "index " + std::to_string(idx[r]) + " out of range for vocabulary " + std::to_string(vocab));
    }
    std::copy_n(tv.begin() + idx[r] * d, d, out.begin() + r * d);
  }
  const std::size_t rows = idx.size();
  return Tensor::make_result({rows, d}, std::move(out), {table},
                             [table, idx = std::move(idx), d](detail::Node& self) {
                               auto& g = table.node().grad_buffer();
                               for (std::size_t r = 0; r < idx.size(); ++r)
                                 for (std::size_t j = 0; j < d; ++j) g[idx[r] * d + j] += self.grad[r * d + j];
                             });
}

Tensor gather(const Tensor& x, std::span<const std::size_t> index) {
  require_defined(x, "gather");
  if (x.rank() != 2) fail("gather", "expected rank 2, got " + shape_str(x.shape()));
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (index.size() != m) {
    fail("gather", "need one index per row (" + std::to_string(m) + "), got " + std::to_string(index.size()));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (idx[i] >= n) fail("gather", "column " + std::to_string(idx[i]) + " out of range " + std::to_string(n));
    out[i] = x.values()[i * n + idx[i]];
  }
  return Tensor::make_result({m}, std::move(out), {x}, [x, idx = std::move(idx), n](detail::Node& self) {
    auto& g = x.node().grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) g[i * n + idx[i]] += self.grad[i];
  });
}

Tensor select_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_defined(x, "select_rows");
  if (x.rank() != 2) fail("select_rows", "expected rank 2, got " + shape_str(x.shape()));
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> out(idx.size() * n);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= m) fail("select_rows", "row " + std::to_string(idx[r]) + " out of range " + std::to_string(m));
    std::copy_n(x.values().begin() + idx[r] * n, n, out.begin() + r * n);
  }
  const std::size_t count = idx.size();
  return Tensor::make_result({count, n}, std::move(out), {x}, [x, idx = std::move(idx), n](detail::Node& self) {
    auto& g = x.node().grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < n; ++j) g[idx[r] * n + j] += self.grad[r * n + j];
  });
}

Tensor interleave_rows(std::span<const Tensor> parts) {
  if (parts.empty()) fail("interleave_rows", "no inputs");
  for (const auto& p : parts) {
    require_defined(p, "interleave_rows");
    if (p.shape() != parts[0].shape() || p.rank() != 2) {
      fail("interleave_rows", "all parts must share one rank-2 shape; got " + shape_str(p.shape()) + " and " +
                                  shape_str(parts[0].shape()));
    }
  }
  const std::size_t count = parts.size(), m = parts[0].dim(0), n = parts[0].dim(1);
  std::vector<double> out(count * m * n);
  for (std::size_t j = 0; j < count; ++j) {
    const auto v = parts[j].values();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(v.begin() + i * n, n, out.begin() + (i * count + j) * n);
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::make_result({m * count, n}, std::move(out), inputs, [inputs, count, m, n](detail::Node& self) {
    for (std::size_t j = 0; j < count; ++j) {
      if (!wants_grad(inputs[j])) continue;
      auto& g = inputs[j].node().grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t c = 0; c < n; ++c) g[i * n + c] += self.grad[(i * count + j) * n + c];
    }
  });
}

// ---------------------------------------------------------------------------
// Losses

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  require_defined(logits, "cross_entropy");
  if (logits.rank() != 2) fail("cross_entropy", "logits must be rank 2, got " + shape_str(logits.shape()));
  const std::size_t m = logits.dim(0), c = logits.dim(1);
  if (targets.size() != m) {
    fail("cross_entropy", "need " + std::to_string(m) + " targets, got " + std::to_string(targets.size()));
  }
  if (m == 0) fail("cross_entropy", "empty batch");
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  std::vector<double> probs(m * c);
  const auto lv = logits.values();
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (tgt[i] >= c) fail("cross_entropy", "target " + std::to_string(tgt[i]) + " out of range " + std::to_string(c));
    const double mx = *std::max_element(lv.begin() + i * c, lv.begin() + (i + 1) * c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += probs[i * c + j] = std::exp(lv[i * c + j] - mx);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    total += mx + std::log(z) - lv[i * c + tgt[i]];
  }
  return Tensor::make_result({}, {total / static_cast<double>(m)}, {logits},
                             [logits, probs = std::move(probs), tgt = std::move(tgt), m, c](detail::Node& self) {
                               auto& g = logits.node().grad_buffer();
                               const double s = self.grad[0] / static_cast<double>(m);
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < c; ++j)
                                   g[i * c + j] += s * (probs[i * c + j] - (j == tgt[i] ? 1.0 : 0.0));
                             });
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    fail("mse", "shape mismatch " + shape_str(prediction.shape()) + " vs " + shape_str(target.shape()));
  }
  const auto diff = sub(prediction, target);
  return mean(mul(diff, diff));
}

Tensor huber(const Tensor& prediction, const Tensor& target, double delta) {
  require_defined(prediction, "huber");
  require_defined(target, "huber");
  if (prediction.shape() != target.shape()) {
    fail("huber", "shape mismatch " + shape_str(prediction.shape()) + " vs " + shape_str(target.shape()));
  }
  if (!(delta > 0.0)) fail("huber", "delta must be positive");
  const std::size_t n = prediction.size();
  if (n == 0) fail("huber", "empty input");
  const auto pv = prediction.values(), tv = target.values();
  std::vector<double> slope(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = pv[i] - tv[i];
    if (std::abs(r) <= delta) {
      total += 0.5 * r * r;
      slope[i] = r;
    } else {
      total += delta * (std::abs(r) - 0.5 * delta);
      slope[i] = r > 0 ? delta : -delta;
    }
  }
  return Tensor::make_result({}, {total / static_cast<double>(n)}, {prediction, target},
                             [prediction, target, slope = std::move(slope)](detail::Node& self) {
                               const double s = self.grad[0] / static_cast<double>(slope.size());
                               if (wants_grad(prediction)) {
                                 auto& g = prediction.node().grad_buffer();
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * slope[i];
                               }
                               if (wants_grad(target)) {
                                 auto& g = target.node().grad_buffer();
                                 for (std::size_t i = 0; i < g.size(); ++i) g[i] -= s * slope[i];
                               }
                             });
}

// ---------------------------------------------------------------------------
// Attention

Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t seq_len, std::size_t heads) {
  require_defined(q, "causal_attention");
  require_defined(k, "causal_attention");
  require_defined(v, "causal_attention");
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    fail("causal_attention", "q/k/v must share a rank-2 shape; got " + shape_str(q.shape()) + ", " +
                                 shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const std::size_t rows = q.dim(0), d = q.dim(1);
  if (seq_len == 0 || rows % seq_len != 0) {
    fail("causal_attention", std::to_string(rows) + " rows do not split into sequences of " + std::to_string(seq_len));
  }
  if (heads == 0 || d % heads != 0) {
    fail("causal_attention", "width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t batch = rows / seq_len, dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto qv = q.values(), kv = k.values(), vv = v.values();

  // probs[(b*heads + h)*L*L + i*L + j], zero for j > i
  std::vector<double> probs(batch * heads * seq_len * seq_len, 0.0);
  std::vector<double> out(rows * d, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* p = probs.data() + (b * heads + h) * seq_len * seq_len;
      for (std::size_t i = 0; i < seq_len; ++i) {
        const double* qi = qv.data() + (b * seq_len + i) * d + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          const double* kj = kv.data() + (b * seq_len + j) * d + h * dh;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          p[i * seq_len + j] = s * inv_scale;
          mx = std::max(mx, p[i * seq_len + j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j <= i; ++j) z += p[i * seq_len + j] = std::exp(p[i * seq_len + j] - mx);
        double* oi = out.data() + (b * seq_len + i) * d + h * dh;
        for (std::size_t j = 0; j <= i; ++j) {
          p[i * seq_len + j] /= z;
          const double* vj = vv.data() + (b * seq_len + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) oi[c] += p[i * seq_len + j] * vj[c];
        }
      }
    }
  }

  return Tensor::make_result(
      q.shape(), std::move(out), {q, k, v},
      [q, k, v, probs = std::move(probs), batch, heads, seq_len, d, dh, inv_scale](detail::Node& self) {
        const auto& dout = self.grad;
        const auto& qv = q.node().value;
        const auto& kv = k.node().value;
        const auto& vv = v.node().value;
        std::vector<double>& gq = q.node().grad_buffer();
        std::vector<double>& gk = k.node().grad_buffer();
        std::vector<double>& gv = v.node().grad_buffer();
        std::vector<double> dp(seq_len);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const double* p = probs.data() + (b * heads + h) * seq_len * seq_len;
            for (std::size_t i = 0; i < seq_len; ++i) {
              const double* doi = dout.data() + (b * seq_len + i) * d + h * dh;
              double dot = 0.0;
              for (std::size_t j = 0; j <= i; ++j) {
                const double* vj = vv.data() + (b * seq_len + j) * d + h * dh;
                double* gvj = gv.data() + (b * seq_len + j) * d + h * dh;
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                  s += doi[c] * vj[c];
                  gvj[c] += p[i * seq_len + j] * doi[c];
                }
                dp[j] = s;
                dot += s * p[i * seq_len + j];
              }
              const double* qi = qv.data() + (b * seq_len + i) * d + h * dh;
              double* gqi = gq.data() + (b * seq_len + i) * d + h * dh;
              for (std::size_t j = 0; j <= i; ++j) {
                const double ds = p[i * seq_len + j] * (dp[j] - dot) * inv_scale;
                const double* kj = kv.data() + (b * seq_len + j) * d + h * dh;
                double* gkj = gk.data() + (b * seq_len + j) * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) {
                  gqi[c] += ds * kj[c];
                  gkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      });
}

}  // namespace mrolab::tensor
