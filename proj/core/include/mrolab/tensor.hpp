#pragma once

// Reverse-mode automatic differentiation over dense row-major float64 tensors.
//
// Every op builds a node in a dynamic graph; Tensor::backward() on a scalar
// walks the graph in reverse topological order and accumulates exact
// gradients into every reachable tensor created with requires_grad.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrolab::tensor {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const { return values().size(); }
  std::size_t dim(std::size_t axis) const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();
  void clear_grad();

  // Root must hold exactly one element.
  void backward() const;

  // Same values, cut from the graph.
  Tensor detach() const;

  // Identity of the underlying storage (used by optimizers and checks).
  const void* id() const { return node_.get(); }

  // Internal: used by op implementations.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward);
  detail::Node& node() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// ---------------------------------------------------------------------------
// Elementwise and linear algebra

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// Same shape, or b of shape [n] broadcast over the rows of a [m,n].
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor relu(const Tensor& x);
// Exact (erf-based) GELU.
Tensor gelu(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

// ---------------------------------------------------------------------------
// Row-structured ops; "last axis" means columns of a rank-2 tensor (or the
// only axis of a rank-1 tensor).

// x [m,n], gamma [n], beta [n]
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor softmax(const Tensor& x);
// [m,n] -> [m]; [n] -> scalar
Tensor logsumexp(const Tensor& x);
// table [V,d] -> [indices.size(), d]
Tensor embedding(const Tensor& table, std::span<const std::size_t> indices);
// x [m,n] -> [m] with out[i] = x[i, index[i]]
Tensor gather(const Tensor& x, std::span<const std::size_t> index);
// x [m,n] -> [rows.size(), n]
Tensor select_rows(const Tensor& x, std::span<const std::size_t> rows);
// parts: P tensors of shape [m,n] -> [m*P, n], out row i*P + j = parts[j] row i
Tensor interleave_rows(std::span<const Tensor> parts);

// ---------------------------------------------------------------------------
// Losses (all return scalars averaged over rows / elements)

// logits [m,C], targets in [0,C)
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);
Tensor mse(const Tensor& prediction, const Tensor& target);
Tensor huber(const Tensor& prediction, const Tensor& target, double delta = 1.0);

// ---------------------------------------------------------------------------
// Attention

// q, k, v: [B*L, d] holding B independent sequences of length seq_len.
// Scaled dot-product attention with a causal mask inside each sequence;
// d is split evenly across heads.
Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        std::size_t seq_len, std::size_t heads = 1);

}  // namespace mrolab::tensor
