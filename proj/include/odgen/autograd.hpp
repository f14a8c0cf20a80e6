#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major matrices.
//
// Every value is a 2-D matrix. Edge-level tensors of shape N x N x C are stored as (N*N) x C
// with row index i*N + j. A graph is recorded while grad mode is enabled and at least one
// input requires a gradient; backward() walks it once in reverse topological order.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace odgen::ag {

using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Tensor&)> backward_fn;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const { return node_->value(0, 0); }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled();

// Disables graph recording for its lifetime (sampling, evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var constant(Tensor value);
// A leaf that accumulates gradients (a trainable parameter).
Var leaf(Tensor value);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// a (n x c) + b (1 x c), broadcast over rows.
Var add_row(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);

Var silu(const Var& a);
Var leaky_relu(const Var& a, double slope);

// Row-wise layer normalization with affine gamma, beta (both 1 x c).
Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);
Var softmax_rows(const Var& a);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
// out.row(r) = a.row(index[r]); gradients scatter-add back.
Var gather_rows(const Var& a, std::vector<int> index);
// Row-major reshape.
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
// (n x c, n x c) -> n x 1 of per-row dot products.
Var rowwise_dot(const Var& a, const Var& b);
// a (n x c) scaled row by row with w (n x 1).
Var mul_col(const Var& a, const Var& w);
// (n x 1, m x 1) -> n x m with out(i, j) = a(i) + b(j).
Var outer_sum(const Var& a, const Var& b);
// 1 x c column means.
Var mean_rows(const Var& a);
Var sum_all(const Var& a);

// Mean over rows of -log softmax(logits)[row, target[row]].
Var cross_entropy_rows(const Var& logits, std::span<const int> target);
// sum(mask * (pred - target)^2) / sum(mask); pred, target, mask all n x 1 (target and mask constant).
Var masked_mse(const Var& pred, const Tensor& target, const Tensor& mask);

// Accumulates d(root)/d(x) into every reachable node that requires a gradient.
void backward(const Var& root);

}  // namespace odgen::ag
