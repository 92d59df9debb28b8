#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major double
// matrices. A Var is a handle to a graph node; operations build the graph
// while grad mode is on and at least one input requires a gradient.
// backward() consumes the graph: intermediate gradients and edges are freed
// afterwards, leaf gradients accumulate until zeroed.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "styletalk/core.hpp"

namespace styletalk::ag {

using Matrix = MatrixD;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows in
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  template <typename Expr>
  void accumulate(const Expr& g) {
    if (grad.size() == 0)
      grad = g;
    else
      grad += g;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double item() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled();

/// Disables graph construction for its lifetime (inference, frozen critics).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates to every leaf.
void backward(const Var& root);

/// Same value, no history.
Var detach(const Var& x);

// --- linear algebra -------------------------------------------------------
Var matmul(const Var& a, const Var& b);
/// x * W + b, with b a 1 x out row broadcast over rows (b may be undefined).
Var linear(const Var& x, const Var& w, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Index rows, Index cols);

// --- elementwise ----------------------------------------------------------
// Binary ops accept equal shapes, a 1 x C row broadcast, or a 1 x 1 scalar as rhs.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var abs(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// --- reductions -----------------------------------------------------------
Var sum(const Var& a);
Var mean(const Var& a);
Var row_sum(const Var& a);
/// Frobenius norm as a 1x1.
Var norm2(const Var& a);

// --- structure ------------------------------------------------------------
Var gather_rows(const Var& a, std::span<const int> rows);
Var gather_cols(const Var& a, std::span<const int> cols);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
/// Rows [g*group, (g+1)*group) reduced by max / mean for every g.
Var group_max_rows(const Var& a, Index group);
Var group_mean_rows(const Var& a, Index group);

// --- neural-network primitives --------------------------------------------
Var softmax_rows(const Var& a);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

/// Multi-head scaled dot-product attention over independent groups. Rows of q
/// come in groups of `q_group`, rows of k and v in groups of `k_group`; group g
/// of q attends only to group g of k/v. Columns are split evenly over heads.
Var grouped_attention(const Var& q, const Var& k, const Var& v, int heads, Index q_group,
                      Index k_group);

/// 1-D im2col: (T x C) -> (T_out x kernel*C), zero padding on both ends.
Var unfold1d(const Var& x, int kernel, int stride, int pad);

/// Mean over every win x win window that fits entirely inside the matrix.
Var box_filter(const Var& x, int win);

/// Per-row cosine a_r . b_r / max(|a_r| |b_r|, eps), as a column vector.
Var row_cosine(const Var& a, const Var& b, double eps);

}  // namespace styletalk::ag
