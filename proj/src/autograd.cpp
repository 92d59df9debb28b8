#include "styletalk/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

namespace styletalk::ag {

namespace {

thread_local bool g_grad_enabled = true;

Var make_op(Matrix value, std::initializer_list<const Var*> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool need = false;
  if (g_grad_enabled)
    for (const Var* in : inputs) need = need || in->requires_grad();
  if (need) {
    node->requires_grad = true;
    for (const Var* in : inputs) node->parents.push_back(in->shared());
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

Var make_op_n(Matrix value, const std::vector<Var>& inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool need = false;
  if (g_grad_enabled)
    for (const Var& in : inputs) need = need || in.requires_grad();
  if (need) {
    node->requires_grad = true;
    for (const Var& in : inputs) node->parents.push_back(in.shared());
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

enum class Broadcast { kSame, kRow, kScalar };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  throw ContractError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
}

Matrix expand(const Matrix& b, Broadcast kind, Index rows, Index cols) {
  switch (kind) {
    case Broadcast::kSame:
      return b;
    case Broadcast::kRow:
      return b.replicate(rows, 1);
    case Broadcast::kScalar:
      return Matrix::Constant(rows, cols, b(0, 0));
  }
  return b;
}

// Sums a full-size gradient back down to the broadcast operand's shape.
Matrix reduce_to(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::kSame:
      return g;
    case Broadcast::kRow:
      return g.colwise().sum();
    case Broadcast::kScalar:
      return Matrix::Constant(1, 1, g.sum());
  }
  return g;
}

}  // namespace

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::scalar(double v) { return Var(Matrix::Constant(1, 1, v)); }

double Var::item() const {
  require(node_ && value().size() == 1, "item() needs a 1x1 value");
  return value()(0, 0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void backward(const Var& root) {
  require(root.defined() && root.value().size() == 1, "backward() needs a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() > 0) n->backward(*n);
  }
  // Interior nodes are single use: release their gradients and edges.
  for (Node* n : order) {
    if (n->backward) {
      n->grad.resize(0, 0);
      n->parents.clear();
      n->backward = nullptr;
    }
  }
}

Var detach(const Var& x) { return Var(x.value()); }

// --- linear algebra -------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + ")");
  Matrix out = a.value() * b.value();
  return make_op(std::move(out), {&a, &b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate(self.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * self.grad);
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require(x.cols() == w.rows(), "linear: input width " + std::to_string(x.cols()) +
                                    " does not match weight rows " + std::to_string(w.rows()));
  Matrix out = x.value() * w.value();
  if (!b.defined()) {
    return make_op(std::move(out), {&x, &w}, [](Node& self) {
      Node& px = *self.parents[0];
      Node& pw = *self.parents[1];
      if (px.requires_grad) px.accumulate(self.grad * pw.value.transpose());
      if (pw.requires_grad) pw.accumulate(px.value.transpose() * self.grad);
    });
  }
  require(b.rows() == 1 && b.cols() == w.cols(), "linear: bias must be 1 x out");
  out.rowwise() += b.value().row(0);
  return make_op(std::move(out), {&x, &w, &b}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    Node& pb = *self.parents[2];
    if (px.requires_grad) px.accumulate(self.grad * pw.value.transpose());
    if (pw.requires_grad) pw.accumulate(px.value.transpose() * self.grad);
    if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
  });
}

Var transpose(const Var& a) {
  Matrix out = a.value().transpose();
  return make_op(std::move(out), {&a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad) pa.accumulate(self.grad.transpose());
  });
}

Var reshape(const Var& a, Index rows, Index cols) {
  require(rows * cols == a.value().size(), "reshape: element count changes");
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const Index r0 = a.rows(), c0 = a.cols();
  return make_op(std::move(out), {&a}, [r0, c0](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad) pa.accumulate(Eigen::Map<const Matrix>(self.grad.data(), r0, c0));
  });
}

// --- elementwise ----------------------------------------------------------

Var add(const Var& a, const Var& b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "add");
  Matrix out = a.value() + expand(b.value(), kind, a.rows(), a.cols());
  return make_op(std::move(out), {&a, &b}, [kind](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate(self.grad);
    if (pb.requires_grad) pb.accumulate(reduce_to(self.grad, kind));
  });
}

Var sub(const Var& a, const Var& b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "sub");
  Matrix out = a.value() - expand(b.value(), kind, a.rows(), a.cols());
  return make_op(std::move(out), {&a, &b}, [kind](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate(self.grad);
    if (pb.requires_grad) pb.accumulate(-reduce_to(self.grad, kind));
  });
}

Var mul(const Var& a, const Var& b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "mul");
  Matrix out = a.value().cwiseProduct(expand(b.value(), kind, a.rows(), a.cols()));
  return make_op(std::move(out), {&a, &b}, [kind](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad)
      pa.accumulate(self.grad.cwiseProduct(expand(pb.value, kind, pa.value.rows(), pa.value.cols())));
    if (pb.requires_grad) pb.accumulate(reduce_to(self.grad.cwiseProduct(pa.value), kind));
  });
}

Var div(const Var& a, const Var& b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "div");
  Matrix bf = expand(b.value(), kind, a.rows(), a.cols());
  Matrix out = a.value().cwiseQuotient(bf);
  return make_op(std::move(out), {&a, &b}, [kind, bf](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate(self.grad.cwiseQuotient(bf));
    if (pb.requires_grad)
      pb.accumulate(reduce_to(-self.grad.cwiseProduct(self.value).cwiseQuotient(bf), kind));
  });
}

Var scale(const Var& a, double s) {
  Matrix out = a.value() * s;
  return make_op(std::move(out), {&a}, [s](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad) pa.accumulate(self.grad * s);
  });
}

Var add_scalar(const Var& a, double s) {
  Matrix out = a.value().array() + s;
  return make_op(std::move(out), {&a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad) pa.accumulate(self.grad);
  });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_op(std::move(out), {&a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad)
      pa.accumulate((pa.value.array() > 0.0).select(self.grad, 0.0).matrix());
  });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix out = (a.value().array() > 0.0).select(a.value(), a.value() * slope);
  return make_op(std::move(out), {&a}, [slope](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad)
      pa.accumulate((pa.value.array() > 0.0).select(self.grad, self.grad * slope).matrix());
  });
}

Var abs(const Var& a) {
  Matrix out = a.value().cwiseAbs();
  return make_op(std::move(out), {&a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad) pa.accumulate(self.grad.cwiseProduct(pa.value.cwiseSign()));
  });
}

Var log(const Var& a) {
  Matrix out = a.value().array().log();
  return make_op(std::move(out), {&a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad) pa.accumulate(self.grad.cwiseQuotient(pa.value));
  });
}

Var sqrt(const Var& a) {
  Matrix out = a.value().cwiseSqrt();
  return make_op(std::move(out), {&a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad) pa.accumulate((0.5 * self.grad.array() / self.value.array()).matrix());
  });
}

Var square(const Var& a) {
  Matrix out = a.value().cwiseAbs2();
  return make_op(std::move(out), {&a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad) pa.accumulate(2.0 * self.grad.cwiseProduct(pa.value));
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make_op(std::move(out), {&a}, [lo, hi](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad)
      pa.accumulate(
          ((pa.value.array() >= lo) && (pa.value.array() <= hi)).select(self.grad, 0.0).matrix());
  });
}

// --- reductions -----------------------------------------------------------

Var sum(const Var& a) {
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  return make_op(std::move(out), {&a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad) pa.accumulate(Matrix::Constant(pa.value.rows(), pa.value.cols(), self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  require(n > 0, "mean of an empty matrix");
  Matrix out = Matrix::Constant(1, 1, a.value().sum() / n);
  return make_op(std::move(out), {&a}, [n](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad)
      pa.accumulate(Matrix::Constant(pa.value.rows(), pa.value.cols(), self.grad(0, 0) / n));
  });
}

Var row_sum(const Var& a) {
  Matrix out = a.value().rowwise().sum();
  return make_op(std::move(out), {&a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (pa.requires_grad) pa.accumulate(self.grad.replicate(1, pa.value.cols()));
  });
}

Var norm2(const Var& a) {
  const double n = a.value().norm();
  return make_op(Matrix::Constant(1, 1, n), {&a}, [n](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    if (n > 0.0)
      pa.accumulate(pa.value * (self.grad(0, 0) / n));
    else
      pa.accumulate(Matrix::Zero(pa.value.rows(), pa.value.cols()));
  });
}

// --- structure ------------------------------------------------------------

Var gather_rows(const Var& a, std::span<const int> rows) {
  std::vector<int> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(idx[i]);
  }
  return make_op(std::move(out), {&a}, [idx = std::move(idx)](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    Matrix g = Matrix::Zero(pa.value.rows(), pa.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Index>(i));
    pa.accumulate(g);
  });
}

Var gather_cols(const Var& a, std::span<const int> cols) {
  std::vector<int> idx(cols.begin(), cols.end());
  Matrix out(a.rows(), static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < a.cols(), "gather_cols: index out of range");
    out.col(static_cast<Index>(i)) = a.value().col(idx[i]);
  }
  return make_op(std::move(out), {&a}, [idx = std::move(idx)](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    Matrix g = Matrix::Zero(pa.value.rows(), pa.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.col(idx[i]) += self.grad.col(static_cast<Index>(i));
    pa.accumulate(g);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == parts[0].rows(), "concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(parts[0].rows(), cols);
  Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_op_n(std::move(out), parts, [](Node& self) {
    Index c0 = 0;
    for (auto& p : self.parents) {
      const Index w = p->value.cols();
      if (p->requires_grad) p->accumulate(self.grad.middleCols(c0, w));
      c0 += w;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Index rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == parts[0].cols(), "concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, parts[0].cols());
  Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_op_n(std::move(out), parts, [](Node& self) {
    Index r0 = 0;
    for (auto& p : self.parents) {
      const Index h = p->value.rows();
      if (p->requires_grad) p->accumulate(self.grad.middleRows(r0, h));
      r0 += h;
    }
  });
}

Var group_max_rows(const Var& a, Index group) {
  require(group > 0 && a.rows() % group == 0, "group_max_rows: rows not divisible by group");
  const Index groups = a.rows() / group, cols = a.cols();
  Matrix out(groups, cols);
  std::vector<Index> arg(static_cast<std::size_t>(groups * cols));
  for (Index g = 0; g < groups; ++g)
    for (Index c = 0; c < cols; ++c) {
      Index best = g * group;
      for (Index r = g * group + 1; r < (g + 1) * group; ++r)
        if (a.value()(r, c) > a.value()(best, c)) best = r;
      out(g, c) = a.value()(best, c);
      arg[static_cast<std::size_t>(g * cols + c)] = best;
    }
  return make_op(std::move(out), {&a}, [arg = std::move(arg)](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    Matrix g = Matrix::Zero(pa.value.rows(), pa.value.cols());
    const Index cols = self.value.cols();
    for (Index gi = 0; gi < self.value.rows(); ++gi)
      for (Index c = 0; c < cols; ++c) g(arg[static_cast<std::size_t>(gi * cols + c)], c) += self.grad(gi, c);
    pa.accumulate(g);
  });
}

Var group_mean_rows(const Var& a, Index group) {
  require(group > 0 && a.rows() % group == 0, "group_mean_rows: rows not divisible by group");
  const Index groups = a.rows() / group;
  Matrix out(groups, a.cols());
  for (Index g = 0; g < groups; ++g) out.row(g) = a.value().middleRows(g * group, group).colwise().mean();
  return make_op(std::move(out), {&a}, [group](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    Matrix g(pa.value.rows(), pa.value.cols());
    for (Index gi = 0; gi < self.value.rows(); ++gi)
      g.middleRows(gi * group, group) = (self.grad.row(gi) / static_cast<double>(group)).replicate(group, 1);
    pa.accumulate(g);
  });
}

// --- neural-network primitives --------------------------------------------

Var softmax_rows(const Var& a) {
  Matrix out(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    const double m = a.value().row(r).maxCoeff();
    out.row(r) = (a.value().row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return make_op(std::move(out), {&a}, [](Node& self) {
    Node& pa = *self.parents[0];
    if (!pa.requires_grad) return;
    Eigen::VectorXd dots = self.grad.cwiseProduct(self.value).rowwise().sum();
    Matrix g = self.value.cwiseProduct(self.grad - dots.replicate(1, self.value.cols()));
    pa.accumulate(g);
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require(gamma.rows() == 1 && gamma.cols() == x.cols(), "layer_norm: gamma must be 1 x width");
  require(beta.rows() == 1 && beta.cols() == x.cols(), "layer_norm: beta must be 1 x width");
  const Index rows = x.rows(), cols = x.cols();
  Matrix xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Index r = 0; r < rows; ++r) {
    const double mu = x.value().row(r).mean();
    const double var = (x.value().row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.value().row(r).array() - mu) * inv_std(r);
  }
  Matrix out = xhat.array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return make_op(std::move(out), {&x, &gamma, &beta},
                 [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                   Node& px = *self.parents[0];
                   Node& pg = *self.parents[1];
                   Node& pb = *self.parents[2];
                   if (pg.requires_grad) pg.accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
                   if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
                   if (!px.requires_grad) return;
                   Matrix dxhat = self.grad.array().rowwise() * pg.value.row(0).array();
                   Matrix g(dxhat.rows(), dxhat.cols());
                   for (Index r = 0; r < dxhat.rows(); ++r) {
                     const double m1 = dxhat.row(r).mean();
                     const double m2 = dxhat.row(r).dot(xhat.row(r)) / static_cast<double>(dxhat.cols());
                     g.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r);
                   }
                   px.accumulate(g);
                 });
}

Var grouped_attention(const Var& q, const Var& k, const Var& v, int heads, Index q_group,
                      Index k_group) {
  require(heads > 0 && q.cols() % heads == 0, "attention: width not divisible by heads");
  require(k.cols() == q.cols() && v.cols() == q.cols(), "attention: q/k/v widths differ");
  require(q_group > 0 && k_group > 0 && q.rows() % q_group == 0, "attention: bad query grouping");
  const Index groups = q.rows() / q_group;
  require(k.rows() == groups * k_group && v.rows() == k.rows(),
          "attention: key/value rows do not match query groups");
  const Index dh = q.cols() / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();

  Matrix out(q.rows(), q.cols());
  Matrix probs(groups * heads * q_group, k_group);
  Matrix s(q_group, k_group);
  for (Index g = 0; g < groups; ++g)
    for (int h = 0; h < heads; ++h) {
      s.noalias() = Q.block(g * q_group, h * dh, q_group, dh) * K.block(g * k_group, h * dh, k_group, dh).transpose();
      s *= sc;
      for (Index r = 0; r < q_group; ++r) {
        const double m = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - m).exp().matrix();
        s.row(r) /= s.row(r).sum();
      }
      probs.middleRows((g * heads + h) * q_group, q_group) = s;
      out.block(g * q_group, h * dh, q_group, dh).noalias() = s * V.block(g * k_group, h * dh, k_group, dh);
    }

  return make_op(std::move(out), {&q, &k, &v},
                 [probs = std::move(probs), heads, q_group, k_group, dh, sc](Node& self) {
                   Node& pq = *self.parents[0];
                   Node& pk = *self.parents[1];
                   Node& pv = *self.parents[2];
                   const Matrix& Q = pq.value;
                   const Matrix& K = pk.value;
                   const Matrix& V = pv.value;
                   const Index groups = Q.rows() / q_group;
                   Matrix dq = Matrix::Zero(Q.rows(), Q.cols());
                   Matrix dk = Matrix::Zero(K.rows(), K.cols());
                   Matrix dv = Matrix::Zero(V.rows(), V.cols());
                   Matrix da(q_group, k_group), ds(q_group, k_group);
                   for (Index g = 0; g < groups; ++g)
                     for (int h = 0; h < heads; ++h) {
                       const auto a = probs.middleRows((g * heads + h) * q_group, q_group);
                       const auto go = self.grad.block(g * q_group, h * dh, q_group, dh);
                       if (pv.requires_grad)
                         dv.block(g * k_group, h * dh, k_group, dh).noalias() += a.transpose() * go;
                       da.noalias() = go * V.block(g * k_group, h * dh, k_group, dh).transpose();
                       const Eigen::VectorXd dots = da.cwiseProduct(a).rowwise().sum();
                       ds = a.cwiseProduct(da - dots.replicate(1, k_group)) * sc;
                       if (pq.requires_grad)
                         dq.block(g * q_group, h * dh, q_group, dh).noalias() +=
                             ds * K.block(g * k_group, h * dh, k_group, dh);
                       if (pk.requires_grad)
                         dk.block(g * k_group, h * dh, k_group, dh).noalias() +=
                             ds.transpose() * Q.block(g * q_group, h * dh, q_group, dh);
                     }
                   if (pq.requires_grad) pq.accumulate(dq);
                   if (pk.requires_grad) pk.accumulate(dk);
                   if (pv.requires_grad) pv.accumulate(dv);
                 });
}

Var unfold1d(const Var& x, int kernel, int stride, int pad) {
  require(kernel > 0 && stride > 0 && pad >= 0, "unfold1d: bad geometry");
  const Index t_in = x.rows(), ch = x.cols();
  require(t_in + 2 * pad >= kernel, "unfold1d: sequence shorter than kernel");
  const Index t_out = (t_in + 2 * pad - kernel) / stride + 1;
  Matrix out = Matrix::Zero(t_out, kernel * ch);
  for (Index t = 0; t < t_out; ++t)
    for (int j = 0; j < kernel; ++j) {
      const Index src = t * stride - pad + j;
      if (src >= 0 && src < t_in) out.block(t, j * ch, 1, ch) = x.value().row(src);
    }
  return make_op(std::move(out), {&x}, [kernel, stride, pad](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    const Index t_in = px.value.rows(), ch = px.value.cols();
    Matrix g = Matrix::Zero(t_in, ch);
    for (Index t = 0; t < self.value.rows(); ++t)
      for (int j = 0; j < kernel; ++j) {
        const Index src = t * stride - pad + j;
        if (src >= 0 && src < t_in) g.row(src) += self.grad.block(t, j * ch, 1, ch);
      }
    px.accumulate(g);
  });
}

Var box_filter(const Var& x, int win) {
  require(win > 0 && x.rows() >= win && x.cols() >= win, "box_filter: window larger than input");
  const Index ro = x.rows() - win + 1, co = x.cols() - win + 1;
  const double inv = 1.0 / (static_cast<double>(win) * win);
  // Separable: column sums over `win` rows, then row sums over `win` columns.
  const Matrix& X = x.value();
  Matrix vert(ro, X.cols());
  for (Index r = 0; r < ro; ++r) vert.row(r) = X.middleRows(r, win).colwise().sum();
  Matrix out(ro, co);
  for (Index c = 0; c < co; ++c) out.col(c) = vert.middleCols(c, win).rowwise().sum() * inv;
  return make_op(std::move(out), {&x}, [win, inv](Node& self) {
    Node& px = *self.parents[0];
    if (!px.requires_grad) return;
    const Index ro = self.value.rows(), co = self.value.cols();
    Matrix gv = Matrix::Zero(ro, px.value.cols());
    for (Index c = 0; c < co; ++c) gv.middleCols(c, win).colwise() += self.grad.col(c) * inv;
    Matrix g = Matrix::Zero(px.value.rows(), px.value.cols());
    for (Index r = 0; r < ro; ++r) g.middleRows(r, win).rowwise() += gv.row(r);
    px.accumulate(g);
  });
}

Var row_cosine(const Var& a, const Var& b, double eps) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "row_cosine: shapes differ");
  const Index rows = a.rows();
  Matrix out(rows, 1);
  Eigen::VectorXd na(rows), nb(rows), den(rows);
  for (Index r = 0; r < rows; ++r) {
    na(r) = a.value().row(r).norm();
    nb(r) = b.value().row(r).norm();
    den(r) = std::max(na(r) * nb(r), eps);
    out(r, 0) = a.value().row(r).dot(b.value().row(r)) / den(r);
  }
  return make_op(std::move(out), {&a, &b}, [na, nb, den, eps](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Index rows = self.value.rows();
    Matrix ga(pa.value.rows(), pa.value.cols()), gb(pb.value.rows(), pb.value.cols());
    for (Index r = 0; r < rows; ++r) {
      const double g = self.grad(r, 0), c = self.value(r, 0);
      if (na(r) * nb(r) > eps) {
        ga.row(r) = g * (pb.value.row(r) / den(r) - c * pa.value.row(r) / (na(r) * na(r)));
        gb.row(r) = g * (pa.value.row(r) / den(r) - c * pb.value.row(r) / (nb(r) * nb(r)));
      } else {
        ga.row(r) = g * pb.value.row(r) / eps;
        gb.row(r) = g * pa.value.row(r) / eps;
      }
    }
    if (pa.requires_grad) pa.accumulate(ga);
    if (pb.requires_grad) pb.accumulate(gb);
  });
}

}  // namespace styletalk::ag
