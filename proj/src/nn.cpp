#include "styletalk/nn.hpp"

#include <cmath>

namespace styletalk::nn {

Var ParamStore::create(const std::string& name, Matrix init) {
  const std::string full = prefix_.empty() ? name : prefix_ + "." + name;
  require(!index_->count(full), "duplicate parameter name " + full);
  Var v(std::move(init), true);
  index_->emplace(full, entries_->size());
  entries_->push_back({full, v});
  return v;
}

ParamStore ParamStore::scoped(const std::string& sub) const {
  return ParamStore(prefix_.empty() ? sub : prefix_ + "." + sub, entries_, index_);
}

std::vector<Var> ParamStore::vars() const {
  std::vector<Var> out;
  out.reserve(entries_->size());
  for (const auto& e : *entries_) out.push_back(e.var);
  return out;
}

const Var* ParamStore::find(const std::string& name) const {
  auto it = index_->find(name);
  return it == index_->end() ? nullptr : &(*entries_)[it->second].var;
}

std::int64_t ParamStore::numel() const {
  std::int64_t n = 0;
  for (const auto& e : *entries_) n += e.var.value().size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : *entries_) e.var.zero_grad();
}

void ParamStore::set_trainable(bool on) {
  for (auto& e : *entries_) {
    e.var.set_requires_grad(on);
    if (!on) e.var.zero_grad();
  }
}

void ParamStore::copy_values_from(const ParamStore& other) {
  for (auto& e : *entries_) {
    const Var* src = other.find(e.name);
    if (!src) throw CheckpointError(e.name, "missing in source");
    if (src->rows() != e.var.rows() || src->cols() != e.var.cols())
      throw CheckpointError(e.name, "shape mismatch");
    e.var.mutable_value() = src->value();
  }
}

Matrix xavier_uniform(Index rows, Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix normal_matrix(Index rows, Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix sinusoidal_positions(Index n, Index dim) {
  Matrix pe(n, dim);
  for (Index pos = 0; pos < n; ++pos)
    for (Index i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
    }
  return pe;
}

Linear::Linear(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng, bool bias) {
  weight_ = store.create(name + ".weight", xavier_uniform(in, out, rng));
  if (bias) bias_ = store.create(name + ".bias", Matrix::Zero(1, out));
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, Index dim) {
  gamma_ = store.create(name + ".gamma", Matrix::Ones(1, dim));
  beta_ = store.create(name + ".beta", Matrix::Zero(1, dim));
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& name, Index dim, int heads,
                                       Rng& rng)
    : q_(store, name + ".q", dim, dim, rng),
      k_(store, name + ".k", dim, dim, rng),
      v_(store, name + ".v", dim, dim, rng),
      o_(store, name + ".o", dim, dim, rng),
      heads_(heads) {
  require(heads > 0 && dim % heads == 0, "attention width must be divisible by the head count");
}

Var MultiHeadAttention::operator()(const Var& query, const Var& memory, Index q_group, Index k_group) const {
  return o_(ag::grouped_attention(q_(query), k_(memory), v_(memory), heads_, q_group, k_group));
}

FeedForward::FeedForward(ParamStore& store, const std::string& name, Index dim, Index hidden, Rng& rng)
    : fc1_(store, name + ".fc1", dim, hidden, rng), fc2_(store, name + ".fc2", hidden, dim, rng) {}

EncoderLayer::EncoderLayer(ParamStore& store, const std::string& name, Index dim, int heads, Index hidden,
                           Rng& rng)
    : norm1_(store, name + ".norm1", dim),
      norm2_(store, name + ".norm2", dim),
      attn_(store, name + ".attn", dim, heads, rng),
      ffn_(store, name + ".ffn", dim, hidden, rng) {}

Var EncoderLayer::operator()(const Var& x, Index group) const {
  Var h = norm1_(x);
  Var y = ag::add(x, attn_(h, h, group, group));
  return ag::add(y, ffn_(norm2_(y)));
}

Conv1d::Conv1d(ParamStore& store, const std::string& name, Index in, Index out, int kernel, int stride,
               int pad, Rng& rng)
    : lin_(store, name, in * kernel, out, rng), kernel_(kernel), stride_(stride), pad_(pad) {}

Adam::Adam(std::vector<Var> params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
  for (const Var& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (p.grad().size() == 0) {
      m_[i] *= opts_.beta1;
      v_[i] *= opts_.beta2;
    } else {
      m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * p.grad();
      v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * p.grad().cwiseAbs2();
    }
    p.mutable_value().array() -=
        opts_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + opts_.eps);
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (Var& p : params_) p.zero_grad();
}

}  // namespace styletalk::nn
