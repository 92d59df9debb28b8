#pragma once

// Parameter storage, layers and the Adam optimizer built on the autograd core.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "styletalk/autograd.hpp"

namespace styletalk::nn {

using ag::Index;
using ag::Matrix;
using ag::Var;
using Rng = std::mt19937_64;

/// Named, ordered collection of trainable tensors.
class ParamStore {
 public:
  explicit ParamStore(std::string prefix = "") : prefix_(std::move(prefix)) {}

  Var create(const std::string& name, Matrix init);
  ParamStore scoped(const std::string& sub) const;

  struct Entry {
    std::string name;
    Var var;
  };
  const std::vector<Entry>& entries() const { return *entries_; }
  std::vector<Var> vars() const;
  const Var* find(const std::string& name) const;
  std::int64_t numel() const;
  void zero_grad();
  /// Frozen tensors take no part in gradient computation.
  void set_trainable(bool on);

  /// Copies every tensor value from `other` (same names and shapes required).
  void copy_values_from(const ParamStore& other);

 private:
  ParamStore(std::string prefix, std::shared_ptr<std::vector<Entry>> entries,
             std::shared_ptr<std::map<std::string, std::size_t>> index)
      : prefix_(std::move(prefix)), entries_(std::move(entries)), index_(std::move(index)) {}

  std::string prefix_;
  std::shared_ptr<std::vector<Entry>> entries_ = std::make_shared<std::vector<Entry>>();
  std::shared_ptr<std::map<std::string, std::size_t>> index_ =
      std::make_shared<std::map<std::string, std::size_t>>();
};

Matrix xavier_uniform(Index rows, Index cols, Rng& rng);
Matrix normal_matrix(Index rows, Index cols, double stddev, Rng& rng);

/// Standard sinusoidal position table, one row per position.
Matrix sinusoidal_positions(Index n, Index dim);

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng, bool bias = true);
  Var operator()(const Var& x) const { return ag::linear(x, weight_, bias_); }
  const Var& weight() const { return weight_; }
  const Var& bias() const { return bias_; }
  Var& mutable_weight() { return weight_; }

 private:
  Var weight_;  // in x out
  Var bias_;    // 1 x out
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, Index dim);
  Var operator()(const Var& x) const { return ag::layer_norm(x, gamma_, beta_); }

 private:
  Var gamma_, beta_;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& name, Index dim, int heads, Rng& rng);
  Var operator()(const Var& query, const Var& memory, Index q_group, Index k_group) const;

 private:
  Linear q_, k_, v_, o_;
  int heads_ = 1;
};

class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParamStore& store, const std::string& name, Index dim, Index hidden, Rng& rng);
  Var operator()(const Var& x) const { return fc2_(ag::relu(fc1_(x))); }

 private:
  Linear fc1_, fc2_;
};

/// Pre-norm transformer encoder layer applied to independent groups of rows.
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(ParamStore& store, const std::string& name, Index dim, int heads, Index hidden, Rng& rng);
  Var operator()(const Var& x, Index group) const;

 private:
  LayerNorm norm1_, norm2_;
  MultiHeadAttention attn_;
  FeedForward ffn_;
};

/// Temporal convolution (T x C_in) -> (T_out x C_out) via unfold + linear.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParamStore& store, const std::string& name, Index in, Index out, int kernel, int stride,
         int pad, Rng& rng);
  Var operator()(const Var& x) const { return lin_(ag::unfold1d(x, kernel_, stride_, pad_)); }
  Linear& linear() { return lin_; }

 private:
  Linear lin_;
  int kernel_ = 1, stride_ = 1, pad_ = 0;
};

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Var> params, AdamOptions opts);
  /// Applies one update from the accumulated gradients, then clears them.
  void step();
  void zero_grad();
  std::int64_t steps() const { return t_; }
  AdamOptions& options() { return opts_; }

 private:
  std::vector<Var> params_;
  std::vector<Matrix> m_, v_;
  AdamOptions opts_;
  std::int64_t t_ = 0;
};

}  // namespace styletalk::nn
