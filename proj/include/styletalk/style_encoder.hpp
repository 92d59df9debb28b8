#pragma once

// Style encoder: a transformer encoder over expression frames followed by
// self-attention pooling into a single style code.

#include <vector>

#include "styletalk/config.hpp"
#include "styletalk/nn.hpp"

namespace styletalk {

/// Per-frame style vectors, one row per frame (N x d_s).
struct StyleTokenMatrix {
  MatrixD tokens;
};

/// Pooling score vector W_s (1 x d_s).
struct PoolingWeights {
  MatrixD w;
};

/// Softmax of the N scores W_s . h_i.
Eigen::VectorXd pooling_weights(const StyleTokenMatrix& h, const PoolingWeights& w);
/// sum_i alpha_i h_i with alpha = pooling_weights(h, w).
StyleCode attention_pool(const StyleTokenMatrix& h, const PoolingWeights& w);
/// Differentiable form: tokens (N x d), w (1 x d) -> 1 x d.
ag::Var attention_pool(const ag::Var& tokens, const ag::Var& w);

class StyleEncoder {
 public:
  StyleEncoder(nn::ParamStore& store, const ModelConfig& cfg, nn::Rng& rng);

  /// motion (N x 64) -> tokens (N x d_s).
  ag::Var tokens(const ag::Var& motion) const;
  /// motion (N x 64) -> style code (1 x d_s).
  ag::Var encode(const ag::Var& motion) const;

  StyleTokenMatrix encode_tokens(const MotionSequence& m) const;
  StyleCode extract_style(const MotionSequence& m) const;
  PoolingWeights pooling() const { return {pool_.value()}; }

 private:
  nn::Linear embed_;
  std::vector<nn::EncoderLayer> layers_;
  nn::LayerNorm norm_;
  ag::Var pool_;
  int dim_;
};

}  // namespace styletalk
