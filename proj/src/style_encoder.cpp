#include "styletalk/style_encoder.hpp"

namespace styletalk {

Eigen::VectorXd pooling_weights(const StyleTokenMatrix& h, const PoolingWeights& w) {
  require(h.tokens.rows() >= 1, "attention_pool needs at least one token");
  require(w.w.rows() == 1 && w.w.cols() == h.tokens.cols(),
          "pooling weights must be 1 x d_s with d_s = token width");
  Eigen::VectorXd scores = h.tokens * w.w.row(0).transpose();
  const double m = scores.maxCoeff();
  Eigen::VectorXd alpha = (scores.array() - m).exp();
  return alpha / alpha.sum();
}

StyleCode attention_pool(const StyleTokenMatrix& h, const PoolingWeights& w) {
  const Eigen::VectorXd alpha = pooling_weights(h, w);
  return StyleCode{h.tokens.transpose() * alpha};
}

ag::Var attention_pool(const ag::Var& tokens, const ag::Var& w) {
  require(w.rows() == 1 && w.cols() == tokens.cols(), "pooling weights must be 1 x d_s");
  ag::Var scores = ag::matmul(w, ag::transpose(tokens));  // 1 x N
  return ag::matmul(ag::softmax_rows(scores), tokens);
}

StyleEncoder::StyleEncoder(nn::ParamStore& store, const ModelConfig& cfg, nn::Rng& rng)
    : embed_(store, "embed", kExprDim, cfg.d_model, rng), dim_(cfg.d_model) {
  for (int i = 0; i < cfg.style_layers; ++i)
    layers_.emplace_back(store, "layer" + std::to_string(i), cfg.d_model, cfg.heads, cfg.ffn_hidden, rng);
  norm_ = nn::LayerNorm(store, "norm", cfg.d_model);
  pool_ = store.create("pool", nn::normal_matrix(1, cfg.d_model, 0.1, rng));
}

ag::Var StyleEncoder::tokens(const ag::Var& motion) const {
  require(motion.rows() >= 1, "style encoder needs at least one frame");
  require(motion.cols() == kExprDim, "style encoder input must have 64 columns");
  ag::Var x = ag::add(embed_(motion), ag::Var(nn::sinusoidal_positions(motion.rows(), dim_)));
  for (const auto& layer : layers_) x = layer(x, motion.rows());
  return norm_(x);
}

ag::Var StyleEncoder::encode(const ag::Var& motion) const { return attention_pool(tokens(motion), pool_); }

StyleTokenMatrix StyleEncoder::encode_tokens(const MotionSequence& m) const {
  m.validate();
  ag::NoGradGuard guard;
  return {tokens(ag::Var(m.to_double())).value()};
}

StyleCode StyleEncoder::extract_style(const MotionSequence& m) const {
  return attention_pool(encode_tokens(m), pooling());
}

}  // namespace styletalk
