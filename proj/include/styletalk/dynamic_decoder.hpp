#pragma once

// Style-controllable dynamic decoder. Style tokens (the style code repeated
// 2w+1 times plus positions) query the audio features; each block ends in two
// feed-forward layers whose weights are a style-dependent convex blend of K
// kernel sets. The middle output token is read out as one face group.

#include <span>
#include <vector>

#include "styletalk/audio_encoder.hpp"
#include "styletalk/config.hpp"
#include "styletalk/nn.hpp"

namespace styletalk {

/// K parallel weight/bias sets of one adaptive layer. Row k of `weights` is
/// W_k (in x out) flattened row-major; row k of `biases` is b_k.
struct KernelBank {
  ag::Var weights;  // K x (in * out)
  ag::Var biases;   // K x out
  ag::Index in = 0;
  ag::Index out = 0;

  ag::Index kernels() const { return weights.rows(); }
  MatrixD kernel(ag::Index k) const;  // in x out
};

/// Affine map style -> K scores followed by softmax.
struct KernelAttention {
  nn::Linear proj;
};

KernelBank make_kernel_bank(nn::ParamStore& store, const std::string& name, ag::Index in, ag::Index out,
                            int kernels, nn::Rng& rng);
KernelAttention make_kernel_attention(nn::ParamStore& store, const std::string& name, ag::Index style_dim,
                                      int kernels, nn::Rng& rng);

/// pi(s): 1 x K on the probability simplex.
ag::Var kernel_attention(const ag::Var& style, const KernelAttention& ka);
Eigen::VectorXd kernel_attention(const StyleCode& s, const KernelAttention& ka);

enum class Activation { kIdentity, kRelu };

/// g(x W(s) + b(s)) with W(s) = sum_k pi_k W_k and b(s) = sum_k pi_k b_k.
/// x is n x in, style 1 x d_s; the blend is formed once and applied to all rows.
ag::Var dynamic_ffn(const ag::Var& x, const ag::Var& style, const KernelBank& bank, const KernelAttention& ka,
                    Activation g);
Eigen::VectorXd dynamic_ffn(const Eigen::VectorXd& x, const StyleCode& s, const KernelBank& bank,
                            const KernelAttention& ka, Activation g);

/// (2w+1) x d: row i = s + PE(i).
MatrixD make_style_tokens(const StyleCode& s, int w);

class DecoderBlock {
 public:
  DecoderBlock(nn::ParamStore& store, const std::string& name, const ModelConfig& cfg, nn::Rng& rng);

  /// `tokens` holds either n groups of `win` rows or, when `shared` is set, a
  /// single group standing for all n groups. With `middle_only` only the
  /// middle token of each group is produced (n rows); otherwise n * win rows.
  ag::Var operator()(const ag::Var& tokens, const ag::Var& memory, const ag::Var& style, ag::Index n,
                     ag::Index win, bool shared, bool middle_only) const;

  bool dynamic() const { return dynamic_; }
  const KernelBank& bank(int i) const { return banks_[i]; }
  const KernelAttention& attention(int i) const { return kernel_attn_[i]; }

 private:
  ag::Var feed_forward(const ag::Var& x, const ag::Var& style) const;

  nn::LayerNorm norm1_, norm2_, norm3_;
  nn::MultiHeadAttention self_attn_, cross_attn_;
  bool dynamic_;
  std::vector<KernelBank> banks_;
  std::vector<KernelAttention> kernel_attn_;
  nn::Linear fc1_, fc2_;  // static mode
};

/// One face-group decoder (lower: 13 outputs, upper: 51).
class GroupDecoder {
 public:
  GroupDecoder(nn::ParamStore& store, const ModelConfig& cfg, int group_size, nn::Rng& rng);

  /// audio: (n * (2w+1)) x d, style: 1 x d -> n x group_size.
  ag::Var decode(const ag::Var& audio, const ag::Var& style, ag::Index n) const;
  Eigen::VectorXd decode_group(const AudioFeatures& a, const StyleCode& s) const;

  int group_size() const { return group_size_; }
  const std::vector<DecoderBlock>& blocks() const { return blocks_; }
  nn::Linear& readout() { return readout_; }

 private:
  std::vector<DecoderBlock> blocks_;
  nn::LayerNorm norm_;
  nn::Linear readout_;
  int group_size_;
  int window_;
  int dim_;
};

}  // namespace styletalk
