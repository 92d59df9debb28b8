#include "styletalk/dynamic_decoder.hpp"

#include <string>

namespace styletalk {

MatrixD KernelBank::kernel(ag::Index k) const {
  require(k >= 0 && k < kernels(), "kernel index out of range");
  return Eigen::Map<const MatrixD>(weights.value().row(k).data(), in, out);
}

KernelBank make_kernel_bank(nn::ParamStore& store, const std::string& name, ag::Index in, ag::Index out,
                            int kernels, nn::Rng& rng) {
  require(kernels >= 1, "a kernel bank needs K >= 1");
  MatrixD w(kernels, in * out);
  for (int k = 0; k < kernels; ++k) {
    const MatrixD wk = nn::xavier_uniform(in, out, rng);
    w.row(k) = Eigen::Map<const Eigen::RowVectorXd>(wk.data(), in * out);
  }
  KernelBank bank;
  bank.weights = store.create(name + ".weights", std::move(w));
  bank.biases = store.create(name + ".biases", MatrixD::Zero(kernels, out));
  bank.in = in;
  bank.out = out;
  return bank;
}

KernelAttention make_kernel_attention(nn::ParamStore& store, const std::string& name, ag::Index style_dim,
                                      int kernels, nn::Rng& rng) {
  return KernelAttention{nn::Linear(store, name, style_dim, kernels, rng)};
}

ag::Var kernel_attention(const ag::Var& style, const KernelAttention& ka) {
  require(style.rows() == 1, "kernel attention expects a single style code");
  return ag::softmax_rows(ka.proj(style));
}

Eigen::VectorXd kernel_attention(const StyleCode& s, const KernelAttention& ka) {
  ag::NoGradGuard guard;
  return kernel_attention(ag::Var(MatrixD(s.values.transpose())), ka).value().row(0).transpose();
}

ag::Var dynamic_ffn(const ag::Var& x, const ag::Var& style, const KernelBank& bank, const KernelAttention& ka,
                    Activation g) {
  require(x.cols() == bank.in, "dynamic_ffn: input width does not match the kernel bank");
  const ag::Var pi = kernel_attention(style, ka);
  require(pi.cols() == bank.kernels(), "dynamic_ffn: kernel attention size differs from K");
  const ag::Var w = ag::reshape(ag::matmul(pi, bank.weights), bank.in, bank.out);
  const ag::Var b = ag::matmul(pi, bank.biases);
  ag::Var y = ag::linear(x, w, b);
  return g == Activation::kRelu ? ag::relu(y) : y;
}

Eigen::VectorXd dynamic_ffn(const Eigen::VectorXd& x, const StyleCode& s, const KernelBank& bank,
                            const KernelAttention& ka, Activation g) {
  ag::NoGradGuard guard;
  ag::Var out = dynamic_ffn(ag::Var(MatrixD(x.transpose())), ag::Var(MatrixD(s.values.transpose())), bank,
                            ka, g);
  return out.value().row(0).transpose();
}

MatrixD make_style_tokens(const StyleCode& s, int w) {
  require(w >= 0, "window half-width must be non-negative");
  MatrixD tokens = nn::sinusoidal_positions(2 * w + 1, s.dim());
  tokens.rowwise() += s.values.transpose();
  return tokens;
}

DecoderBlock::DecoderBlock(nn::ParamStore& store, const std::string& name, const ModelConfig& cfg,
                           nn::Rng& rng)
    : norm1_(store, name + ".norm1", cfg.d_model),
      norm2_(store, name + ".norm2", cfg.d_model),
      norm3_(store, name + ".norm3", cfg.d_model),
      self_attn_(store, name + ".self_attn", cfg.d_model, cfg.heads, rng),
      cross_attn_(store, name + ".cross_attn", cfg.d_model, cfg.heads, rng),
      dynamic_(cfg.dynamic_ffn) {
  if (dynamic_) {
    banks_.push_back(make_kernel_bank(store, name + ".ffn1.bank", cfg.d_model, cfg.ffn_hidden, cfg.kernels, rng));
    kernel_attn_.push_back(make_kernel_attention(store, name + ".ffn1.attn", cfg.d_model, cfg.kernels, rng));
    banks_.push_back(make_kernel_bank(store, name + ".ffn2.bank", cfg.ffn_hidden, cfg.d_model, cfg.kernels, rng));
    kernel_attn_.push_back(make_kernel_attention(store, name + ".ffn2.attn", cfg.d_model, cfg.kernels, rng));
  } else {
    fc1_ = nn::Linear(store, name + ".ffn1", cfg.d_model, cfg.ffn_hidden, rng);
    fc2_ = nn::Linear(store, name + ".ffn2", cfg.ffn_hidden, cfg.d_model, rng);
  }
}

ag::Var DecoderBlock::feed_forward(const ag::Var& x, const ag::Var& style) const {
  if (!dynamic_) return fc2_(ag::relu(fc1_(x)));
  ag::Var h = dynamic_ffn(x, style, banks_[0], kernel_attn_[0], Activation::kRelu);
  return dynamic_ffn(h, style, banks_[1], kernel_attn_[1], Activation::kIdentity);
}

ag::Var DecoderBlock::operator()(const ag::Var& tokens, const ag::Var& memory, const ag::Var& style,
                                 ag::Index n, ag::Index win, bool shared, bool middle_only) const {
  require(tokens.rows() == (shared ? win : n * win), "decoder block: token rows do not match groups");
  require(memory.rows() == n * win, "decoder block: memory must hold n groups of 2w+1 rows");
  const int mid = static_cast<int>(win / 2);
  const ag::Var h = norm1_(tokens);

  ag::Var y;
  if (middle_only) {
    std::vector<int> mids;
    const ag::Index groups = shared ? 1 : n;
    for (ag::Index g = 0; g < groups; ++g) mids.push_back(static_cast<int>(g * win + mid));
    y = ag::add(ag::gather_rows(tokens, mids), self_attn_(ag::gather_rows(h, mids), h, 1, win));
  } else {
    y = ag::add(tokens, self_attn_(h, h, win, win));
  }
  if (shared) {
    // Every group starts from the same style tokens: broadcast the one group.
    std::vector<int> tile;
    for (ag::Index g = 0; g < n; ++g)
      for (ag::Index r = 0; r < y.rows(); ++r) tile.push_back(static_cast<int>(r));
    y = ag::gather_rows(y, tile);
  }
  const ag::Index q_group = middle_only ? 1 : win;
  y = ag::add(y, cross_attn_(norm2_(y), memory, q_group, win));
  return ag::add(y, feed_forward(norm3_(y), style));
}

GroupDecoder::GroupDecoder(nn::ParamStore& store, const ModelConfig& cfg, int group_size, nn::Rng& rng)
    : group_size_(group_size), window_(cfg.window), dim_(cfg.d_model) {
  require(group_size == kLowerDim || group_size == kUpperDim, "group size must be 13 or 51");
  for (int i = 0; i < cfg.decoder_blocks; ++i)
    blocks_.emplace_back(store, "block" + std::to_string(i), cfg, rng);
  norm_ = nn::LayerNorm(store, "norm", cfg.d_model);
  readout_ = nn::Linear(store, "readout", cfg.d_model, group_size, rng);
}

ag::Var GroupDecoder::decode(const ag::Var& audio, const ag::Var& style, ag::Index n) const {
  const ag::Index win = 2 * window_ + 1;
  require(style.rows() == 1 && style.cols() == dim_, "decoder style code must be 1 x d_s");
  require(audio.rows() == n * win && audio.cols() == dim_, "decoder audio features must be n(2w+1) x d");
  ag::Var x = ag::add(ag::Var(nn::sinusoidal_positions(win, dim_)), style);
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    x = blocks_[i](x, audio, style, n, win, i == 0, i + 1 == blocks_.size());
  return readout_(norm_(x));
}

Eigen::VectorXd GroupDecoder::decode_group(const AudioFeatures& a, const StyleCode& s) const {
  require(a.features.rows() == 2 * window_ + 1, "audio features must have 2w+1 rows");
  require(s.dim() == dim_, "style code dimension does not match the decoder");
  ag::NoGradGuard guard;
  ag::Var out = decode(ag::Var(a.features), ag::Var(MatrixD(s.values.transpose())), 1);
  return out.value().row(0).transpose();
}

}  // namespace styletalk
