#include "styletalk/generator.hpp"

namespace styletalk {

Generator::Generator(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), split_(cfg.face_split()), store_("gen"), merge_order_(kExprDim) {
  cfg_.validate();
  nn::Rng rng(seed);
  auto style_store = store_.scoped("style");
  auto audio_store = store_.scoped("audio");
  auto lower_store = store_.scoped("lower");
  auto upper_store = store_.scoped("upper");
  style_ = std::make_unique<StyleEncoder>(style_store, cfg_, rng);
  audio_ = std::make_unique<AudioEncoder>(audio_store, cfg_, rng);
  lower_ = std::make_unique<GroupDecoder>(lower_store, cfg_, kLowerDim, rng);
  upper_ = std::make_unique<GroupDecoder>(upper_store, cfg_, kUpperDim, rng);
  for (int i = 0; i < kLowerDim; ++i) merge_order_[split_.lower_indices()[i]] = i;
  for (int i = 0; i < kUpperDim; ++i) merge_order_[split_.upper_indices()[i]] = kLowerDim + i;
}

ag::Var Generator::decode(const PhonemeSequence& p, const ag::Var& style) const {
  require(p.size() >= 1, "cannot decode an empty phoneme sequence");
  p.validate();
  require(p.vocab <= cfg_.vocab, "phoneme vocabulary larger than the model's");
  const std::vector<int> windows = extract_all_windows(p, cfg_.window);
  const ag::Var audio = audio_->encode_windows(windows, cfg_.window_len());
  const ag::Var lower = lower_->decode(audio, style, p.size());
  const ag::Var upper = upper_->decode(audio, style, p.size());
  return ag::gather_cols(ag::concat_cols({lower, upper}), merge_order_);
}

ExpressionFrame Generator::decode_frame(const AudioFeatures& a, const StyleCode& s) const {
  const Eigen::VectorXd lo = lower_->decode_group(a, s);
  const Eigen::VectorXd up = upper_->decode_group(a, s);
  std::array<float, kLowerDim> lf{};
  std::array<float, kUpperDim> uf{};
  for (int i = 0; i < kLowerDim; ++i) lf[i] = static_cast<float>(lo(i));
  for (int i = 0; i < kUpperDim; ++i) uf[i] = static_cast<float>(up(i));
  return merge_expression(lf, uf, split_);
}

MotionSequence Generator::decode_sequence(const PhonemeSequence& p, const StyleCode& s) const {
  require(s.dim() == cfg_.d_model, "style code dimension does not match the model");
  ag::NoGradGuard guard;
  const ag::Var out = decode(p, ag::Var(MatrixD(s.values.transpose())));
  return motion_from_double(out.value(), p.fps);
}

}  // namespace styletalk
