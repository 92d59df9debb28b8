#include "styletalk/audio_encoder.hpp"

#include <string>

namespace styletalk {

AudioEncoder::AudioEncoder(nn::ParamStore& store, const ModelConfig& cfg, nn::Rng& rng)
    : vocab_(cfg.vocab), dim_(cfg.d_model) {
  table_ = store.create("embedding", nn::normal_matrix(cfg.vocab, cfg.d_model, 1.0, rng));
  for (int i = 0; i < cfg.audio_layers; ++i)
    layers_.emplace_back(store, "layer" + std::to_string(i), cfg.d_model, cfg.heads, cfg.ffn_hidden, rng);
  norm_ = nn::LayerNorm(store, "norm", cfg.d_model);
}

ag::Var AudioEncoder::encode_windows(std::span<const int> labels, ag::Index window_len) const {
  require(window_len >= 1 && !labels.empty() && labels.size() % window_len == 0,
          "label count must be a positive multiple of the window length");
  for (int l : labels)
    if (l < 0 || l >= vocab_)
      throw VocabularyError("phoneme label " + std::to_string(l) + " outside vocabulary [0," +
                            std::to_string(vocab_) + ")");
  const ag::Index n = static_cast<ag::Index>(labels.size()) / window_len;
  ag::Var x = ag::gather_rows(table_, labels);
  ag::Var pe(nn::sinusoidal_positions(window_len, dim_).replicate(n, 1));
  x = ag::add(x, pe);
  for (const auto& layer : layers_) x = layer(x, window_len);
  return norm_(x);
}

AudioFeatures AudioEncoder::encode_audio(std::span<const int> window) const {
  ag::NoGradGuard guard;
  return {encode_windows(window, static_cast<ag::Index>(window.size())).value()};
}

}  // namespace styletalk
