#pragma once

// Audio encoder: phoneme embeddings plus positions through a transformer
// encoder, one independent window of 2w+1 labels at a time.

#include <span>
#include <vector>

#include "styletalk/config.hpp"
#include "styletalk/nn.hpp"

namespace styletalk {

/// Articulation features of one window, (2w+1) x d.
struct AudioFeatures {
  MatrixD features;
};

class AudioEncoder {
 public:
  AudioEncoder(nn::ParamStore& store, const ModelConfig& cfg, nn::Rng& rng);

  /// `labels` holds n consecutive windows of `window_len` labels each;
  /// returns (n * window_len) x d features.
  ag::Var encode_windows(std::span<const int> labels, ag::Index window_len) const;

  AudioFeatures encode_audio(std::span<const int> window) const;

  int vocab() const { return vocab_; }

 private:
  ag::Var table_;  // vocab x d
  std::vector<nn::EncoderLayer> layers_;
  nn::LayerNorm norm_;
  int vocab_;
  int dim_;
};

}  // namespace styletalk
