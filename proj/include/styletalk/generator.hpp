#pragma once

// The full motion generator: style encoder, audio encoder and the two
// parallel face-group decoders.

#include <memory>

#include "styletalk/audio_encoder.hpp"
#include "styletalk/dynamic_decoder.hpp"
#include "styletalk/style_encoder.hpp"

namespace styletalk {

class Generator {
 public:
  Generator(const ModelConfig& cfg, std::uint64_t seed);
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const FaceSplit& split() const { return split_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  const StyleEncoder& style_encoder() const { return *style_; }
  const AudioEncoder& audio_encoder() const { return *audio_; }
  const GroupDecoder& lower_decoder() const { return *lower_; }
  const GroupDecoder& upper_decoder() const { return *upper_; }
  GroupDecoder& lower_decoder() { return *lower_; }
  GroupDecoder& upper_decoder() { return *upper_; }

  /// Differentiable decode of a whole phoneme sequence: |p| x 64.
  ag::Var decode(const PhonemeSequence& p, const ag::Var& style) const;

  StyleCode extract_style(const MotionSequence& m) const { return style_->extract_style(m); }
  ExpressionFrame decode_frame(const AudioFeatures& a, const StyleCode& s) const;
  MotionSequence decode_sequence(const PhonemeSequence& p, const StyleCode& s) const;

 private:
  ModelConfig cfg_;
  FaceSplit split_;
  nn::ParamStore store_;
  std::vector<int> merge_order_;  // column j of a frame <- column merge_order_[j] of [lower | upper]
  std::unique_ptr<StyleEncoder> style_;
  std::unique_ptr<AudioEncoder> audio_;
  std::unique_ptr<GroupDecoder> lower_;
  std::unique_ptr<GroupDecoder> upper_;
};

}  // namespace styletalk
