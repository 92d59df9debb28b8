#pragma once

// Model and training configuration. RunConfig serializes to a flat JSON object;
// unknown keys are rejected and every key can be overridden individually.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "styletalk/core.hpp"

namespace styletalk {

struct ModelConfig {
  int d_model = 256;  // d_s and the audio feature width
  int heads = 4;
  int ffn_hidden = 1024;
  int style_layers = 3;
  int audio_layers = 2;
  int decoder_blocks = 3;
  int kernels = 8;  // K
  bool dynamic_ffn = true;
  int window = 5;  // w
  int vocab = 44;
  int n_styles = 4;  // C, set from the corpus
  int sync_embed = 128;
  int sync_hidden = 128;
  int disc_hidden = 64;
  std::vector<int> lower_indices = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};

  int window_len() const { return 2 * window + 1; }
  FaceSplit face_split() const { return FaceSplit::from_vector(lower_indices); }
  void validate() const;
};

struct LossWeights {
  double rec = 88.0;
  double trip = 1.0;
  double sync = 1.0;
  double tem = 1.0;
  double style = 1.0;
  double mu = 0.1;     // L1 share of the reconstruction loss
  double gamma = 5.0;  // triplet margin

  void validate() const;
};

struct TrainConfig {
  int clip_len = 64;  // L
  double lr = 1e-4;
  double disc_lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int steps = 1000;
  int batch_size = 4;
  std::uint64_t seed = 1;
  LossWeights weights;
  int pretrain_steps = 1500;
  int pretrain_batch = 8;
  double pretrain_lr = 1e-3;
  int log_every = 10;

  void validate(const ModelConfig& model) const;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  nlohmann::json to_json() const;
  /// Rejects unknown keys (ContractError naming the key).
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);

  /// Overrides one key from its textual value ("64", "true", "[0,1,...]").
  void set(const std::string& key, const std::string& value);
  static std::vector<std::string> keys();
  void validate() const;
};

/// Small model used by the desk-scale tests and acceptance runs.
RunConfig desk_config();

}  // namespace styletalk
