#pragma once

// Joint generator training, critic pretraining and model checkpoints.

#include <functional>
#include <memory>

#include "styletalk/checkpoint.hpp"
#include "styletalk/discriminators.hpp"
#include "styletalk/generator.hpp"
#include "styletalk/losses.hpp"
#include "styletalk/synth.hpp"

namespace styletalk {

struct TripletSample {
  int style_clip = -1;  // V_c, supplies the style code
  int positive = -1;    // same style, != style_clip
  int negative = -1;    // different style
};

/// Draws a triplet for style `style` from `pool` (indices into corpus.clips).
/// `exclude` (the reconstruction target) is never used as V_c.
TripletSample sample_triplet(const Corpus& corpus, std::span<const int> pool, int style, nn::Rng& rng,
                             int exclude = -1);

struct StepRecord {
  int step = 0;
  double rec = 0.0, trip = 0.0, sync = 0.0, tem = 0.0, style = 0.0;
  double total = 0.0;
  double critic = 0.0;  // temporal critic hinge loss

  nlohmann::json to_json() const;
};

class Trainer {
 public:
  /// The critics are frozen on entry. Clips marked held_out are never sampled.
  Trainer(const RunConfig& cfg, const Corpus& corpus, std::shared_ptr<SyncDiscriminator> sync,
          std::shared_ptr<StyleDiscriminator> style_disc);

  /// One generator update followed by one temporal-critic update.
  StepRecord step();

  /// Mean reconstruction loss over `clips`, each decoded with the style of the
  /// next same-style clip in `clips` (falls back to itself if it is alone).
  double eval_rec(std::span<const int> clips) const;

  Generator& generator() { return *gen_; }
  const Generator& generator() const { return *gen_; }
  TemporalDiscriminator& temporal() { return *temporal_; }
  int steps_done() const { return step_; }
  const RunConfig& config() const { return cfg_; }

  Checkpoint checkpoint() const;

 private:
  RunConfig cfg_;
  const Corpus& corpus_;
  std::vector<int> pool_;
  std::shared_ptr<SyncDiscriminator> sync_;
  std::shared_ptr<StyleDiscriminator> style_disc_;
  std::unique_ptr<Generator> gen_;
  std::unique_ptr<TemporalDiscriminator> temporal_;
  MouthProjector mouth_;
  nn::Adam gen_opt_;
  nn::Adam tem_opt_;
  nn::Rng rng_;
  int step_ = 0;
};

// --- critic pretraining ----------------------------------------------------

struct PretrainReport {
  int steps = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  double held_out_metric = 0.0;  // AUC for sync, accuracy for style
  int held_out_count = 0;
};

/// Binary cross-entropy on (1 + P_sync) / 2. Negatives: half shifted by at
/// least 2w+1 frames within the clip, half from another clip.
PretrainReport pretrain_sync_disc(SyncDiscriminator& disc, const Corpus& corpus, const TrainConfig& cfg,
                                  int w);
/// Sync/async AUC over every frame of `clips`, one shifted and one cross-clip negative per frame.
double sync_auc(const SyncDiscriminator& disc, const Corpus& corpus, std::span<const int> clips, int w,
                std::uint64_t seed);

PretrainReport pretrain_style_disc(StyleDiscriminator& disc, const Corpus& corpus, const TrainConfig& cfg);
double style_accuracy(const StyleDiscriminator& disc, const Corpus& corpus, std::span<const int> clips,
                      int clip_len);

// --- checkpoints -------------------------------------------------------------

Checkpoint critic_checkpoint(const SyncDiscriminator& disc, const RunConfig& cfg);
Checkpoint critic_checkpoint(const StyleDiscriminator& disc, const RunConfig& cfg);

/// Rebuilds a component from any checkpoint holding its tensors.
std::unique_ptr<Generator> load_generator(const Checkpoint& ckpt);
std::shared_ptr<SyncDiscriminator> load_sync_disc(const Checkpoint& ckpt);
std::shared_ptr<StyleDiscriminator> load_style_disc(const Checkpoint& ckpt);
RunConfig checkpoint_config(const Checkpoint& ckpt);

}  // namespace styletalk
