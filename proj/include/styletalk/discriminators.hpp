#pragma once

// Critics used during training:
//  - SyncDiscriminator: PointNet mouth encoder vs. phoneme-window encoder,
//    scored by cosine similarity.
//  - StyleDiscriminator: 1-D patch classifier over a clip, C-way.
//  - TemporalDiscriminator: 1-D patch critic trained with a hinge loss.

#include <span>
#include <vector>

#include "styletalk/config.hpp"
#include "styletalk/nn.hpp"

namespace styletalk {

inline constexpr double kCosineEps = 1e-8;
inline constexpr double kLogClamp = 1e-7;

/// Mouth vertex coordinates, one vertex per row (M x 3).
struct MouthPointCloud {
  MatrixD points;
};

struct SyncEmbeddings {
  Eigen::VectorXd mouth;
  Eigen::VectorXd audio;
};

MouthPointCloud mouth_points(const ExpressionFrame& f, const FaceBasis& basis);

/// Precomputed mouth rows of a FaceBasis for batched, differentiable use.
class MouthProjector {
 public:
  explicit MouthProjector(const FaceBasis& basis);
  /// frames (F x 64) -> points ((F * M) x 3), frame-major.
  ag::Var operator()(const ag::Var& frames) const;
  ag::Index mouth_vertices() const { return m_; }

 private:
  ag::Var basis_t_;  // 64 x 3M
  ag::Var mean_;     // 1 x 3M
  ag::Index m_;
};

/// Cosine of the two embeddings, with the norm product floored at kCosineEps.
double sync_prob(const SyncEmbeddings& e);

class SyncDiscriminator {
 public:
  SyncDiscriminator(const ModelConfig& cfg, std::uint64_t seed);
  SyncDiscriminator(const SyncDiscriminator&) = delete;
  SyncDiscriminator& operator=(const SyncDiscriminator&) = delete;

  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  /// points ((F * M) x 3) -> F x d_e, max-pooled over each frame's M points.
  ag::Var mouth_embedding(const ag::Var& points, ag::Index m) const;
  /// F windows of 2w+1 labels -> F x d_e.
  ag::Var audio_embedding(std::span<const int> windows) const;
  /// Per-frame P_sync (F x 1).
  ag::Var sync_prob(const ag::Var& points, ag::Index m, std::span<const int> windows) const;

  SyncEmbeddings embed(const MouthPointCloud& cloud, std::span<const int> window) const;

  int window_len() const { return window_len_; }

 private:
  nn::ParamStore store_;
  nn::Linear point1_, point2_, point3_, mouth_head_;
  ag::Var phone_table_;
  nn::Linear phone1_, phone_head_;
  int window_len_;
  int vocab_;
  int phone_dim_;
};

/// Mean over frames of -log(clamp(P_sync, 1e-7, 1)) for a generated clip.
ag::Var sync_loss(const ag::Var& clip, const PhonemeSequence& phonemes, const SyncDiscriminator& disc,
                  const MouthProjector& mouth, int w);
double sync_loss(const MotionSequence& clip, const PhonemeSequence& phonemes, const SyncDiscriminator& disc,
                 const FaceBasis& basis, int w);

/// Three stride-2 temporal convolutions (kernel 4, pad 1) with LeakyReLU(0.2)
/// between them; emits one row of `out` scores per temporal patch.
class PatchDiscriminator {
 public:
  PatchDiscriminator(nn::ParamStore& store, int hidden, int out, nn::Rng& rng);
  ag::Var operator()(const ag::Var& motion) const;
  nn::Conv1d& last() { return conv3_; }

 private:
  nn::Conv1d conv1_, conv2_, conv3_;
};

class StyleDiscriminator {
 public:
  StyleDiscriminator(const ModelConfig& cfg, std::uint64_t seed);
  StyleDiscriminator(const StyleDiscriminator&) = delete;
  StyleDiscriminator& operator=(const StyleDiscriminator&) = delete;

  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  int classes() const { return classes_; }

  /// Patch logits averaged over patches: 1 x C.
  ag::Var logits(const ag::Var& motion) const;
  /// Softmax of logits(): 1 x C.
  ag::Var prob(const ag::Var& motion) const;
  Eigen::VectorXd style_disc_prob(const MotionSequence& m) const;
  PatchDiscriminator& net() { return net_; }

 private:
  nn::ParamStore store_;
  PatchDiscriminator net_;
  int classes_;
};

/// -log(clamp(P^s[label], 1e-7, 1)).
ag::Var style_loss(const ag::Var& motion, int label, const StyleDiscriminator& disc);
double style_loss(const MotionSequence& m, int label, const StyleDiscriminator& disc);

class TemporalDiscriminator {
 public:
  TemporalDiscriminator(const ModelConfig& cfg, std::uint64_t seed);
  TemporalDiscriminator(const TemporalDiscriminator&) = delete;
  TemporalDiscriminator& operator=(const TemporalDiscriminator&) = delete;

  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  /// Patch scores (patches x 1).
  ag::Var scores(const ag::Var& motion) const;
  std::vector<double> temporal_scores(const MotionSequence& m) const;

 private:
  nn::ParamStore store_;
  PatchDiscriminator net_;
};

/// mean(max(0, 1 - D(real))) + mean(max(0, 1 + D(fake))).
ag::Var hinge_critic_loss(const ag::Var& real_scores, const ag::Var& fake_scores);
/// -mean(D(fake)).
ag::Var hinge_generator_loss(const ag::Var& fake_scores);

}  // namespace styletalk
