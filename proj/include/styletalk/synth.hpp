#pragma once

// Seeded procedural stand-in for a stylized talking-face corpus: a synthetic
// orthonormal face basis plus phoneme-driven, style-dependent motion clips.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "styletalk/core.hpp"

namespace styletalk {

/// Orthonormal 3P x 64 basis. The first ceil(P/4) vertices form the mouth and
/// the columns of `lower` (default 0..12) carry most of their energy there.
FaceBasis gen_basis(std::uint64_t seed, int vertices, const FaceSplit& split = FaceSplit());

/// Share of each column's squared norm that falls on mouth vertex rows.
std::vector<double> mouth_energy_ratio(const FaceBasis& basis, std::span<const int> columns);

struct SyntheticStyle {
  int style_id = 0;
  std::array<double, kExprDim> gains{};
  std::array<double, kExprDim> rest{};  // resting expression the motion moves around
  MatrixD mouth_response;  // V x 13 viseme shapes
  std::array<double, kUpperDim> frequency{};  // Hz, on the onset-relative clock
  std::array<double, kUpperDim> phase{};
  double noise_scale = 0.05;
};

struct CorpusClip {
  std::string id;
  int style_label = 0;
  bool held_out = false;
  PhonemeSequence phonemes;
  MotionSequence motion;

  bool operator==(const CorpusClip&) const = default;
};

struct Corpus {
  std::uint64_t seed = 0;
  int n_styles = 0;
  int clip_len = 64;
  int vocab = 44;
  int basis_vertices = 256;
  double noise_scale = 0.05;
  FaceSplit split;
  std::vector<CorpusClip> clips;

  std::uint64_t basis_seed() const { return seed ^ 0x9E3779B97F4A7C15ull; }
  FaceBasis basis() const { return gen_basis(basis_seed(), basis_vertices, split); }
  /// Clip indices of the training (held_out = false) or held-out split.
  std::vector<int> indices(bool held_out) const;
  std::vector<int> indices_of_style(int style, bool held_out) const;

  bool operator==(const Corpus&) const = default;
};

struct SyntheticCorpus {
  std::vector<SyntheticStyle> styles;
  Corpus corpus;
};

struct CorpusOptions {
  std::uint64_t seed = 1;
  int n_styles = 4;
  int clips_per_style = 20;
  int clip_len = 64;
  int vocab = 44;
  int basis_vertices = 256;
  double noise_scale = 0.05;
  /// Clips per style reserved for evaluation; negative means floor(0.2 * clips_per_style).
  int held_out_per_style = -1;
  /// The upper-face oscillation clock restarts at every phoneme onset and
  /// saturates after this many frames.
  int gesture_frames = 5;
  /// Std of the per-style resting expression.
  double rest_scale = 0.8;
  FaceSplit split;
};

/// Phoneme labels actually emitted by the generator: 0 (silence) .. 40.
inline constexpr int kEmittedPhonemes = 41;

SyntheticCorpus gen_corpus(const CorpusOptions& opts);

/// Per-coefficient standard deviation and mean absolute frame difference (128 values).
Eigen::VectorXd raw_motion_statistics(const MotionSequence& m);

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& dir);

}  // namespace styletalk
