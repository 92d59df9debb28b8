#pragma once

// Domain types shared by every stage of the pipeline: expression frames,
// motion and phoneme sequences, the upper/lower face split and the sliding
// phoneme window.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "styletalk/error.hpp"

namespace styletalk {

inline constexpr int kExprDim = 64;
inline constexpr int kLowerDim = 13;
inline constexpr int kUpperDim = kExprDim - kLowerDim;
inline constexpr float kDefaultFps = 30.0f;

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 64 3DMM expression coefficients of one video frame.
struct ExpressionFrame {
  std::array<float, kExprDim> coeffs{};

  bool operator==(const ExpressionFrame&) const = default;
};

/// Expression frames at a fixed frame rate, one frame per row.
struct MotionSequence {
  MatrixF frames;  // N x 64
  float fps = kDefaultFps;

  MotionSequence() = default;
  MotionSequence(MatrixF f, float rate = kDefaultFps) : frames(std::move(f)), fps(rate) {}

  std::int64_t size() const { return frames.rows(); }
  ExpressionFrame frame(std::int64_t t) const;
  void set_frame(std::int64_t t, const ExpressionFrame& f);
  MatrixD to_double() const { return frames.cast<double>(); }

  /// Throws ContractError unless length >= 1, fps > 0, 64 columns and all finite.
  void validate() const;

  bool operator==(const MotionSequence& o) const {
    return fps == o.fps && frames.rows() == o.frames.rows() && frames.cols() == o.frames.cols() &&
           (frames.array() == o.frames.array()).all();
  }
};

MotionSequence motion_from_double(const MatrixD& frames, float fps = kDefaultFps);

/// Frame-aligned phoneme labels in [0, vocab).
struct PhonemeSequence {
  std::vector<int> labels;
  float fps = kDefaultFps;
  int vocab = 44;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  /// Throws VocabularyError on an out-of-range label, ContractError on bad fps/vocab.
  void validate() const;

  bool operator==(const PhonemeSequence&) const = default;
};

/// Which 13 coefficients drive the lower face; the other 51 are the upper face.
class FaceSplit {
 public:
  /// Default split: indices 0..12.
  FaceSplit();
  explicit FaceSplit(const std::array<int, kLowerDim>& lower);
  static FaceSplit from_vector(const std::vector<int>& lower);

  const std::array<int, kLowerDim>& lower_indices() const { return lower_; }
  const std::array<int, kUpperDim>& upper_indices() const { return upper_; }

  bool operator==(const FaceSplit&) const = default;

 private:
  std::array<int, kLowerDim> lower_{};
  std::array<int, kUpperDim> upper_{};
};

struct FaceGroups {
  std::array<float, kLowerDim> lower{};
  std::array<float, kUpperDim> upper{};
};

FaceGroups split_expression(const ExpressionFrame& f, const FaceSplit& s);
ExpressionFrame merge_expression(std::span<const float> lower, std::span<const float> upper,
                                 const FaceSplit& s);

/// Labels at t-w .. t+w, clamping out-of-range indices to the sequence ends.
std::vector<int> extract_window(const PhonemeSequence& p, std::int64_t t, int w);

/// All windows of a sequence concatenated: |p| * (2w+1) labels.
std::vector<int> extract_all_windows(const PhonemeSequence& p, int w);

/// A d_s-dimensional speaking-style code.
struct StyleCode {
  Eigen::VectorXd values;

  int dim() const { return static_cast<int>(values.size()); }
  bool operator==(const StyleCode& o) const {
    return values.size() == o.values.size() && (values.array() == o.values.array()).all();
  }
};

/// Linear map from expression coefficients to 3-D vertex offsets. Row 3v+j of
/// `vertex_basis` is coordinate j of vertex v; columns are orthonormal.
struct FaceBasis {
  MatrixD vertex_basis;       // 3P x 64
  Eigen::VectorXd mean_shape;  // 3P
  std::vector<int> mouth_vertex_ids;

  int vertices() const { return static_cast<int>(mean_shape.size() / 3); }
  void validate() const;
};

/// One training unit: phonemes and target motion of equal length L, a style
/// label and a reference clip that carries the style.
struct TrainingClip {
  PhonemeSequence phonemes;
  MotionSequence target;
  int style_label = 0;
  MotionSequence style_ref;

  void validate(int n_styles) const;
};

}  // namespace styletalk
