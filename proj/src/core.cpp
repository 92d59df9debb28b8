#include "styletalk/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace styletalk {

ExpressionFrame MotionSequence::frame(std::int64_t t) const {
  if (t < 0 || t >= size()) throw RangeError("frame index " + std::to_string(t) + " out of range");
  ExpressionFrame f;
  for (int i = 0; i < kExprDim; ++i) f.coeffs[i] = frames(t, i);
  return f;
}

void MotionSequence::set_frame(std::int64_t t, const ExpressionFrame& f) {
  if (t < 0 || t >= size()) throw RangeError("frame index " + std::to_string(t) + " out of range");
  for (int i = 0; i < kExprDim; ++i) frames(t, i) = f.coeffs[i];
}

void MotionSequence::validate() const {
  require(frames.rows() >= 1, "motion sequence must contain at least one frame");
  require(frames.cols() == kExprDim, "motion frames must have 64 coefficients, got " +
                                         std::to_string(frames.cols()));
  require(fps > 0.0f && std::isfinite(fps), "motion fps must be positive");
  require(frames.allFinite(), "motion sequence contains non-finite coefficients");
}

MotionSequence motion_from_double(const MatrixD& frames, float fps) {
  return MotionSequence(frames.cast<float>(), fps);
}

void PhonemeSequence::validate() const {
  require(vocab >= 1, "phoneme vocabulary must be non-empty");
  require(fps > 0.0f && std::isfinite(fps), "phoneme fps must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= vocab)
      throw VocabularyError("phoneme label " + std::to_string(labels[i]) + " at index " +
                            std::to_string(i) + " outside vocabulary [0," + std::to_string(vocab) +
                            ")");
  }
}

FaceSplit::FaceSplit() {
  for (int i = 0; i < kLowerDim; ++i) lower_[i] = i;
  for (int i = 0; i < kUpperDim; ++i) upper_[i] = kLowerDim + i;
}

FaceSplit::FaceSplit(const std::array<int, kLowerDim>& lower) : lower_(lower) {
  std::array<bool, kExprDim> used{};
  for (int idx : lower_) {
    require(idx >= 0 && idx < kExprDim, "lower-face index " + std::to_string(idx) + " out of [0,64)");
    require(!used[idx], "duplicate lower-face index " + std::to_string(idx));
    used[idx] = true;
  }
  int k = 0;
  for (int i = 0; i < kExprDim; ++i)
    if (!used[i]) upper_[k++] = i;
}

FaceSplit FaceSplit::from_vector(const std::vector<int>& lower) {
  require(lower.size() == kLowerDim,
          "face split needs exactly 13 lower-face indices, got " + std::to_string(lower.size()));
  std::array<int, kLowerDim> a{};
  std::copy(lower.begin(), lower.end(), a.begin());
  return FaceSplit(a);
}

FaceGroups split_expression(const ExpressionFrame& f, const FaceSplit& s) {
  FaceGroups g;
  for (int i = 0; i < kLowerDim; ++i) g.lower[i] = f.coeffs[s.lower_indices()[i]];
  for (int i = 0; i < kUpperDim; ++i) g.upper[i] = f.coeffs[s.upper_indices()[i]];
  return g;
}

ExpressionFrame merge_expression(std::span<const float> lower, std::span<const float> upper,
                                 const FaceSplit& s) {
  require(lower.size() == kLowerDim, "lower group must have 13 coefficients");
  require(upper.size() == kUpperDim, "upper group must have 51 coefficients");
  ExpressionFrame f;
  for (int i = 0; i < kLowerDim; ++i) f.coeffs[s.lower_indices()[i]] = lower[i];
  for (int i = 0; i < kUpperDim; ++i) f.coeffs[s.upper_indices()[i]] = upper[i];
  return f;
}

std::vector<int> extract_window(const PhonemeSequence& p, std::int64_t t, int w) {
  if (t < 0 || t >= p.size())
    throw RangeError("window centre " + std::to_string(t) + " outside sequence of length " +
                     std::to_string(p.size()));
  require(w >= 0, "window half-width must be non-negative");
  std::vector<int> out;
  out.reserve(2 * w + 1);
  const std::int64_t last = p.size() - 1;
  for (std::int64_t i = t - w; i <= t + w; ++i) out.push_back(p.labels[std::clamp<std::int64_t>(i, 0, last)]);
  return out;
}

std::vector<int> extract_all_windows(const PhonemeSequence& p, int w) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(p.size()) * (2 * w + 1));
  for (std::int64_t t = 0; t < p.size(); ++t) {
    auto win = extract_window(p, t, w);
    out.insert(out.end(), win.begin(), win.end());
  }
  return out;
}

void FaceBasis::validate() const {
  require(vertex_basis.cols() == kExprDim, "face basis must have 64 columns");
  require(vertex_basis.rows() == mean_shape.size() && mean_shape.size() % 3 == 0,
          "face basis rows must equal 3 * vertex count");
  require(!mouth_vertex_ids.empty(), "face basis needs at least one mouth vertex");
  for (int id : mouth_vertex_ids)
    require(id >= 0 && id < vertices(), "mouth vertex id out of range");
}

void TrainingClip::validate(int n_styles) const {
  phonemes.validate();
  target.validate();
  style_ref.validate();
  require(phonemes.size() == target.size(), "phoneme and target lengths differ");
  require(style_label >= 0 && style_label < n_styles, "style label out of range");
}

}  // namespace styletalk
