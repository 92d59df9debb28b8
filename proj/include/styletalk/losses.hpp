#pragma once

// Reconstruction, triplet and total objectives.

#include <array>
#include <string>

#include "styletalk/autograd.hpp"
#include "styletalk/config.hpp"

namespace styletalk {

/// SSIM over an L x 64 clip viewed as a single-channel image. Coefficients
/// live in [-3, 3]; both inputs are shifted by `offset` onto [0, R] first,
/// since on signed data a negated prediction scores almost as well as the
/// target itself.
struct SsimOptions {
  int window = 7;
  double dynamic_range = 6.0;
  double offset = 3.0;
  double k1 = 0.01;
  double k2 = 0.03;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

/// Mean SSIM over all fully-contained uniform windows.
ag::Var ssim(const ag::Var& a, const ag::Var& b, const SsimOptions& opts = {});

/// mu * mean|gt - pred| + (1 - mu) * (1 - SSIM(gt, pred)).
ag::Var rec_loss(const ag::Var& gt, const ag::Var& pred, double mu, const SsimOptions& opts = {});
double rec_loss(const MotionSequence& gt, const MotionSequence& pred, double mu, const SsimOptions& opts = {});

/// max(|s_c - s_p| - |s_c - s_n| + gamma, 0).
ag::Var triplet_loss(const ag::Var& anchor, const ag::Var& positive, const ag::Var& negative, double gamma);
double triplet_loss(const StyleCode& anchor, const StyleCode& positive, const StyleCode& negative, double gamma);

struct LossComponents {
  double rec = 0.0;
  double trip = 0.0;
  double sync = 0.0;
  double tem = 0.0;
  double style = 0.0;
};

/// Weighted sum; throws NumericError naming the first non-finite component.
double total_loss(const LossComponents& c, const LossWeights& w);

struct LossVars {
  ag::Var rec, trip, sync, tem, style;
};
ag::Var total_loss(const LossVars& c, const LossWeights& w);

}  // namespace styletalk
