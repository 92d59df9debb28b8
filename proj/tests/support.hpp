#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "styletalk/training.hpp"

namespace testsupport {

using styletalk::MatrixD;
namespace ag = styletalk::ag;

struct GradReport {
  long checked = 0;
  long passed = 0;
  double worst = 0.0;

  double pass_rate() const { return checked ? static_cast<double>(passed) / checked : 1.0; }
  void merge(const GradReport& o) {
    checked += o.checked;
    passed += o.passed;
    worst = std::max(worst, o.worst);
  }
};

/// Relative error with a small absolute floor so that gradients that are
/// zero up to rounding do not divide by zero.
inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Central differences (step h) against reverse mode for every entry of `params`.
/// `stride` > 1 checks every stride-th entry only.
inline GradReport check_gradients(const std::function<ag::Var()>& f, std::vector<ag::Var> params,
                                  double tol = 1e-4, double h = 1e-5, long stride = 1) {
  for (auto& p : params) p.zero_grad();
  const ag::Var loss = f();
  ag::backward(loss);
  std::vector<MatrixD> grads;
  for (auto& p : params)
    grads.push_back(p.grad().size() ? p.grad() : MatrixD::Zero(p.rows(), p.cols()));
  for (auto& p : params) p.zero_grad();

  GradReport r;
  ag::NoGradGuard guard;
  long counter = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ag::Var p = params[k];
    for (Eigen::Index i = 0; i < p.value().size(); ++i) {
      if (counter++ % stride != 0) continue;
      double& slot = p.mutable_value().data()[i];
      const double orig = slot;
      slot = orig + h;
      const double up = f().item();
      slot = orig - h;
      const double down = f().item();
      slot = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = rel_error(grads[k].data()[i], numeric);
      ++r.checked;
      if (err <= tol) ++r.passed;
      r.worst = std::max(r.worst, err);
    }
  }
  return r;
}

/// The tiny model used for gradient verification: d_s=8, K=2, L=8, w=1.
inline styletalk::RunConfig tiny_config() {
  styletalk::RunConfig c;
  c.model.d_model = 8;
  c.model.heads = 2;
  c.model.ffn_hidden = 12;
  c.model.style_layers = 1;
  c.model.audio_layers = 1;
  c.model.decoder_blocks = 2;
  c.model.kernels = 2;
  c.model.window = 1;
  c.model.vocab = 8;
  c.model.n_styles = 2;
  c.model.sync_embed = 6;
  c.model.sync_hidden = 8;
  c.model.disc_hidden = 4;
  c.train.clip_len = 8;
  c.train.batch_size = 1;
  return c;
}

inline styletalk::Corpus tiny_corpus(std::uint64_t seed = 5) {
  styletalk::CorpusOptions o;
  o.seed = seed;
  o.n_styles = 2;
  o.clips_per_style = 3;
  o.clip_len = 8;
  o.vocab = 8;
  o.basis_vertices = 64;
  o.held_out_per_style = 0;
  return styletalk::gen_corpus(o).corpus;
}

inline MatrixD random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixD m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace testsupport
