#include "styletalk/discriminators.hpp"

#include <algorithm>
#include <cmath>

namespace styletalk {

MouthPointCloud mouth_points(const ExpressionFrame& f, const FaceBasis& basis) {
  basis.validate();
  const Eigen::Map<const Eigen::VectorXf> coeffs(f.coeffs.data(), kExprDim);
  const Eigen::VectorXd mesh = basis.mean_shape + basis.vertex_basis * coeffs.cast<double>();
  MouthPointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(basis.mouth_vertex_ids.size()), 3);
  for (std::size_t i = 0; i < basis.mouth_vertex_ids.size(); ++i)
    cloud.points.row(static_cast<Eigen::Index>(i)) = mesh.segment(3 * basis.mouth_vertex_ids[i], 3).transpose();
  return cloud;
}

MouthProjector::MouthProjector(const FaceBasis& basis) {
  basis.validate();
  m_ = static_cast<ag::Index>(basis.mouth_vertex_ids.size());
  MatrixD bt(kExprDim, 3 * m_);
  MatrixD mean(1, 3 * m_);
  for (ag::Index i = 0; i < m_; ++i)
    for (int j = 0; j < 3; ++j) {
      const ag::Index row = 3 * basis.mouth_vertex_ids[static_cast<std::size_t>(i)] + j;
      bt.col(3 * i + j) = basis.vertex_basis.row(row).transpose();
      mean(0, 3 * i + j) = basis.mean_shape(row);
    }
  basis_t_ = ag::Var(std::move(bt));
  mean_ = ag::Var(std::move(mean));
}

ag::Var MouthProjector::operator()(const ag::Var& frames) const {
  require(frames.cols() == kExprDim, "mouth projection expects 64 coefficients per frame");
  const ag::Var flat = ag::linear(frames, basis_t_, mean_);  // F x 3M
  return ag::reshape(flat, frames.rows() * m_, 3);
}

double sync_prob(const SyncEmbeddings& e) {
  require(e.mouth.size() == e.audio.size(), "sync embeddings must have equal dimensions");
  const double den = std::max(e.mouth.norm() * e.audio.norm(), kCosineEps);
  return e.mouth.dot(e.audio) / den;
}

SyncDiscriminator::SyncDiscriminator(const ModelConfig& cfg, std::uint64_t seed)
    : store_("sync"), window_len_(cfg.window_len()), vocab_(cfg.vocab), phone_dim_(16) {
  nn::Rng rng(seed);
  const int h = cfg.sync_hidden;
  point1_ = nn::Linear(store_, "point1", 3, h / 2, rng);
  point2_ = nn::Linear(store_, "point2", h / 2, h, rng);
  point3_ = nn::Linear(store_, "point3", h, h, rng);
  mouth_head_ = nn::Linear(store_, "mouth_head", h, cfg.sync_embed, rng);
  phone_table_ = store_.create("phone_embedding", nn::normal_matrix(cfg.vocab, phone_dim_, 1.0, rng));
  phone1_ = nn::Linear(store_, "phone1", static_cast<ag::Index>(window_len_) * phone_dim_, h, rng);
  phone_head_ = nn::Linear(store_, "phone_head", h, cfg.sync_embed, rng);
}

ag::Var SyncDiscriminator::mouth_embedding(const ag::Var& points, ag::Index m) const {
  require(points.cols() == 3 && m > 0 && points.rows() % m == 0, "mouth points must be (F*M) x 3");
  ag::Var x = ag::relu(point1_(points));
  x = ag::relu(point2_(x));
  x = point3_(x);
  return mouth_head_(ag::relu(ag::group_max_rows(x, m)));
}

ag::Var SyncDiscriminator::audio_embedding(std::span<const int> windows) const {
  require(!windows.empty() && windows.size() % window_len_ == 0, "phoneme windows must be F x (2w+1)");
  for (int l : windows)
    if (l < 0 || l >= vocab_) throw VocabularyError("phoneme label " + std::to_string(l) + " outside vocabulary");
  const ag::Index frames = static_cast<ag::Index>(windows.size()) / window_len_;
  ag::Var e = ag::gather_rows(phone_table_, windows);  // (F*win) x p
  e = ag::reshape(e, frames, static_cast<ag::Index>(window_len_) * phone_dim_);
  return phone_head_(ag::relu(phone1_(e)));
}

ag::Var SyncDiscriminator::sync_prob(const ag::Var& points, ag::Index m, std::span<const int> windows) const {
  const ag::Var em = mouth_embedding(points, m);
  const ag::Var ea = audio_embedding(windows);
  require(em.rows() == ea.rows(), "mouth and phoneme frame counts differ");
  return ag::row_cosine(em, ea, kCosineEps);
}

SyncEmbeddings SyncDiscriminator::embed(const MouthPointCloud& cloud, std::span<const int> window) const {
  ag::NoGradGuard guard;
  SyncEmbeddings e;
  e.mouth = mouth_embedding(ag::Var(cloud.points), cloud.points.rows()).value().row(0).transpose();
  e.audio = audio_embedding(window).value().row(0).transpose();
  return e;
}

ag::Var sync_loss(const ag::Var& clip, const PhonemeSequence& phonemes, const SyncDiscriminator& disc,
                  const MouthProjector& mouth, int w) {
  require(clip.rows() == phonemes.size(), "sync loss: clip and phoneme lengths differ");
  const std::vector<int> windows = extract_all_windows(phonemes, w);
  const ag::Var p = disc.sync_prob(mouth(clip), mouth.mouth_vertices(), windows);
  return ag::scale(ag::mean(ag::log(ag::clamp(p, kLogClamp, 1.0))), -1.0);
}

double sync_loss(const MotionSequence& clip, const PhonemeSequence& phonemes, const SyncDiscriminator& disc,
                 const FaceBasis& basis, int w) {
  require(clip.size() == phonemes.size(), "sync loss: clip and phoneme lengths differ");
  ag::NoGradGuard guard;
  return sync_loss(ag::Var(clip.to_double()), phonemes, disc, MouthProjector(basis), w).item();
}

PatchDiscriminator::PatchDiscriminator(nn::ParamStore& store, int hidden, int out, nn::Rng& rng)
    : conv1_(store, "conv1", kExprDim, hidden, 4, 2, 1, rng),
      conv2_(store, "conv2", hidden, hidden, 4, 2, 1, rng),
      conv3_(store, "conv3", hidden, out, 4, 2, 1, rng) {}

ag::Var PatchDiscriminator::operator()(const ag::Var& motion) const {
  require(motion.cols() == kExprDim, "patch discriminator expects L x 64 input");
  ag::Var x = ag::leaky_relu(conv1_(motion), 0.2);
  x = ag::leaky_relu(conv2_(x), 0.2);
  return conv3_(x);
}

StyleDiscriminator::StyleDiscriminator(const ModelConfig& cfg, std::uint64_t seed)
    : store_("style_disc"),
      net_([&]() -> PatchDiscriminator {
        nn::Rng rng(seed);
        return PatchDiscriminator(store_, cfg.disc_hidden, cfg.n_styles, rng);
      }()),
      classes_(cfg.n_styles) {
  require(classes_ >= 2, "style discriminator needs C >= 2");
}

ag::Var StyleDiscriminator::logits(const ag::Var& motion) const {
  const ag::Var patches = net_(motion);
  return ag::group_mean_rows(patches, patches.rows());
}

ag::Var StyleDiscriminator::prob(const ag::Var& motion) const { return ag::softmax_rows(logits(motion)); }

Eigen::VectorXd StyleDiscriminator::style_disc_prob(const MotionSequence& m) const {
  m.validate();
  ag::NoGradGuard guard;
  return prob(ag::Var(m.to_double())).value().row(0).transpose();
}

ag::Var style_loss(const ag::Var& motion, int label, const StyleDiscriminator& disc) {
  require(label >= 0 && label < disc.classes(), "style label out of range");
  const ag::Var p = disc.prob(motion);
  const std::vector<int> col{label};
  return ag::scale(ag::log(ag::clamp(ag::gather_cols(p, col), kLogClamp, 1.0)), -1.0);
}

double style_loss(const MotionSequence& m, int label, const StyleDiscriminator& disc) {
  ag::NoGradGuard guard;
  return style_loss(ag::Var(m.to_double()), label, disc).item();
}

TemporalDiscriminator::TemporalDiscriminator(const ModelConfig& cfg, std::uint64_t seed)
    : store_("temporal"), net_([&]() -> PatchDiscriminator {
        nn::Rng rng(seed);
        return PatchDiscriminator(store_, cfg.disc_hidden, 1, rng);
      }()) {}

ag::Var TemporalDiscriminator::scores(const ag::Var& motion) const { return net_(motion); }

std::vector<double> TemporalDiscriminator::temporal_scores(const MotionSequence& m) const {
  m.validate();
  ag::NoGradGuard guard;
  const ag::Var s = scores(ag::Var(m.to_double()));
  return std::vector<double>(s.value().data(), s.value().data() + s.value().size());
}

ag::Var hinge_critic_loss(const ag::Var& real_scores, const ag::Var& fake_scores) {
  const ag::Var real_term = ag::mean(ag::relu(ag::add_scalar(ag::scale(real_scores, -1.0), 1.0)));
  const ag::Var fake_term = ag::mean(ag::relu(ag::add_scalar(fake_scores, 1.0)));
  return ag::add(real_term, fake_term);
}

ag::Var hinge_generator_loss(const ag::Var& fake_scores) { return ag::scale(ag::mean(fake_scores), -1.0); }

}  // namespace styletalk
