#include "styletalk/training.hpp"

#include <algorithm>
#include <cmath>

#include "styletalk/metrics.hpp"

namespace styletalk {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTemporalSeedOffset = 303;
constexpr int kSyncFramesPerClip = 16;

MotionSequence crop_motion(const MotionSequence& m, int start, int len) {
  return MotionSequence(m.frames.middleRows(start, len), m.fps);
}

PhonemeSequence crop_phonemes(const PhonemeSequence& p, int start, int len) {
  PhonemeSequence out = p;
  out.labels.assign(p.labels.begin() + start, p.labels.begin() + start + len);
  return out;
}

int uniform_index(nn::Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<int>(0, static_cast<int>(n) - 1)(rng);
}

nn::AdamOptions adam_options(const TrainConfig& t, double lr) {
  return {lr, t.adam_beta1, t.adam_beta2, t.adam_eps};
}

}  // namespace

TripletSample sample_triplet(const Corpus& corpus, std::span<const int> pool, int style, nn::Rng& rng,
                             int exclude) {
  std::vector<int> same, other;
  for (int i : pool) {
    require(i >= 0 && static_cast<std::size_t>(i) < corpus.clips.size(), "triplet pool index out of range");
    (corpus.clips[i].style_label == style ? same : other).push_back(i);
  }
  if (same.size() < 2)
    throw DataError("style " + std::to_string(style) + " has fewer than 2 clips; cannot sample a positive");
  if (other.empty()) throw DataError("no clip of another style; cannot sample a negative");

  std::vector<int> anchors;
  for (int i : same)
    if (i != exclude) anchors.push_back(i);
  if (anchors.empty()) throw DataError("style " + std::to_string(style) + " has no clip besides the target");

  TripletSample t;
  t.style_clip = anchors[uniform_index(rng, anchors.size())];
  std::vector<int> positives;
  for (int i : same)
    if (i != t.style_clip) positives.push_back(i);
  t.positive = positives[uniform_index(rng, positives.size())];
  t.negative = other[uniform_index(rng, other.size())];
  return t;
}

json StepRecord::to_json() const {
  return {{"step", step}, {"rec", rec},     {"trip", trip},   {"sync", sync},
          {"tem", tem},   {"style", style}, {"total", total}, {"critic", critic}};
}

Trainer::Trainer(const RunConfig& cfg, const Corpus& corpus, std::shared_ptr<SyncDiscriminator> sync,
                 std::shared_ptr<StyleDiscriminator> style_disc)
    : cfg_(cfg),
      corpus_(corpus),
      pool_(corpus.indices(false)),
      sync_(std::move(sync)),
      style_disc_(std::move(style_disc)),
      gen_(std::make_unique<Generator>(cfg.model, cfg.train.seed)),
      temporal_(std::make_unique<TemporalDiscriminator>(cfg.model, cfg.train.seed + kTemporalSeedOffset)),
      mouth_(corpus.basis()),
      gen_opt_(gen_->params().vars(), adam_options(cfg.train, cfg.train.lr)),
      tem_opt_(temporal_->params().vars(), adam_options(cfg.train, cfg.train.disc_lr)),
      rng_(cfg.train.seed * 0x2545F4914F6CDD1Dull + 7) {
  cfg_.validate();
  require(sync_ && style_disc_, "trainer needs both pretrained critics");
  require(style_disc_->classes() == cfg_.model.n_styles, "style critic class count differs from n_styles");
  require(corpus.n_styles == cfg_.model.n_styles, "corpus style count differs from n_styles");
  require(corpus.vocab == cfg_.model.vocab, "corpus vocabulary differs from the model vocabulary");
  require(corpus.clip_len >= cfg_.train.clip_len, "corpus clips are shorter than clip_len");
  require(!(corpus.split != cfg_.model.face_split()), "corpus face split differs from the model");
  if (pool_.empty()) throw DataError("corpus has no training clips");
  sync_->params().set_trainable(false);
  style_disc_->params().set_trainable(false);
}

StepRecord Trainer::step() {
  const int batch = cfg_.train.batch_size;
  const int len = cfg_.train.clip_len;
  const LossWeights& w = cfg_.train.weights;
  const double inv = 1.0 / batch;

  std::vector<ag::Var> rec, trip, sync, tem, style, real, fake;
  for (int b = 0; b < batch; ++b) {
    const int target = pool_[uniform_index(rng_, pool_.size())];
    const CorpusClip& clip = corpus_.clips[target];
    const TripletSample t = sample_triplet(corpus_, pool_, clip.style_label, rng_, target);
    const int start = uniform_index(rng_, static_cast<std::size_t>(clip.motion.size() - len + 1));
    const PhonemeSequence phon = crop_phonemes(clip.phonemes, start, len);
    const ag::Var gt(crop_motion(clip.motion, start, len).to_double());

    const StyleEncoder& enc = gen_->style_encoder();
    const ag::Var s_c = enc.encode(ag::Var(corpus_.clips[t.style_clip].motion.to_double()));
    const ag::Var s_p = enc.encode(ag::Var(corpus_.clips[t.positive].motion.to_double()));
    const ag::Var s_n = enc.encode(ag::Var(corpus_.clips[t.negative].motion.to_double()));
    const ag::Var pred = gen_->decode(phon, s_c);

    rec.push_back(rec_loss(gt, pred, w.mu));
    trip.push_back(triplet_loss(s_c, s_p, s_n, w.gamma));
    sync.push_back(sync_loss(pred, phon, *sync_, mouth_, cfg_.model.window));
    style.push_back(style_loss(pred, clip.style_label, *style_disc_));
    tem.push_back(hinge_generator_loss(temporal_->scores(pred)));
    real.push_back(gt);
    fake.push_back(ag::detach(pred));
  }
  auto batch_mean = [&](const std::vector<ag::Var>& parts) {
    ag::Var acc = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) acc = ag::add(acc, parts[i]);
    return ag::scale(acc, inv);
  };
  const LossVars parts{batch_mean(rec), batch_mean(trip), batch_mean(sync), batch_mean(tem), batch_mean(style)};
  const ag::Var total = total_loss(parts, w);

  StepRecord r;
  r.step = step_;
  r.rec = parts.rec.item();
  r.trip = parts.trip.item();
  r.sync = parts.sync.item();
  r.tem = parts.tem.item();
  r.style = parts.style.item();
  r.total = total.item();

  ag::backward(total);
  gen_opt_.step();

  // Critic update on real clips against the detached generator output.
  temporal_->params().zero_grad();
  std::vector<ag::Var> critic_parts;
  for (int b = 0; b < batch; ++b)
    critic_parts.push_back(hinge_critic_loss(temporal_->scores(real[b]), temporal_->scores(fake[b])));
  const ag::Var critic = batch_mean(critic_parts);
  r.critic = critic.item();
  if (!std::isfinite(r.critic)) throw NumericError("critic", "temporal critic loss is " + std::to_string(r.critic));
  ag::backward(critic);
  tem_opt_.step();

  ++step_;
  return r;
}

double Trainer::eval_rec(std::span<const int> clips) const {
  require(!clips.empty(), "eval_rec needs at least one clip");
  ag::NoGradGuard guard;
  const int len = cfg_.train.clip_len;
  double acc = 0.0;
  for (std::size_t k = 0; k < clips.size(); ++k) {
    const CorpusClip& clip = corpus_.clips[clips[k]];
    int ref = clips[k];
    for (std::size_t j = 1; j < clips.size(); ++j) {
      const int cand = clips[(k + j) % clips.size()];
      if (corpus_.clips[cand].style_label == clip.style_label) {
        ref = cand;
        break;
      }
    }
    const ag::Var s = gen_->style_encoder().encode(ag::Var(corpus_.clips[ref].motion.to_double()));
    const ag::Var pred = gen_->decode(crop_phonemes(clip.phonemes, 0, len), s);
    acc += rec_loss(ag::Var(crop_motion(clip.motion, 0, len).to_double()), pred, cfg_.train.weights.mu).item();
  }
  return acc / static_cast<double>(clips.size());
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.kind = "model";
  c.config = cfg_.to_json();
  c.state = {{"step", step_}, {"corpus_seed", corpus_.seed}};
  c.add(gen_->params());
  c.add(temporal_->params());
  c.add(sync_->params());
  c.add(style_disc_->params());
  return c;
}

// --- sync pretraining --------------------------------------------------------

namespace {

struct SyncBatch {
  std::vector<int> frame_clip, frame_index;  // where each mouth frame comes from
  std::vector<int> windows;                  // concatenated phoneme windows
  std::vector<double> labels;
};

void add_sync_example(SyncBatch& batch, const Corpus& corpus, std::span<const int> pool, int clip, int t,
                      bool positive, int w, nn::Rng& rng, bool cross) {
  const CorpusClip& c = corpus.clips[clip];
  const int len = c.motion.size();
  int src_clip = clip, src_t = t;
  if (!positive) {
    if (cross) {
      do src_clip = pool[uniform_index(rng, pool.size())];
      while (src_clip == clip);
      src_t = uniform_index(rng, corpus.clips[src_clip].phonemes.size());
    } else {
      // Offsets of at least 2w+1 frames in either direction.
      const int gap = 2 * w + 1;
      std::vector<int> candidates;
      for (int u = 0; u < len; ++u)
        if (std::abs(u - t) >= gap) candidates.push_back(u);
      src_t = candidates[uniform_index(rng, candidates.size())];
    }
  }
  batch.frame_clip.push_back(clip);
  batch.frame_index.push_back(t);
  const std::vector<int> win = extract_window(corpus.clips[src_clip].phonemes, src_t, w);
  batch.windows.insert(batch.windows.end(), win.begin(), win.end());
  batch.labels.push_back(positive ? 1.0 : 0.0);
}

ag::Var sync_batch_prob(const SyncDiscriminator& disc, const MouthProjector& mouth, const Corpus& corpus,
                        const SyncBatch& batch) {
  MatrixD frames(static_cast<Eigen::Index>(batch.frame_clip.size()), kExprDim);
  for (std::size_t i = 0; i < batch.frame_clip.size(); ++i)
    frames.row(static_cast<Eigen::Index>(i)) =
        corpus.clips[batch.frame_clip[i]].motion.frames.row(batch.frame_index[i]).cast<double>();
  return disc.sync_prob(mouth(ag::Var(frames)), mouth.mouth_vertices(), batch.windows);
}

void require_sync_corpus(const Corpus& corpus, std::span<const int> pool, int w) {
  if (pool.size() < 2) throw DataError("sync pretraining needs at least 2 clips for cross-clip negatives");
  for (int i : pool)
    if (corpus.clips[i].motion.size() < 4 * w + 2)
      throw DataError("clip " + corpus.clips[i].id + " is too short for shifted negatives (needs 4w+2 frames)");
}

}  // namespace

PretrainReport pretrain_sync_disc(SyncDiscriminator& disc, const Corpus& corpus, const TrainConfig& cfg, int w) {
  const std::vector<int> pool = corpus.indices(false);
  require_sync_corpus(corpus, pool, w);
  const MouthProjector mouth(corpus.basis());
  disc.params().set_trainable(true);
  nn::Adam opt(disc.params().vars(), adam_options(cfg, cfg.pretrain_lr));
  nn::Rng rng(cfg.seed * 0x9E3779B97F4A7C15ull + 11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  PretrainReport report;
  for (int step = 0; step < cfg.pretrain_steps; ++step) {
    SyncBatch batch;
    for (int b = 0; b < cfg.pretrain_batch; ++b) {
      const int clip = pool[uniform_index(rng, pool.size())];
      for (int f = 0; f < kSyncFramesPerClip; ++f) {
        const int t = uniform_index(rng, corpus.clips[clip].motion.size());
        const bool positive = unit(rng) < 0.5;
        const bool cross = unit(rng) < 0.5;
        add_sync_example(batch, corpus, pool, clip, t, positive, w, rng, cross);
      }
    }
    const ag::Var p = sync_batch_prob(disc, mouth, corpus, batch);
    const MatrixD y = Eigen::Map<const MatrixD>(batch.labels.data(), p.rows(), 1);
    const ag::Var q = ag::clamp(ag::add_scalar(ag::scale(p, 0.5), 0.5), kLogClamp, 1.0 - kLogClamp);
    const ag::Var pos = ag::mul(ag::Var(y), ag::log(q));
    const ag::Var neg = ag::mul(ag::Var(MatrixD(1.0 - y.array())),
                                ag::log(ag::add_scalar(ag::scale(q, -1.0), 1.0)));
    const ag::Var loss = ag::scale(ag::mean(ag::add(pos, neg)), -1.0);
    const double v = loss.item();
    if (!std::isfinite(v)) throw NumericError("sync", "pretraining loss is " + std::to_string(v));
    if (step == 0) report.first_loss = v;
    report.last_loss = v;
    ag::backward(loss);
    opt.step();
    ++report.steps;
  }
  disc.params().set_trainable(false);

  std::vector<int> held = corpus.indices(true);
  if (held.size() < 2) held = pool;
  report.held_out_count = static_cast<int>(held.size());
  report.held_out_metric = sync_auc(disc, corpus, held, w, cfg.seed + 1);
  return report;
}

double sync_auc(const SyncDiscriminator& disc, const Corpus& corpus, std::span<const int> clips, int w,
                std::uint64_t seed) {
  require_sync_corpus(corpus, clips, w);
  ag::NoGradGuard guard;
  const MouthProjector mouth(corpus.basis());
  nn::Rng rng(seed);
  std::vector<double> pos, neg;
  for (int clip : clips) {
    SyncBatch batch;
    for (int t = 0; t < corpus.clips[clip].motion.size(); ++t) {
      add_sync_example(batch, corpus, clips, clip, t, true, w, rng, false);
      add_sync_example(batch, corpus, clips, clip, t, false, w, rng, false);
      add_sync_example(batch, corpus, clips, clip, t, false, w, rng, true);
    }
    const MatrixD p = sync_batch_prob(disc, mouth, corpus, batch).value();
    for (Eigen::Index i = 0; i < p.rows(); ++i) (batch.labels[i] > 0.5 ? pos : neg).push_back(p(i, 0));
  }
  return pairwise_auc(pos, neg);
}

// --- style pretraining -------------------------------------------------------

PretrainReport pretrain_style_disc(StyleDiscriminator& disc, const Corpus& corpus, const TrainConfig& cfg) {
  const std::vector<int> pool = corpus.indices(false);
  std::vector<bool> present(static_cast<std::size_t>(disc.classes()), false);
  int distinct = 0;
  for (int i : pool) {
    const int label = corpus.clips[i].style_label;
    if (label < 0 || label >= disc.classes()) throw DataError("clip " + corpus.clips[i].id + ": label out of range");
    if (!present[label]) ++distinct;
    present[label] = true;
  }
  if (distinct < 2) throw DataError("style critic pretraining needs clips of at least 2 styles");
  require(corpus.clip_len >= cfg.clip_len, "corpus clips are shorter than clip_len");

  disc.params().set_trainable(true);
  nn::Adam opt(disc.params().vars(), adam_options(cfg, cfg.pretrain_lr));
  nn::Rng rng(cfg.seed * 0xD1B54A32D192ED03ull + 13);
  PretrainReport report;
  for (int step = 0; step < cfg.pretrain_steps; ++step) {
    ag::Var acc;
    for (int b = 0; b < cfg.pretrain_batch; ++b) {
      const CorpusClip& clip = corpus.clips[pool[uniform_index(rng, pool.size())]];
      const int start = uniform_index(rng, static_cast<std::size_t>(clip.motion.size() - cfg.clip_len + 1));
      const ag::Var l =
          style_loss(ag::Var(crop_motion(clip.motion, start, cfg.clip_len).to_double()), clip.style_label, disc);
      acc = acc.defined() ? ag::add(acc, l) : l;
    }
    const ag::Var loss = ag::scale(acc, 1.0 / cfg.pretrain_batch);
    const double v = loss.item();
    if (!std::isfinite(v)) throw NumericError("style", "pretraining loss is " + std::to_string(v));
    if (step == 0) report.first_loss = v;
    report.last_loss = v;
    ag::backward(loss);
    opt.step();
    ++report.steps;
  }
  disc.params().set_trainable(false);

  std::vector<int> held = corpus.indices(true);
  if (held.empty()) held = pool;
  report.held_out_count = static_cast<int>(held.size());
  report.held_out_metric = style_accuracy(disc, corpus, held, cfg.clip_len);
  return report;
}

double style_accuracy(const StyleDiscriminator& disc, const Corpus& corpus, std::span<const int> clips,
                      int clip_len) {
  require(!clips.empty(), "style_accuracy needs at least one clip");
  int correct = 0;
  for (int i : clips) {
    const CorpusClip& clip = corpus.clips[i];
    const Eigen::VectorXd p = disc.style_disc_prob(crop_motion(clip.motion, 0, clip_len));
    Eigen::Index best = 0;
    p.maxCoeff(&best);
    correct += best == clip.style_label;
  }
  return static_cast<double>(correct) / static_cast<double>(clips.size());
}

// --- checkpoints -------------------------------------------------------------

Checkpoint critic_checkpoint(const SyncDiscriminator& disc, const RunConfig& cfg) {
  Checkpoint c;
  c.kind = "sync";
  c.frozen = true;
  c.config = cfg.to_json();
  c.add(disc.params());
  return c;
}

Checkpoint critic_checkpoint(const StyleDiscriminator& disc, const RunConfig& cfg) {
  Checkpoint c;
  c.kind = "style";
  c.frozen = true;
  c.config = cfg.to_json();
  c.add(disc.params());
  return c;
}

RunConfig checkpoint_config(const Checkpoint& ckpt) {
  try {
    RunConfig cfg = RunConfig::from_json(ckpt.config);
    cfg.validate();
    return cfg;
  } catch (const ContractError& e) {
    throw CheckpointError("config", e.what());
  }
}

std::unique_ptr<Generator> load_generator(const Checkpoint& ckpt) {
  const RunConfig cfg = checkpoint_config(ckpt);
  auto gen = std::make_unique<Generator>(cfg.model, cfg.train.seed);
  ckpt.restore(gen->params());
  gen->params().set_trainable(false);
  return gen;
}

std::shared_ptr<SyncDiscriminator> load_sync_disc(const Checkpoint& ckpt) {
  auto disc = std::make_shared<SyncDiscriminator>(checkpoint_config(ckpt).model, 0);
  ckpt.restore(disc->params());
  disc->params().set_trainable(false);
  return disc;
}

std::shared_ptr<StyleDiscriminator> load_style_disc(const Checkpoint& ckpt) {
  auto disc = std::make_shared<StyleDiscriminator>(checkpoint_config(ckpt).model, 0);
  ckpt.restore(disc->params());
  disc->params().set_trainable(false);
  return disc;
}

}  // namespace styletalk
