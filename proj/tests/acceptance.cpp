// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance [--only N[,N...]] [--cli PATH] [--work DIR]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"
#include "styletalk/formats.hpp"
#include "styletalk/metrics.hpp"
#include "styletalk/style_encoder.hpp"

namespace fs = std::filesystem;
using namespace styletalk;
using testsupport::random_matrix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path g_work;
std::string g_cli = STYLETALK_CLI_PATH;

// --- 1: simplex ---------------------------------------------------------------

Outcome simplex_suite() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 32), len(1, 40), kern(1, 16);
  std::uniform_real_distribution<double> scale(0.01, 50.0);
  double worst_sum = 0.0, min_entry = 1.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = dim(rng);
    const double sc = scale(rng);
    StyleTokenMatrix h{random_matrix(len(rng), d, rng, sc)};
    PoolingWeights pw{random_matrix(1, d, rng, 1.0)};
    const Eigen::VectorXd alpha = pooling_weights(h, pw);
    worst_sum = std::max(worst_sum, std::abs(alpha.sum() - 1.0));
    min_entry = std::min(min_entry, alpha.minCoeff());

    nn::ParamStore store;
    const KernelAttention ka = make_kernel_attention(store, "ka", d, kern(rng), rng);
    StyleCode s{random_matrix(d, 1, rng, sc).col(0)};
    const Eigen::VectorXd pi = kernel_attention(s, ka);
    worst_sum = std::max(worst_sum, std::abs(pi.sum() - 1.0));
    min_entry = std::min(min_entry, pi.minCoeff());
  }
  return {worst_sum <= 1e-6 && min_entry >= 0.0,
          fmt("2000 vectors, max |sum-1| %.2e, min entry %.2e", worst_sum, min_entry)};
}

// --- 2: blend equivalence -------------------------------------------------------

Outcome blend_suite() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(1, 24), kern(1, 16), act(0, 1);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = dim(rng), in = dim(rng), out = dim(rng), k = kern(rng);
    nn::ParamStore store;
    const KernelBank bank = make_kernel_bank(store, "bank", in, out, k, rng);
    const KernelAttention ka = make_kernel_attention(store, "ka", d, k, rng);
    const Activation g = act(rng) ? Activation::kRelu : Activation::kIdentity;
    const Eigen::VectorXd x = random_matrix(in, 1, rng).col(0);
    const StyleCode s{random_matrix(d, 1, rng, 2.0).col(0)};

    // Oracle: softmax scores by hand, then every kernel applied separately and
    // the outputs blended.
    const Eigen::RowVectorXd logits =
        s.values.transpose() * ka.proj.weight().value() + ka.proj.bias().value();
    const Eigen::RowVectorXd e = (logits.array() - logits.maxCoeff()).exp();
    const Eigen::RowVectorXd pi = e / e.sum();
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(out);
    for (int j = 0; j < k; ++j) {
      MatrixD w(in, out);
      for (int r = 0; r < in; ++r)
        for (int c = 0; c < out; ++c) w(r, c) = bank.weights.value()(j, r * out + c);
      const Eigen::VectorXd yj = w.transpose() * x + bank.biases.value().row(j).transpose();
      expect += pi(j) * yj;
    }
    if (g == Activation::kRelu) expect = expect.cwiseMax(0.0);

    const Eigen::VectorXd got = dynamic_ffn(x, s, bank, ka, g);
    for (int i = 0; i < out; ++i)
      worst = std::max(worst, std::abs(got(i) - expect(i)) / std::max(std::abs(expect(i)), 1e-12));
  }
  return {worst <= 1e-6, fmt("100 triples, worst relative error %.2e", worst)};
}

// --- 3: gradients ---------------------------------------------------------------

std::vector<ag::Var> with_prefix(const nn::ParamStore& store, const std::string& prefix) {
  std::vector<ag::Var> out;
  for (const auto& e : store.entries())
    if (e.name.rfind(prefix, 0) == 0) out.push_back(e.var);
  return out;
}

Outcome gradient_suite() {
  using testsupport::check_gradients;
  RunConfig cfg = testsupport::tiny_config();
  const Corpus corpus = testsupport::tiny_corpus();
  Generator gen(cfg.model, 3);
  SyncDiscriminator sync(cfg.model, 4);
  StyleDiscriminator style(cfg.model, 5);
  TemporalDiscriminator tem(cfg.model, 6);
  const MouthProjector mouth(corpus.basis());
  const LossWeights& w = cfg.train.weights;
  std::mt19937_64 rng(9);

  const CorpusClip& target = corpus.clips[0];
  const ag::Var gt(target.motion.to_double());
  const ag::Var ref(corpus.clips[1].motion.to_double());
  const ag::Var pos(corpus.clips[2].motion.to_double());
  const ag::Var neg(corpus.clips[3].motion.to_double());
  const int window = cfg.model.window;

  std::vector<std::pair<std::string, testsupport::GradReport>> parts;
  auto run = [&](const std::string& name, auto f, std::vector<ag::Var> params) {
    parts.emplace_back(name, check_gradients(f, std::move(params)));
  };

  std::vector<ag::Var> gen_params = gen.params().vars();
  run("rec", [&] { return rec_loss(gt, gen.decode(target.phonemes, gen.style_encoder().encode(ref)), w.mu); },
      gen_params);
  run("triplet",
      [&] {
        const auto& se = gen.style_encoder();
        return triplet_loss(se.encode(ref), se.encode(pos), se.encode(neg), w.gamma);
      },
      with_prefix(gen.params(), "gen.style."));

  ag::Var fake(random_matrix(cfg.train.clip_len, kExprDim, rng, 0.5), true);
  std::vector<ag::Var> sync_params = sync.params().vars();
  sync_params.push_back(fake);
  run("sync", [&] { return sync_loss(fake, target.phonemes, sync, mouth, window); }, sync_params);

  std::vector<ag::Var> style_params = style.params().vars();
  style_params.push_back(fake);
  run("style", [&] { return style_loss(fake, target.style_label, style); }, style_params);

  std::vector<ag::Var> tem_params = tem.params().vars();
  tem_params.push_back(fake);
  run("hinge critic", [&] { return hinge_critic_loss(tem.scores(gt), tem.scores(fake)); }, tem_params);
  run("hinge generator", [&] { return hinge_generator_loss(tem.scores(fake)); }, tem_params);

  run("composite",
      [&] {
        const auto& se = gen.style_encoder();
        const ag::Var sc = se.encode(ref);
        const ag::Var pred = gen.decode(target.phonemes, sc);
        return total_loss(LossVars{rec_loss(gt, pred, w.mu), triplet_loss(sc, se.encode(pos), se.encode(neg), w.gamma),
                                   sync_loss(pred, target.phonemes, sync, mouth, window),
                                   hinge_generator_loss(tem.scores(pred)), style_loss(pred, target.style_label, style)},
                          w);
      },
      gen_params);

  testsupport::GradReport all;
  std::string detail;
  bool each = true;
  for (const auto& [name, r] : parts) {
    all.merge(r);
    each = each && r.checked > 0 && r.pass_rate() >= 0.99;
    detail += fmt("%s %ld/%ld; ", name.c_str(), r.passed, r.checked);
  }
  detail += fmt("overall %.4f%% within 1e-4", 100.0 * all.pass_rate());
  return {each && all.pass_rate() >= 0.99, detail};
}

// --- 4 and 8: overfit -------------------------------------------------------------

Corpus overfit_corpus() {
  CorpusOptions o;
  o.seed = 7;
  o.n_styles = 2;
  o.clips_per_style = 4;
  o.held_out_per_style = 0;
  return gen_corpus(o).corpus;
}

RunConfig overfit_config(const Corpus& c) {
  RunConfig cfg = desk_config();
  cfg.model.n_styles = c.n_styles;
  cfg.model.vocab = c.vocab;
  cfg.train.clip_len = c.clip_len;
  cfg.train.pretrain_steps = 100;
  return cfg;
}

struct Critics {
  std::shared_ptr<SyncDiscriminator> sync;
  std::shared_ptr<StyleDiscriminator> style;
};

Critics pretrain_critics(const RunConfig& cfg, const Corpus& corpus) {
  Critics c{std::make_shared<SyncDiscriminator>(cfg.model, cfg.train.seed + 101),
            std::make_shared<StyleDiscriminator>(cfg.model, cfg.train.seed + 202)};
  pretrain_sync_disc(*c.sync, corpus, cfg.train, cfg.model.window);
  pretrain_style_disc(*c.style, corpus, cfg.train);
  return c;
}

struct OverfitRun {
  double before = 0.0, after = 0.0;
  std::vector<StepRecord> records;
  Checkpoint final;
  bool finite = true;
};

OverfitRun overfit(const RunConfig& cfg, const Corpus& corpus, const Critics& critics, int steps) {
  Trainer trainer(cfg, corpus, critics.sync, critics.style);
  const std::vector<int> all = corpus.indices(false);
  OverfitRun r;
  r.before = trainer.eval_rec(all);
  for (int s = 0; s < steps; ++s) {
    r.records.push_back(trainer.step());
    r.finite = r.finite && std::isfinite(r.records.back().total);
  }
  r.after = trainer.eval_rec(all);
  r.final = trainer.checkpoint();
  return r;
}

bool same_records(const std::vector<StepRecord>& a, const std::vector<StepRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.step != y.step || x.rec != y.rec || x.trip != y.trip || x.sync != y.sync || x.tem != y.tem ||
        x.style != y.style || x.total != y.total || x.critic != y.critic)
      return false;
  }
  return true;
}

constexpr int kOverfitSteps = 300;
OverfitRun g_first_run;
Critics g_overfit_critics;

Outcome overfit_suite() {
  const Corpus corpus = overfit_corpus();
  const RunConfig cfg = overfit_config(corpus);
  g_overfit_critics = pretrain_critics(cfg, corpus);
  g_first_run = overfit(cfg, corpus, g_overfit_critics, kOverfitSteps);
  // The second run repeats everything, critic pretraining included.
  const Critics again = pretrain_critics(cfg, corpus);
  const OverfitRun second = overfit(cfg, corpus, again, kOverfitSteps);

  const double drop = 1.0 - g_first_run.after / g_first_run.before;
  const bool identical = same_records(g_first_run.records, second.records) && g_first_run.final == second.final &&
                         g_first_run.before == second.before && g_first_run.after == second.after;
  return {drop >= 0.9 && identical,
          fmt("8 clips, rec %.4f -> %.4f (%.1f%% drop), two runs %s", g_first_run.before, g_first_run.after,
              100.0 * drop, identical ? "bit-identical" : "DIFFER")};
}

Outcome ablation_suite() {
  const Corpus corpus = overfit_corpus();
  const RunConfig base = overfit_config(corpus);
  if (!g_overfit_critics.sync) g_overfit_critics = pretrain_critics(base, corpus);
  struct Variant {
    std::string name;
    int kernels;
    bool dynamic;
  };
  const std::vector<Variant> variants = {{"K=1", 1, true}, {"K=4", 4, true}, {"K=8", 8, true},
                                         {"K=16", 16, true}, {"static", 8, false}};
  bool ok = base.model.kernels == 8 && base.model.dynamic_ffn;
  std::string detail;
  for (const auto& v : variants) {
    OverfitRun r;
    std::string status;
    if (v.kernels == 8 && v.dynamic && !g_first_run.records.empty()) {
      r = g_first_run;
    } else {
      RunConfig cfg = base;
      cfg.model.kernels = v.kernels;
      cfg.model.dynamic_ffn = v.dynamic;
      try {
        r = overfit(cfg, corpus, g_overfit_critics, kOverfitSteps);
      } catch (const NumericError& e) {
        r.finite = false;
        status = e.what();
      }
    }
    const bool good = r.finite && std::isfinite(r.after);
    ok = ok && good;
    detail += fmt("%s rec %.3f->%.3f%s; ", v.name.c_str(), r.before, r.after, good ? "" : " NUMERIC FAILURE");
  }
  return {ok, detail + "default K=8"};
}

// --- 5: sync learnability ------------------------------------------------------------

Outcome sync_suite() {
  CorpusOptions o;
  o.seed = 11;
  o.n_styles = 4;
  o.clips_per_style = 10;
  o.noise_scale = 0.0;
  const Corpus corpus = gen_corpus(o).corpus;
  RunConfig cfg = desk_config();
  cfg.model.n_styles = corpus.n_styles;
  cfg.model.vocab = corpus.vocab;
  SyncDiscriminator disc(cfg.model, cfg.train.seed + 101);
  const PretrainReport r = pretrain_sync_disc(disc, corpus, cfg.train, cfg.model.window);
  return {r.held_out_metric >= 0.9 && r.held_out_count >= 2,
          fmt("noise-free corpus, %d steps, loss %.3f -> %.3f, held-out AUC %.4f over %d clips", r.steps,
              r.first_loss, r.last_loss, r.held_out_metric, r.held_out_count)};
}

// --- 6: style separability -------------------------------------------------------------

constexpr int kStyleTrainSteps = 600;

Outcome style_suite() {
  CorpusOptions o;
  o.seed = 12;
  o.n_styles = 4;
  o.clips_per_style = 20;
  const Corpus corpus = gen_corpus(o).corpus;
  RunConfig cfg = desk_config();
  cfg.model.n_styles = corpus.n_styles;
  cfg.model.vocab = corpus.vocab;
  cfg.train.pretrain_steps = 300;
  const Critics critics = pretrain_critics(cfg, corpus);
  Trainer trainer(cfg, corpus, critics.sync, critics.style);
  const std::vector<int> held = corpus.indices(true), train = corpus.indices(false);
  auto codes = [&](const std::vector<int>& idx, std::vector<int>& labels) {
    MatrixD m(static_cast<Eigen::Index>(idx.size()), cfg.model.d_model);
    labels.clear();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      m.row(static_cast<Eigen::Index>(i)) =
          trainer.generator().extract_style(corpus.clips[idx[i]].motion).values.transpose();
      labels.push_back(corpus.clips[idx[i]].style_label);
    }
    return m;
  };
  std::vector<int> held_labels, train_labels;
  auto measure = [&](double& acc, double& sil) {
    const MatrixD held_codes = codes(held, held_labels);
    const MatrixD train_codes = codes(train, train_labels);
    acc = nearest_centroid_accuracy(train_codes, train_labels, held_codes, held_labels);
    sil = silhouette_score(held_codes, held_labels);
  };
  double acc0 = 0.0, sil0 = 0.0, acc = 0.0, sil = 0.0;
  measure(acc0, sil0);
  for (int s = 0; s < kStyleTrainSteps; ++s) trainer.step();
  measure(acc, sil);
  return {acc >= 0.9 && sil > 0.2,
          fmt("%d steps, %zu held-out clips: nearest-centroid %.3f, silhouette %.3f (untrained %.3f, %.3f)",
              kStyleTrainSteps, held.size(), acc, sil, acc0, sil0)};
}

// --- 7: interpolation endpoints via the CLI ---------------------------------------------

int sh(const std::string& cmd) {
  const std::string full = cmd + " > \"" + (g_work / "cli.log").string() + "\" 2>&1";
  return std::system(full.c_str());
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

Outcome interpolation_suite() {
  const fs::path dir = g_work / "interp";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = q(g_cli);
  const std::string small = " --steps 20 --pretrain_steps 20 --clip_len 32 --d_model 16 --heads 2 --ffn_hidden 32";
  const std::vector<std::string> cmds = {
      cli + " gen-data --seed 3 --styles 2 --clips-per-style 3 --clip-len 32 --out " + q(dir / "data"),
      cli + " pretrain --data " + q(dir / "data") + " --which sync --out " + q(dir / "sync.ckpt") + small,
      cli + " pretrain --data " + q(dir / "data") + " --which style --out " + q(dir / "style.ckpt") + small,
      cli + " train --data " + q(dir / "data") + " --sync-ckpt " + q(dir / "sync.ckpt") + " --style-ckpt " +
          q(dir / "style.ckpt") + " --out " + q(dir / "run") + small,
  };
  for (const auto& c : cmds)
    if (sh(c) != 0) return {false, "command failed: " + c};

  const Corpus corpus = read_corpus(dir / "data");
  const std::string ckpt = q(dir / "run" / "model.ckpt");
  const std::string clip_a = corpus.clips[0].id, clip_b = corpus.clips.back().id;
  const fs::path clips = dir / "data" / "clips";
  const fs::path phon = clips / (clip_a + ".json");
  std::vector<std::string> steps = {
      cli + " extract-style --ckpt " + ckpt + " --motion " + q(clips / (clip_a + ".mvec")) + " --out " + q(dir / "a.json"),
      cli + " extract-style --ckpt " + ckpt + " --motion " + q(clips / (clip_b + ".mvec")) + " --out " + q(dir / "b.json"),
      cli + " infer --ckpt " + ckpt + " --phonemes " + q(phon) + " --style " + q(dir / "a.json") + " --out " +
          q(dir / "infer_a.mvec"),
      cli + " infer --ckpt " + ckpt + " --phonemes " + q(phon) + " --style " + q(dir / "b.json") + " --out " +
          q(dir / "infer_b.mvec"),
  };
  for (const char* alpha : {"0", "1", "0.5"})
    steps.push_back(cli + " interpolate --ckpt " + ckpt + " --style-a " + q(dir / "a.json") + " --style-b " +
                    q(dir / "b.json") + " --alpha " + alpha + " --phonemes " + q(phon) + " --out " +
                    q(dir / (std::string("mix_") + alpha + ".mvec")) + " --code-out " +
                    q(dir / (std::string("mix_") + alpha + ".json")));
  for (const auto& c : steps)
    if (sh(c) != 0) return {false, "command failed: " + c};

  const bool end0 = read_file_bytes(dir / "mix_0.mvec") == read_file_bytes(dir / "infer_a.mvec");
  const bool end1 = read_file_bytes(dir / "mix_1.mvec") == read_file_bytes(dir / "infer_b.mvec");
  const StyleCode a = read_style_code(dir / "a.json"), b = read_style_code(dir / "b.json");
  const StyleCode mid = read_style_code(dir / "mix_0.5.json");
  double worst = 0.0;
  for (int i = 0; i < a.dim(); ++i) worst = std::max(worst, std::abs(mid.values(i) - 0.5 * (a.values(i) + b.values(i))));
  const bool differ = !(a == b);
  return {end0 && end1 && worst <= 1e-7 && differ,
          fmt("alpha=0 %s, alpha=1 %s, midpoint max error %.2e", end0 ? "bit-identical" : "DIFFERS",
              end1 ? "bit-identical" : "DIFFERS", worst)};
}

// --- 9: round trips --------------------------------------------------------------------

Outcome roundtrip_suite() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> frames(1, 50), small(2, 4);
  std::uniform_real_distribution<float> fps(1.0f, 120.0f);
  int motion_ok = 0, corpus_ok = 0, ckpt_ok = 0;
  const fs::path dir = g_work / "roundtrip";
  fs::create_directories(dir);
  for (int i = 0; i < 100; ++i) {
    const MotionSequence m(random_matrix(frames(rng), kExprDim, rng, 2.0).cast<float>(), fps(rng));
    write_motion(dir / "m.mvec", m);
    if (read_motion(dir / "m.mvec") == m && decode_motion(encode_motion(m)) == m) ++motion_ok;

    CorpusOptions o;
    o.seed = rng();
    o.n_styles = small(rng);
    o.clips_per_style = small(rng) + 1;
    o.clip_len = 8 + frames(rng) % 16;
    o.basis_vertices = 64;
    o.held_out_per_style = 1;
    const Corpus c = gen_corpus(o).corpus;
    fs::remove_all(dir / "corpus");
    write_corpus(dir / "corpus", c);
    if (read_corpus(dir / "corpus") == c) ++corpus_ok;

    RunConfig cfg = testsupport::tiny_config();
    cfg.model.kernels = small(rng);
    cfg.train.seed = rng();
    Generator gen(cfg.model, cfg.train.seed);
    Checkpoint ck;
    ck.kind = "model";
    ck.config = cfg.to_json();
    ck.state = {{"step", i}, {"note", "random"}};
    ck.add(gen.params());
    save_checkpoint(dir / "m.ckpt", ck);
    const Checkpoint back = load_checkpoint(dir / "m.ckpt");
    Generator fresh(cfg.model, cfg.train.seed + 1);
    back.restore(fresh.params());
    bool same = back == ck;
    for (std::size_t k = 0; same && k < gen.params().entries().size(); ++k)
      same = (gen.params().entries()[k].var.value().array() == fresh.params().entries()[k].var.value().array()).all();
    if (same) ++ckpt_ok;
  }
  return {motion_ok == 100 && corpus_ok == 100 && ckpt_ok == 100,
          fmt("motion %d/100, corpus %d/100, checkpoint %d/100 bit-exact", motion_ok, corpus_ok, ckpt_ok)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  g_work = fs::temp_directory_path() / "styletalk_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else if (a == "--cli" && i + 1 < argc) {
      g_cli = argv[++i];
    } else if (a == "--work" && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only N,...] [--cli PATH] [--work DIR]\n");
      return 2;
    }
  }
  fs::create_directories(g_work);

  const std::vector<Criterion> criteria = {
      {1, "simplex", 10, simplex_suite},
      {2, "blend equivalence", 10, blend_suite},
      {3, "gradients", 300, gradient_suite},
      {4, "overfit", 600, overfit_suite},
      {5, "sync learnability", 600, sync_suite},
      {6, "style separability", 1800, style_suite},
      {7, "interpolation endpoints", 600, interpolation_suite},
      {8, "ablation smoke", 3000, ablation_suite},
      {9, "round trips", 600, roundtrip_suite},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = out.pass && in_time;
    if (!pass) ++failed;
    std::printf("criterion %d %-24s %s  %s [%.1fs%s]\n", c.id, c.name, pass ? "PASS" : "FAIL", out.detail.c_str(),
                secs, in_time ? "" : ", over time limit");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
