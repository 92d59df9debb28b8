// styletalk: command-line front end for data generation, critic pretraining,
// training, style extraction, inference and evaluation.
//
// Exit codes: 0 success, 1 numeric failure, 2 bad flags or arguments,
// 3 I/O, format, data or checkpoint errors.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "styletalk/formats.hpp"
#include "styletalk/metrics.hpp"
#include "styletalk/training.hpp"

namespace fs = std::filesystem;
using namespace styletalk;
using nlohmann::json;

namespace {

constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

void require_file(const std::string& path, const std::string& flag) {
  if (!fs::is_regular_file(path)) throw IoError(flag + ": no such file: " + path);
}

void require_dir(const std::string& path, const std::string& flag) {
  if (!fs::is_directory(path)) throw IoError(flag + ": no such directory: " + path);
}

void prepare_output_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create " + parent.string() + ": " + ec.message());
}

// One `--<key>` flag per config key, applied on top of --config.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run config (defaults to the desk-scale config)");
    for (const std::string& key : RunConfig::keys())
      cmd->add_option("--" + key, overrides[key], "override config key " + key);
  }

  RunConfig resolve(const Corpus& corpus) const {
    RunConfig cfg = desk_config();
    if (!config_path.empty()) {
      require_file(config_path, "--config");
      cfg = RunConfig::load(config_path);
    }
    for (const auto& [key, value] : overrides)
      if (!value.empty()) cfg.set(key, value);
    cfg.model.n_styles = corpus.n_styles;
    cfg.model.vocab = corpus.vocab;
    cfg.validate();
    return cfg;
  }
};

Eigen::VectorXd interpolate_codes(const StyleCode& a, const StyleCode& b, double alpha) {
  return (1.0 - alpha) * a.values + alpha * b.values;
}

std::vector<int> all_indices(const Corpus& c) {
  std::vector<int> out(c.clips.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
  return out;
}

MatrixD style_codes(const Generator& gen, const Corpus& corpus, std::span<const int> clips) {
  MatrixD codes(static_cast<Eigen::Index>(clips.size()), gen.config().d_model);
  for (std::size_t i = 0; i < clips.size(); ++i)
    codes.row(static_cast<Eigen::Index>(i)) = gen.extract_style(corpus.clips[clips[i]].motion).values.transpose();
  return codes;
}

std::vector<int> labels_of(const Corpus& corpus, std::span<const int> clips) {
  std::vector<int> out;
  for (int i : clips) out.push_back(corpus.clips[i].style_label);
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Stylized audio-driven facial motion generation at desk scale"};
  app.require_subcommand(1);

  // gen-data
  CorpusOptions gen_opts;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic stylized corpus");
  gen->add_option("--seed", gen_opts.seed, "generator seed");
  gen->add_option("--styles", gen_opts.n_styles, "number of styles (>= 2)");
  gen->add_option("--clips-per-style", gen_opts.clips_per_style, "clips per style (>= 2)");
  gen->add_option("--clip-len", gen_opts.clip_len, "frames per clip");
  gen->add_option("--vocab", gen_opts.vocab, "phoneme vocabulary size");
  gen->add_option("--vertices", gen_opts.basis_vertices, "face basis vertices (>= 64)");
  gen->add_option("--noise", gen_opts.noise_scale, "Gaussian noise scale (0 = noise-free)");
  gen->add_option("--held-out", gen_opts.held_out_per_style, "held-out clips per style (default 20%)");
  gen->add_option("--out", gen_out, "output directory")->required();

  // pretrain
  std::string pre_data, pre_which, pre_out;
  ConfigFlags pre_cfg;
  auto* pre = app.add_subcommand("pretrain", "pretrain and freeze the sync or style critic");
  pre->add_option("--data", pre_data, "corpus directory")->required();
  pre->add_option("--which", pre_which, "critic to train")->required()->check(CLI::IsMember({"sync", "style"}));
  pre->add_option("--out", pre_out, "checkpoint file")->required();
  pre_cfg.attach(pre);

  // train
  std::string tr_data, tr_sync, tr_style, tr_out;
  ConfigFlags tr_cfg;
  auto* tr = app.add_subcommand("train", "train the generator against the frozen critics");
  tr->add_option("--data", tr_data, "corpus directory")->required();
  tr->add_option("--sync-ckpt", tr_sync, "pretrained sync critic")->required();
  tr->add_option("--style-ckpt", tr_style, "pretrained style critic")->required();
  tr->add_option("--out", tr_out, "output directory (model.ckpt, loss_log.jsonl)")->required();
  tr_cfg.attach(tr);

  // extract-style
  std::string ex_ckpt, ex_motion, ex_out;
  auto* ex = app.add_subcommand("extract-style", "extract a style code from a motion file");
  ex->add_option("--ckpt", ex_ckpt, "model checkpoint")->required();
  ex->add_option("--motion", ex_motion, "reference motion (.mvec)")->required();
  ex->add_option("--out", ex_out, "style code file (.json)")->required();

  // infer
  std::string in_ckpt, in_phon, in_style, in_out;
  auto* inf = app.add_subcommand("infer", "generate motion from phonemes and a style code");
  inf->add_option("--ckpt", in_ckpt, "model checkpoint")->required();
  inf->add_option("--phonemes", in_phon, "phoneme file (.json)")->required();
  inf->add_option("--style", in_style, "style code file")->required();
  inf->add_option("--out", in_out, "motion file (.mvec)")->required();

  // interpolate
  std::string ip_ckpt, ip_a, ip_b, ip_phon, ip_out, ip_code;
  double ip_alpha = 0.5;
  auto* ip = app.add_subcommand("interpolate", "generate with a blend of two style codes");
  ip->add_option("--ckpt", ip_ckpt, "model checkpoint")->required();
  ip->add_option("--style-a", ip_a, "first style code")->required();
  ip->add_option("--style-b", ip_b, "second style code")->required();
  ip->add_option("--alpha", ip_alpha, "blend weight of style b")->required()->check(CLI::Range(0.0, 1.0));
  ip->add_option("--phonemes", ip_phon, "phoneme file")->required();
  ip->add_option("--out", ip_out, "motion file (.mvec)")->required();
  ip->add_option("--code-out", ip_code, "also write the blended style code here");

  // eval
  std::string ev_ckpt, ev_data, ev_report;
  auto* ev = app.add_subcommand("eval", "evaluate a trained model on the held-out split");
  ev->add_option("--ckpt", ev_ckpt, "model checkpoint")->required();
  ev->add_option("--data", ev_data, "corpus directory")->required();
  ev->add_option("--report", ev_report, "report file (.json)")->required();

  // project-styles
  std::string pr_ckpt, pr_data, pr_out;
  auto* pr = app.add_subcommand("project-styles", "2-D principal projection of clip style codes");
  pr->add_option("--ckpt", pr_ckpt, "model checkpoint")->required();
  pr->add_option("--data", pr_data, "corpus directory")->required();
  pr->add_option("--out", pr_out, "table file (.csv)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (gen->parsed()) {
    const SyntheticCorpus sc = gen_corpus(gen_opts);
    write_corpus(gen_out, sc.corpus);
    const Corpus& c = sc.corpus;
    MatrixD stats(static_cast<Eigen::Index>(c.clips.size()), 2 * kExprDim);
    for (std::size_t i = 0; i < c.clips.size(); ++i)
      stats.row(static_cast<Eigen::Index>(i)) = raw_motion_statistics(c.clips[i].motion).transpose();
    const std::vector<int> labels = labels_of(c, all_indices(c));
    std::printf("clips %zu (train %zu, held-out %zu), styles %d, clip_len %d\n", c.clips.size(),
                c.indices(false).size(), c.indices(true).size(), c.n_styles, c.clip_len);
    std::printf("separability: nearest-centroid (leave-one-out) %.3f, silhouette %.3f\n",
                nearest_centroid_loo_accuracy(stats, labels), silhouette_score(stats, labels));
    return 0;
  }

  if (pre->parsed()) {
    require_dir(pre_data, "--data");
    prepare_output_parent(pre_out);
    const Corpus corpus = read_corpus(pre_data);
    const RunConfig cfg = pre_cfg.resolve(corpus);
    if (pre_which == "sync") {
      SyncDiscriminator disc(cfg.model, cfg.train.seed + 101);
      const PretrainReport r = pretrain_sync_disc(disc, corpus, cfg.train, cfg.model.window);
      save_checkpoint(pre_out, critic_checkpoint(disc, cfg));
      std::printf("sync critic: %d steps, loss %.4f -> %.4f, held-out AUC %.4f (%d clips)\n", r.steps,
                  r.first_loss, r.last_loss, r.held_out_metric, r.held_out_count);
    } else {
      StyleDiscriminator disc(cfg.model, cfg.train.seed + 202);
      const PretrainReport r = pretrain_style_disc(disc, corpus, cfg.train);
      save_checkpoint(pre_out, critic_checkpoint(disc, cfg));
      std::printf("style critic: %d steps, loss %.4f -> %.4f, held-out accuracy %.4f (%d clips)\n", r.steps,
                  r.first_loss, r.last_loss, r.held_out_metric, r.held_out_count);
    }
    return 0;
  }

  if (tr->parsed()) {
    require_dir(tr_data, "--data");
    require_file(tr_sync, "--sync-ckpt");
    require_file(tr_style, "--style-ckpt");
    const Corpus corpus = read_corpus(tr_data);
    const RunConfig cfg = tr_cfg.resolve(corpus);
    auto sync = load_sync_disc(load_checkpoint(tr_sync));
    auto style = load_style_disc(load_checkpoint(tr_style));
    std::error_code ec;
    fs::create_directories(tr_out, ec);
    if (ec) throw IoError("cannot create " + tr_out + ": " + ec.message());

    Trainer trainer(cfg, corpus, sync, style);
    const fs::path log_path = fs::path(tr_out) / "loss_log.jsonl";
    std::ofstream log(log_path);
    if (!log) throw IoError("cannot open " + log_path.string());
    for (int s = 0; s < cfg.train.steps; ++s) {
      const StepRecord r = trainer.step();
      log << r.to_json().dump() << '\n';
      if (s % cfg.train.log_every == 0 || s + 1 == cfg.train.steps)
        std::printf("step %d total %.4f rec %.4f trip %.4f sync %.4f tem %.4f style %.4f\n", r.step, r.total, r.rec,
                    r.trip, r.sync, r.tem, r.style);
    }
    if (!log) throw IoError("failed writing " + log_path.string());
    save_checkpoint(fs::path(tr_out) / "model.ckpt", trainer.checkpoint());
    return 0;
  }

  if (ex->parsed()) {
    require_file(ex_ckpt, "--ckpt");
    require_file(ex_motion, "--motion");
    prepare_output_parent(ex_out);
    const auto gen_model = load_generator(load_checkpoint(ex_ckpt));
    write_style_code(ex_out, gen_model->extract_style(read_motion(ex_motion)));
    return 0;
  }

  if (inf->parsed()) {
    require_file(in_ckpt, "--ckpt");
    require_file(in_phon, "--phonemes");
    require_file(in_style, "--style");
    prepare_output_parent(in_out);
    const auto gen_model = load_generator(load_checkpoint(in_ckpt));
    write_motion(in_out, gen_model->decode_sequence(read_phonemes(in_phon), read_style_code(in_style)));
    return 0;
  }

  if (ip->parsed()) {
    for (const auto& [path, flag] : {std::pair{ip_ckpt, "--ckpt"}, {ip_a, "--style-a"}, {ip_b, "--style-b"},
                                     {ip_phon, "--phonemes"}})
      require_file(path, flag);
    prepare_output_parent(ip_out);
    if (!ip_code.empty()) prepare_output_parent(ip_code);
    const auto gen_model = load_generator(load_checkpoint(ip_ckpt));
    const StyleCode a = read_style_code(ip_a), b = read_style_code(ip_b);
    if (a.dim() != b.dim()) throw ContractError("style codes have different dimensions");
    // Endpoints reuse the stored code so they match single-style inference exactly.
    StyleCode s;
    s.values = ip_alpha == 0.0 ? a.values : ip_alpha == 1.0 ? b.values : interpolate_codes(a, b, ip_alpha);
    write_motion(ip_out, gen_model->decode_sequence(read_phonemes(ip_phon), s));
    if (!ip_code.empty()) write_style_code(ip_code, s);
    return 0;
  }

  if (ev->parsed()) {
    require_file(ev_ckpt, "--ckpt");
    require_dir(ev_data, "--data");
    prepare_output_parent(ev_report);
    const Checkpoint ckpt = load_checkpoint(ev_ckpt);
    const auto gen_model = load_generator(ckpt);
    const auto sync = load_sync_disc(ckpt);
    const Corpus corpus = read_corpus(ev_data);
    const FaceBasis basis = corpus.basis();
    std::vector<int> held = corpus.indices(true);
    const std::vector<int> train = corpus.indices(false);
    if (held.empty()) held = train;

    // Landmark distances: each held-out clip decoded with the style of another
    // clip of the same style from the training split.
    LandmarkDistance lmd;
    for (int i : held) {
      const CorpusClip& clip = corpus.clips[i];
      int ref = i;
      for (int j : train)
        if (j != i && corpus.clips[j].style_label == clip.style_label) {
          ref = j;
          break;
        }
      const MotionSequence pred =
          gen_model->decode_sequence(clip.phonemes, gen_model->extract_style(corpus.clips[ref].motion));
      const LandmarkDistance d = landmark_distance(clip.motion, pred, basis);
      lmd.full += d.full / static_cast<double>(held.size());
      lmd.mouth += d.mouth / static_cast<double>(held.size());
    }
    const MatrixD held_codes = style_codes(*gen_model, corpus, held);
    const MatrixD train_codes = style_codes(*gen_model, corpus, train);
    const std::vector<int> held_labels = labels_of(corpus, held);
    const json report = {
        {"held_out_clips", held.size()},
        {"f_lmd", lmd.full},
        {"m_lmd", lmd.mouth},
        {"sync_auc", sync_auc(*sync, corpus, held, gen_model->config().window, 1)},
        {"style_silhouette", silhouette_score(held_codes, held_labels)},
        {"style_nearest_centroid_accuracy",
         nearest_centroid_accuracy(train_codes, labels_of(corpus, train), held_codes, held_labels)},
    };
    write_text_file(ev_report, report.dump(2) + "\n");
    std::cout << report.dump(2) << "\n";
    return 0;
  }

  if (pr->parsed()) {
    require_file(pr_ckpt, "--ckpt");
    require_dir(pr_data, "--data");
    prepare_output_parent(pr_out);
    const auto gen_model = load_generator(load_checkpoint(pr_ckpt));
    const Corpus corpus = read_corpus(pr_data);
    const std::vector<int> clips = all_indices(corpus);
    const Projection p = principal_projection(style_codes(*gen_model, corpus, clips), 2);
    std::string table = "clip_id,style_label,x,y\n";
    char line[256];
    for (std::size_t i = 0; i < clips.size(); ++i) {
      std::snprintf(line, sizeof(line), "%s,%d,%.17g,%.17g\n", corpus.clips[i].id.c_str(),
                    corpus.clips[i].style_label, p.coords(static_cast<Eigen::Index>(i), 0),
                    p.coords(static_cast<Eigen::Index>(i), 1));
      table += line;
    }
    write_text_file(pr_out, table);
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const RangeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure in " << e.component() << ": " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
