#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "styletalk/formats.hpp"
#include "styletalk/metrics.hpp"
#include "support.hpp"

using namespace styletalk;
using nlohmann::json;
using testsupport::random_matrix;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "styletalk_unit" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CorpusOptions small_options(std::uint64_t seed = 3) {
  CorpusOptions o;
  o.seed = seed;
  o.n_styles = 3;
  o.clips_per_style = 5;
  o.clip_len = 24;
  o.basis_vertices = 64;
  return o;
}

}  // namespace

TEST_SUITE("synth_data") {
  TEST_CASE("basis is orthonormal, deterministic and mouth-heavy on the lower columns") {
    const FaceBasis a = gen_basis(11, 96);
    CHECK_NOTHROW(a.validate());
    const MatrixD gram = a.vertex_basis.transpose() * a.vertex_basis;
    CHECK((gram - MatrixD::Identity(kExprDim, kExprDim)).cwiseAbs().maxCoeff() < 1e-10);
    const FaceBasis b = gen_basis(11, 96);
    CHECK((a.vertex_basis.array() == b.vertex_basis.array()).all());
    CHECK((a.mean_shape.array() == b.mean_shape.array()).all());
    CHECK(a.mouth_vertex_ids.size() == 24);

    std::vector<int> lower(kLowerDim), upper(kUpperDim);
    std::iota(lower.begin(), lower.end(), 0);
    std::iota(upper.begin(), upper.end(), kLowerDim);
    for (double r : mouth_energy_ratio(a, lower)) CHECK(r > 0.5);
    for (double r : mouth_energy_ratio(a, upper)) CHECK(r < 0.5);
    CHECK_THROWS_AS(gen_basis(1, 63), ContractError);
  }

  TEST_CASE("corpus counts and balance") {
    CorpusOptions o;
    o.basis_vertices = 64;
    o.clip_len = 16;
    const Corpus c = gen_corpus(o).corpus;
    CHECK(c.clips.size() == 80);
    for (int s = 0; s < 4; ++s) {
      CHECK(c.indices_of_style(s, false).size() == 16);
      CHECK(c.indices_of_style(s, true).size() == 4);
    }
    for (const auto& clip : c.clips) {
      CHECK(clip.motion.size() == 16);
      CHECK(clip.phonemes.size() == 16);
      CHECK(clip.motion.frames.cwiseAbs().maxCoeff() <= 3.0f);
      for (int l : clip.phonemes.labels) CHECK((l >= 0 && l < kEmittedPhonemes));
    }
  }

  TEST_CASE("corpus generation is deterministic per seed") {
    CHECK(gen_corpus(small_options(5)).corpus == gen_corpus(small_options(5)).corpus);
    CHECK_FALSE(gen_corpus(small_options(5)).corpus == gen_corpus(small_options(6)).corpus);
  }

  TEST_CASE("noise-free mouth motion is a function of the phoneme context") {
    CorpusOptions o = small_options();
    o.noise_scale = 0.0;
    const SyntheticCorpus sc = gen_corpus(o);
    // Equal (previous, current) label pairs within one style give equal lower faces.
    int compared = 0;
    for (const auto& clip : sc.corpus.clips) {
      if (clip.style_label != 0) continue;
      for (int t = 1; t < clip.motion.size(); ++t)
        for (int u = t + 1; u < clip.motion.size(); ++u)
          if (clip.phonemes.labels[t] == clip.phonemes.labels[u] &&
              clip.phonemes.labels[t - 1] == clip.phonemes.labels[u - 1]) {
            for (int j = 0; j < kLowerDim; ++j) CHECK(clip.motion.frames(t, j) == clip.motion.frames(u, j));
            ++compared;
          }
    }
    CHECK(compared > 0);
  }

  TEST_CASE("invalid corpus options") {
    CorpusOptions o = small_options();
    o.n_styles = 1;
    CHECK_THROWS_AS(gen_corpus(o), ContractError);
    o = small_options();
    o.clips_per_style = 1;
    CHECK_THROWS_AS(gen_corpus(o), ContractError);
    o = small_options();
    o.noise_scale = -1;
    CHECK_THROWS_AS(gen_corpus(o), ContractError);
  }

  TEST_CASE("raw statistics by hand") {
    MatrixF f = MatrixF::Zero(3, kExprDim);
    f(0, 0) = 0;
    f(1, 0) = 3;
    f(2, 0) = 6;
    const Eigen::VectorXd s = raw_motion_statistics(MotionSequence(f));
    CHECK(s(0) == doctest::Approx(std::sqrt(6.0)));
    CHECK(s(kExprDim) == doctest::Approx(3.0));
    CHECK(s(1) == 0.0);
  }

  TEST_CASE("corpus directory round trip") {
    const fs::path dir = scratch("corpus");
    const Corpus c = gen_corpus(small_options()).corpus;
    write_corpus(dir, c);
    CHECK(read_corpus(dir) == c);
    CHECK(fs::exists(dir / "index.json"));
    CHECK(fs::exists(dir / "face_split.json"));
  }

  TEST_CASE("corrupt index entries name the clip") {
    const fs::path dir = scratch("corrupt");
    const Corpus c = gen_corpus(small_options()).corpus;
    write_corpus(dir, c);
    const std::string original = read_text_file(dir / "index.json");
    const std::string id = c.clips[2].id;

    json index = json::parse(original);
    index["clips"][2]["style_label"] = 17;
    write_text_file(dir / "index.json", index.dump());
    CHECK_THROWS_WITH_AS(read_corpus(dir), doctest::Contains(id.c_str()), DataError);

    index = json::parse(original);
    index["clips"][2]["split"] = "validation";
    write_text_file(dir / "index.json", index.dump());
    CHECK_THROWS_WITH_AS(read_corpus(dir), doctest::Contains(id.c_str()), DataError);

    index = json::parse(original);
    index["clips"][3] = index["clips"][2];
    write_text_file(dir / "index.json", index.dump());
    CHECK_THROWS_WITH_AS(read_corpus(dir), doctest::Contains(id.c_str()), DataError);

    write_text_file(dir / "index.json", original);
    fs::remove(dir / "clips" / (id + ".mvec"));
    CHECK_THROWS_WITH_AS(read_corpus(dir), doctest::Contains(id.c_str()), DataError);

    write_text_file(dir / "index.json", "{not json");
    CHECK_THROWS_AS(read_corpus(dir), FormatError);
  }
}

TEST_SUITE("checkpoint") {
  Checkpoint sample_checkpoint(const nn::ParamStore& store) {
    Checkpoint ck;
    ck.kind = "model";
    ck.config = testsupport::tiny_config().to_json();
    ck.state = {{"step", 12}};
    ck.add(store);
    return ck;
  }

  TEST_CASE("save and load are bit-exact") {
    const RunConfig cfg = testsupport::tiny_config();
    Generator gen(cfg.model, 1);
    const Checkpoint ck = sample_checkpoint(gen.params());
    const auto bytes = encode_checkpoint(ck);
    CHECK(decode_checkpoint(bytes) == ck);
    CHECK(encode_checkpoint(decode_checkpoint(bytes)) == bytes);
    const fs::path dir = scratch("ckpt");
    save_checkpoint(dir / "g.ckpt", ck);
    CHECK(read_file_bytes(dir / "g.ckpt") == bytes);

    Generator other(cfg.model, 2);
    load_checkpoint(dir / "g.ckpt").restore(other.params());
    for (std::size_t i = 0; i < gen.params().entries().size(); ++i)
      CHECK((gen.params().entries()[i].var.value().array() == other.params().entries()[i].var.value().array()).all());
  }

  TEST_CASE("tampered shapes and missing tensors are named") {
    const RunConfig cfg = testsupport::tiny_config();
    Generator gen(cfg.model, 3);
    const Checkpoint ck = sample_checkpoint(gen.params());
    const auto bytes = encode_checkpoint(ck);

    // Swap rows and cols of one tensor in the manifest; the blob stays valid.
    const std::uint64_t manifest_len = le::get_u64(bytes.data() + 8);
    json manifest = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(manifest_len));
    const std::string victim = "gen.style.embed.weight";
    for (auto& t : manifest["tensors"])
      if (t["name"] == victim) t["shape"] = {t["shape"][1], t["shape"][0]};
    const std::string text = manifest.dump();
    std::vector<std::uint8_t> tampered(bytes.begin(), bytes.begin() + 8);
    le::put_u64(tampered, text.size());
    tampered.insert(tampered.end(), text.begin(), text.end());
    tampered.insert(tampered.end(), bytes.begin() + 16 + static_cast<long>(manifest_len), bytes.end());
    const Checkpoint bad = decode_checkpoint(tampered);
    try {
      bad.restore(gen.params());
      FAIL("expected a checkpoint error");
    } catch (const CheckpointError& e) {
      CHECK(e.tensor() == victim);
    }

    Checkpoint missing = ck;
    const std::string gone = missing.tensors[5].name;
    missing.tensors.erase(missing.tensors.begin() + 5);
    CHECK_THROWS_WITH_AS(missing.restore(gen.params()), doctest::Contains(gone.c_str()), CheckpointError);
  }

  TEST_CASE("malformed files") {
    const RunConfig cfg = testsupport::tiny_config();
    Generator gen(cfg.model, 4);
    auto bytes = encode_checkpoint(sample_checkpoint(gen.params()));
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
    bad = bytes;
    bad.pop_back();
    CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);
    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
    CHECK_THROWS_AS(load_checkpoint(scratch("none") / "x.ckpt"), IoError);
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("pairwise AUC against brute force") {
    std::vector<double> pos = {0.9, 0.4, 0.4, 0.7}, neg = {0.1, 0.4, 0.8};
    double wins = 0;
    for (double p : pos)
      for (double n : neg) wins += p > n ? 1.0 : p == n ? 0.5 : 0.0;
    CHECK(pairwise_auc(pos, neg) == doctest::Approx(wins / 12.0));
    CHECK(pairwise_auc(std::vector<double>{1, 2}, std::vector<double>{0}) == 1.0);
  }

  TEST_CASE("silhouette by hand") {
    MatrixD pts(4, 1);
    pts << 0, 1, 10, 11;
    const std::vector<int> labels = {0, 0, 1, 1};
    // a = 1 for every point; b = 10 or 9 and 11 averaged
    const double s0 = 1.0 - 1.0 / 10.5, s1 = 1.0 - 1.0 / 9.5;
    CHECK(silhouette_score(pts, labels) == doctest::Approx((s0 + s1 + s1 + s0) / 4.0));
  }

  TEST_CASE("nearest centroid accuracy") {
    MatrixD ref(4, 2), query(3, 2);
    ref << 0, 0, 0, 2, 10, 0, 10, 2;
    query << 1, 1, 9, 1, 6, 1;
    const std::vector<int> rl = {0, 0, 1, 1}, ql = {0, 1, 0};
    CHECK(nearest_centroid_accuracy(ref, rl, query, ql) == doctest::Approx(2.0 / 3.0));
    CHECK(nearest_centroid_loo_accuracy(ref, rl) == 1.0);
  }

  TEST_CASE("principal projection of a line") {
    MatrixD pts(5, 3);
    for (int i = 0; i < 5; ++i) pts.row(i) << i, 2.0 * i, 1.0;
    const Projection p = principal_projection(pts, 2);
    CHECK(std::abs(p.directions(0, 0)) == doctest::Approx(1.0 / std::sqrt(5.0)));
    CHECK(p.directions.col(0).maxCoeff() > 0);
    CHECK(p.coords(4, 0) - p.coords(0, 0) == doctest::Approx(4.0 * std::sqrt(5.0)));
    CHECK(p.coords.col(1).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("projection orders two style centroids like a power-iteration oracle") {
    std::mt19937_64 rng(12);
    MatrixD pts = random_matrix(20, 6, rng, 0.3);
    Eigen::RowVectorXd shift = random_matrix(1, 6, rng, 2.0);
    for (int i = 10; i < 20; ++i) pts.row(i) += shift;
    const Projection p = principal_projection(pts, 2);

    const MatrixD centred = pts.rowwise() - pts.colwise().mean();
    const MatrixD cov = centred.transpose() * centred;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(6);
    for (int it = 0; it < 500; ++it) v = (cov * v).normalized();
    Eigen::Index big;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0) v = -v;
    CHECK((p.directions.col(0) - v).norm() < 1e-8);

    const double c0 = p.coords.col(0).head(10).mean(), c1 = p.coords.col(0).tail(10).mean();
    const double o0 = (centred.topRows(10) * v).mean(), o1 = (centred.bottomRows(10) * v).mean();
    CHECK((c0 < c1) == (o0 < o1));
    CHECK(std::abs(c0 - c1) > 1.0);
  }

  TEST_CASE("landmark distance") {
    const FaceBasis basis = gen_basis(2, 64);
    MatrixF gt = MatrixF::Zero(2, kExprDim);
    CHECK(landmark_distance(MotionSequence(gt), MotionSequence(gt), basis).full == 0.0);
    MatrixF pred = gt;
    pred(0, 20) = 1.0f;
    // One orthonormal column moves the mesh by unit total squared length.
    const LandmarkDistance d = landmark_distance(MotionSequence(gt), MotionSequence(pred), basis);
    double oracle = 0.0;
    for (int v = 0; v < basis.vertices(); ++v) oracle += basis.vertex_basis.block(3 * v, 20, 3, 1).norm();
    CHECK(d.full == doctest::Approx(oracle / basis.vertices() / 2.0));
  }
}
