#include "styletalk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "json.hpp"
#include "styletalk/formats.hpp"

namespace styletalk {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream * 0x100000001B3ull + index)));
}

constexpr std::uint64_t kStyleStream = 1;
constexpr std::uint64_t kClipStream = 2;
constexpr std::uint64_t kVisemeStream = 3;

}  // namespace

FaceBasis gen_basis(std::uint64_t seed, int vertices, const FaceSplit& split) {
  require(vertices >= kExprDim, "face basis needs at least 64 vertices");
  const int rows = 3 * vertices;
  const int mouth = (vertices + 3) / 4;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Column order matters for QR: lower-face columns are orthogonalized first
  // so their span stays concentrated on mouth rows.
  std::vector<int> order(split.lower_indices().begin(), split.lower_indices().end());
  order.insert(order.end(), split.upper_indices().begin(), split.upper_indices().end());

  MatrixD a(rows, kExprDim);
  for (int c = 0; c < kExprDim; ++c) {
    const bool lower = c < kLowerDim;
    for (int r = 0; r < rows; ++r) {
      const bool mouth_row = r < 3 * mouth;
      const double damp = (lower != mouth_row) ? 0.05 : 1.0;
      a(r, c) = normal(rng) * damp;
    }
  }
  Eigen::HouseholderQR<MatrixD> qr(a);
  const MatrixD q = qr.householderQ() * MatrixD::Identity(rows, kExprDim);
  const MatrixD r_diag = qr.matrixQR().diagonal();

  FaceBasis basis;
  basis.vertex_basis.resize(rows, kExprDim);
  for (int c = 0; c < kExprDim; ++c) {
    // Fix the QR sign ambiguity so the basis is a deterministic function of the seed.
    const double sign = r_diag(c, 0) < 0.0 ? -1.0 : 1.0;
    basis.vertex_basis.col(order[c]) = q.col(c) * sign;
  }
  basis.mean_shape.resize(rows);
  for (int r = 0; r < rows; ++r) basis.mean_shape(r) = 0.5 * normal(rng);
  for (int v = 0; v < mouth; ++v) basis.mouth_vertex_ids.push_back(v);
  return basis;
}

std::vector<double> mouth_energy_ratio(const FaceBasis& basis, std::span<const int> columns) {
  std::vector<double> out;
  for (int c : columns) {
    require(c >= 0 && c < kExprDim, "column index out of range");
    double mouth = 0.0;
    for (int v : basis.mouth_vertex_ids) mouth += basis.vertex_basis.col(c).segment(3 * v, 3).squaredNorm();
    out.push_back(mouth / basis.vertex_basis.col(c).squaredNorm());
  }
  return out;
}

std::vector<int> Corpus::indices(bool held_out) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < clips.size(); ++i)
    if (clips[i].held_out == held_out) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> Corpus::indices_of_style(int style, bool held_out) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < clips.size(); ++i)
    if (clips[i].held_out == held_out && clips[i].style_label == style) out.push_back(static_cast<int>(i));
  return out;
}

SyntheticCorpus gen_corpus(const CorpusOptions& opts) {
  require(opts.n_styles >= 2, "gen_corpus needs at least 2 styles");
  require(opts.clips_per_style >= 2, "gen_corpus needs at least 2 clips per style");
  require(opts.clip_len >= 1, "clip length must be positive");
  require(opts.vocab >= 2, "vocabulary must hold at least 2 labels");
  require(opts.noise_scale >= 0.0, "noise scale must be non-negative");
  require(opts.gesture_frames >= 0, "gesture_frames must be non-negative");
  require(opts.rest_scale >= 0.0, "rest_scale must be non-negative");
  const int held_out =
      opts.held_out_per_style < 0 ? opts.clips_per_style / 5 : opts.held_out_per_style;
  require(opts.clips_per_style - held_out >= 2, "at least 2 training clips per style are required");

  const int emitted = std::min(opts.vocab, kEmittedPhonemes);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Viseme shapes shared by every style; silence is the neutral mouth.
  auto vrng = derived_rng(opts.seed, kVisemeStream, 0);
  MatrixD visemes(opts.vocab, kLowerDim);
  for (int v = 0; v < opts.vocab; ++v)
    for (int j = 0; j < kLowerDim; ++j) visemes(v, j) = v == 0 ? 0.0 : normal(vrng);

  SyntheticCorpus out;
  for (int s = 0; s < opts.n_styles; ++s) {
    auto rng = derived_rng(opts.seed, kStyleStream, static_cast<std::uint64_t>(s));
    SyntheticStyle st;
    st.style_id = s;
    st.noise_scale = opts.noise_scale;
    for (double& g : st.gains) g = std::exp(0.4 * normal(rng));
    for (double& r : st.rest) r = opts.rest_scale * normal(rng);
    st.mouth_response.resize(opts.vocab, kLowerDim);
    for (int v = 0; v < opts.vocab; ++v)
      for (int j = 0; j < kLowerDim; ++j) {
        const double base = visemes(v, j) + (v == 0 ? 0.0 : 0.3 * normal(rng));
        st.mouth_response(v, j) = st.gains[j] * base;
      }
    for (int j = 0; j < kUpperDim; ++j) {
      st.frequency[j] = 0.5 + 4.5 * unit(rng);
      st.phase[j] = 2.0 * std::numbers::pi * unit(rng);
    }
    out.styles.push_back(std::move(st));
  }

  Corpus& corpus = out.corpus;
  corpus.seed = opts.seed;
  corpus.n_styles = opts.n_styles;
  corpus.clip_len = opts.clip_len;
  corpus.vocab = opts.vocab;
  corpus.basis_vertices = opts.basis_vertices;
  corpus.noise_scale = opts.noise_scale;
  corpus.split = opts.split;

  const double fps = kDefaultFps;
  for (int s = 0; s < opts.n_styles; ++s) {
    const SyntheticStyle& st = out.styles[s];
    for (int k = 0; k < opts.clips_per_style; ++k) {
      const int clip_index = s * opts.clips_per_style + k;
      auto rng = derived_rng(opts.seed, kClipStream, static_cast<std::uint64_t>(clip_index));
      std::uniform_int_distribution<int> pick(1, emitted - 1);

      CorpusClip clip;
      char id[32];
      std::snprintf(id, sizeof(id), "clip%05d", clip_index);
      clip.id = id;
      clip.style_label = s;
      clip.held_out = k >= opts.clips_per_style - held_out;
      clip.phonemes.vocab = opts.vocab;
      clip.phonemes.fps = static_cast<float>(fps);

      // Geometric dwell with mean 4 frames; ~10% of segments are silence.
      int current = unit(rng) < 0.1 ? 0 : pick(rng);
      for (int t = 0; t < opts.clip_len; ++t) {
        if (t > 0 && unit(rng) < 0.25) current = unit(rng) < 0.1 ? 0 : pick(rng);
        clip.phonemes.labels.push_back(current);
      }

      MatrixF frames(opts.clip_len, kExprDim);
      int since_onset = 0;
      for (int t = 0; t < opts.clip_len; ++t) {
        if (t > 0 && clip.phonemes.labels[t] != clip.phonemes.labels[t - 1]) since_onset = 0;
        const double clock = std::min(since_onset++, opts.gesture_frames);
        const int cur = clip.phonemes.labels[t];
        const int prev = clip.phonemes.labels[std::max(t - 1, 0)];
        for (int j = 0; j < kLowerDim; ++j) {
          double v = st.rest[j] + 0.5 * (st.mouth_response(cur, j) + st.mouth_response(prev, j));
          v += st.noise_scale * normal(rng);
          frames(t, opts.split.lower_indices()[j]) = static_cast<float>(std::clamp(v, -3.0, 3.0));
        }
        for (int j = 0; j < kUpperDim; ++j) {
          const double amp = 0.8 * st.gains[kLowerDim + j];
          double v = st.rest[kLowerDim + j] + amp * std::sin(2.0 * std::numbers::pi * st.frequency[j] * clock / fps + st.phase[j]);
          v += st.noise_scale * normal(rng);
          frames(t, opts.split.upper_indices()[j]) = static_cast<float>(std::clamp(v, -3.0, 3.0));
        }
      }
      clip.motion = MotionSequence(std::move(frames), static_cast<float>(fps));
      corpus.clips.push_back(std::move(clip));
    }
  }
  return out;
}

Eigen::VectorXd raw_motion_statistics(const MotionSequence& m) {
  m.validate();
  const MatrixD x = m.to_double();
  Eigen::VectorXd stats(2 * kExprDim);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  stats.head(kExprDim) = ((x.rowwise() - mean).cwiseAbs2().colwise().mean()).cwiseSqrt().transpose();
  if (x.rows() > 1)
    stats.tail(kExprDim) = (x.bottomRows(x.rows() - 1) - x.topRows(x.rows() - 1)).cwiseAbs().colwise().mean().transpose();
  else
    stats.tail(kExprDim).setZero();
  return stats;
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "clips", ec);
  if (ec) throw IoError("cannot create corpus directory " + dir.string() + ": " + ec.message());
  json index;
  index["version"] = 1;
  index["seed"] = corpus.seed;
  index["n_styles"] = corpus.n_styles;
  index["clip_len"] = corpus.clip_len;
  index["vocab"] = corpus.vocab;
  index["fps"] = kDefaultFps;
  index["noise_scale"] = corpus.noise_scale;
  index["basis"] = {{"seed", corpus.basis_seed()}, {"vertices", corpus.basis_vertices}};
  index["face_split"] = "face_split.json";
  json clips = json::array();
  for (const CorpusClip& c : corpus.clips) {
    const std::string motion = "clips/" + c.id + ".mvec";
    const std::string phonemes = "clips/" + c.id + ".json";
    write_motion(dir / motion, c.motion);
    write_phonemes(dir / phonemes, c.phonemes);
    clips.push_back({{"clip_id", c.id},
                     {"style_label", c.style_label},
                     {"split", c.held_out ? "test" : "train"},
                     {"motion", motion},
                     {"phonemes", phonemes}});
  }
  index["clips"] = std::move(clips);
  write_face_split(dir / "face_split.json", corpus.split);
  write_text_file(dir / "index.json", index.dump(1) + "\n");
}

Corpus read_corpus(const std::filesystem::path& dir) {
  const auto index_path = dir / "index.json";
  json index;
  try {
    index = json::parse(read_text_file(index_path));
  } catch (const json::parse_error& e) {
    throw FormatError(index_path.string() + ": " + e.what(), e.byte);
  }
  Corpus corpus;
  try {
    corpus.seed = index.at("seed").get<std::uint64_t>();
    corpus.n_styles = index.at("n_styles").get<int>();
    corpus.clip_len = index.at("clip_len").get<int>();
    corpus.vocab = index.at("vocab").get<int>();
    corpus.noise_scale = index.at("noise_scale").get<double>();
    corpus.basis_vertices = index.at("basis").at("vertices").get<int>();
    if (index.at("basis").at("seed").get<std::uint64_t>() != corpus.basis_seed())
      throw DataError("corpus index: basis seed does not match corpus seed");
  } catch (const json::exception& e) {
    throw DataError("corpus index " + index_path.string() + ": " + e.what());
  }
  corpus.split = read_face_split(dir / index.value("face_split", std::string("face_split.json")));

  std::set<std::string> seen;
  const json& clips = index.at("clips");
  if (!clips.is_array()) throw DataError("corpus index: 'clips' must be an array");
  for (const json& entry : clips) {
    const std::string id = entry.value("clip_id", std::string());
    if (id.empty()) throw DataError("corpus index: clip entry without clip_id");
    try {
      if (!seen.insert(id).second) throw DataError("clip " + id + " is listed more than once");
      CorpusClip c;
      c.id = id;
      c.style_label = entry.at("style_label").get<int>();
      const std::string split = entry.at("split").get<std::string>();
      if (split != "train" && split != "test") throw DataError("clip " + id + ": split must be train or test");
      c.held_out = split == "test";
      if (c.style_label < 0 || c.style_label >= corpus.n_styles)
        throw DataError("clip " + id + ": style_label out of range");
      const auto motion_path = dir / entry.at("motion").get<std::string>();
      const auto phoneme_path = dir / entry.at("phonemes").get<std::string>();
      if (!std::filesystem::exists(motion_path))
        throw DataError("clip " + id + ": missing motion file " + motion_path.string());
      if (!std::filesystem::exists(phoneme_path))
        throw DataError("clip " + id + ": missing phoneme file " + phoneme_path.string());
      c.motion = read_motion(motion_path);
      c.phonemes = read_phonemes(phoneme_path);
      if (c.motion.size() != c.phonemes.size())
        throw DataError("clip " + id + ": motion and phoneme lengths differ");
      corpus.clips.push_back(std::move(c));
    } catch (const DataError&) {
      throw;
    } catch (const Error& e) {
      throw DataError("clip " + id + ": " + e.what());
    } catch (const json::exception& e) {
      throw DataError("clip " + id + ": " + e.what());
    }
  }
  return corpus;
}

}  // namespace styletalk
