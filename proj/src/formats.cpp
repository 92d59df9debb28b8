#include "styletalk/formats.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

namespace styletalk {

using nlohmann::json;

namespace le {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }
double get_f64(const std::uint8_t* p) { return std::bit_cast<double>(get_u64(p)); }

}  // namespace le

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::uint8_t> encode_motion(const MotionSequence& m) {
  m.validate();
  std::vector<std::uint8_t> out;
  out.reserve(kMotionHeaderBytes + static_cast<std::size_t>(m.frames.size()) * 4);
  out.insert(out.end(), std::begin(kMotionMagic), std::end(kMotionMagic));
  le::put_u32(out, kMotionVersion);
  le::put_u32(out, static_cast<std::uint32_t>(m.frames.rows()));
  le::put_u32(out, static_cast<std::uint32_t>(kExprDim));
  le::put_f32(out, m.fps);
  for (Eigen::Index r = 0; r < m.frames.rows(); ++r)
    for (Eigen::Index c = 0; c < m.frames.cols(); ++c) le::put_f32(out, m.frames(r, c));
  return out;
}

MotionSequence decode_motion(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw FormatError("truncated motion header", bytes.size());
  if (std::memcmp(bytes.data(), kMotionMagic, 4) != 0) throw FormatError("bad motion magic", 0);
  if (bytes.size() < kMotionHeaderBytes) throw FormatError("truncated motion header", bytes.size());
  const std::uint8_t* p = bytes.data();
  if (le::get_u32(p + 4) != kMotionVersion)
    throw FormatError("unsupported motion version " + std::to_string(le::get_u32(p + 4)), 4);
  const std::uint32_t n = le::get_u32(p + 8);
  const std::uint32_t d = le::get_u32(p + 12);
  if (n == 0) throw FormatError("motion file holds zero frames", 8);
  if (d != kExprDim) throw FormatError("motion dimension must be 64, got " + std::to_string(d), 12);
  const float fps = le::get_f32(p + 16);
  if (!(fps > 0.0f) || !std::isfinite(fps)) throw FormatError("motion fps must be positive", 16);
  const std::uint64_t expected = kMotionHeaderBytes + static_cast<std::uint64_t>(n) * d * 4;
  if (bytes.size() < expected) throw FormatError("truncated motion payload", bytes.size());
  if (bytes.size() > expected) throw FormatError("trailing bytes after motion payload", expected);
  MatrixF frames(n, d);
  const std::uint8_t* q = p + kMotionHeaderBytes;
  for (std::uint32_t r = 0; r < n; ++r)
    for (std::uint32_t c = 0; c < d; ++c, q += 4) {
      const float v = le::get_f32(q);
      if (!std::isfinite(v))
        throw FormatError("non-finite motion coefficient", static_cast<std::uint64_t>(q - p));
      frames(r, c) = v;
    }
  return MotionSequence(std::move(frames), fps);
}

void write_motion(const std::filesystem::path& path, const MotionSequence& m) {
  write_file_bytes(path, encode_motion(m));
}

MotionSequence read_motion(const std::filesystem::path& path) { return decode_motion(read_file_bytes(path)); }

namespace {

json parse_json(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

template <typename T>
T field(const json& j, const char* key, const std::filesystem::path& path) {
  if (!j.is_object() || !j.contains(key))
    throw FormatError(path.string() + ": missing key '" + key + "'", 0);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad value for '" + key + "': " + e.what(), 0);
  }
}

}  // namespace

void write_phonemes(const std::filesystem::path& path, const PhonemeSequence& p) {
  p.validate();
  json j;
  j["fps"] = p.fps;
  j["vocab"] = p.vocab;
  j["labels"] = p.labels;
  write_text_file(path, j.dump() + "\n");
}

PhonemeSequence read_phonemes(const std::filesystem::path& path) {
  const json j = parse_json(path);
  PhonemeSequence p;
  p.fps = field<float>(j, "fps", path);
  p.vocab = field<int>(j, "vocab", path);
  p.labels = field<std::vector<int>>(j, "labels", path);
  p.validate();
  return p;
}

void write_style_code(const std::filesystem::path& path, const StyleCode& s) {
  json j;
  j["dim"] = s.dim();
  j["values"] = std::vector<double>(s.values.data(), s.values.data() + s.values.size());
  write_text_file(path, j.dump() + "\n");
}

StyleCode read_style_code(const std::filesystem::path& path) {
  const json j = parse_json(path);
  const int dim = field<int>(j, "dim", path);
  const auto values = field<std::vector<double>>(j, "values", path);
  if (dim < 1 || static_cast<int>(values.size()) != dim)
    throw FormatError(path.string() + ": style code dim does not match value count", 0);
  StyleCode s;
  s.values = Eigen::Map<const Eigen::VectorXd>(values.data(), dim);
  if (!s.values.allFinite()) throw FormatError(path.string() + ": non-finite style code", 0);
  return s;
}

void write_face_split(const std::filesystem::path& path, const FaceSplit& s) {
  json j;
  j["lower"] = std::vector<int>(s.lower_indices().begin(), s.lower_indices().end());
  write_text_file(path, j.dump() + "\n");
}

FaceSplit read_face_split(const std::filesystem::path& path) {
  const json j = parse_json(path);
  return FaceSplit::from_vector(field<std::vector<int>>(j, "lower", path));
}

}  // namespace styletalk
