#include "styletalk/checkpoint.hpp"

#include <cstring>
#include <set>

#include "styletalk/formats.hpp"

namespace styletalk {

using nlohmann::json;

namespace {
constexpr char kMagic[4] = {'S', 'T', 'C', 'K'};
constexpr std::size_t kPrefixBytes = 16;
}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void Checkpoint::add(const nn::ParamStore& store) {
  for (const auto& e : store.entries()) {
    require(find(e.name) == nullptr, "checkpoint already holds tensor " + e.name);
    tensors.push_back({e.name, e.var.value()});
  }
}

void Checkpoint::restore(nn::ParamStore& store) const {
  for (const auto& e : store.entries()) {
    const CheckpointTensor* t = find(e.name);
    if (!t) throw CheckpointError(e.name, "tensor missing from checkpoint");
    if (t->value.rows() != e.var.rows() || t->value.cols() != e.var.cols())
      throw CheckpointError(e.name, "shape [" + std::to_string(t->value.rows()) + "," +
                                        std::to_string(t->value.cols()) + "] does not match model [" +
                                        std::to_string(e.var.rows()) + "," + std::to_string(e.var.cols()) + "]");
  }
  for (const auto& e : store.entries()) {
    ag::Var v = e.var;
    v.mutable_value() = find(e.name)->value;
  }
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    tensors.push_back({{"name", t.name},
                       {"shape", {t.value.rows(), t.value.cols()}},
                       {"dtype", "f64"},
                       {"byte_offset", offset}});
    offset += static_cast<std::uint64_t>(t.value.size()) * 8;
  }
  const json manifest = {{"kind", ckpt.kind},
                         {"frozen", ckpt.frozen},
                         {"config", ckpt.config},
                         {"state", ckpt.state},
                         {"tensors", std::move(tensors)}};
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kPrefixBytes + text.size() + offset);
  out.insert(out.end(), kMagic, kMagic + 4);
  le::put_u32(out, kCheckpointVersion);
  le::put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : ckpt.tensors)
    for (Eigen::Index i = 0; i < t.value.size(); ++i) le::put_f64(out, t.value.data()[i]);
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPrefixBytes) throw FormatError("checkpoint truncated before manifest", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("checkpoint magic mismatch", 0);
  if (le::get_u32(bytes.data() + 4) != kCheckpointVersion) throw FormatError("unsupported checkpoint version", 4);
  const std::uint64_t manifest_len = le::get_u64(bytes.data() + 8);
  if (manifest_len > bytes.size() - kPrefixBytes) throw FormatError("checkpoint manifest truncated", bytes.size());

  json manifest;
  try {
    manifest = json::parse(bytes.begin() + kPrefixBytes, bytes.begin() + kPrefixBytes + manifest_len);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what(), kPrefixBytes + e.byte);
  }
  const std::size_t blob_start = kPrefixBytes + manifest_len;
  const std::size_t blob_size = bytes.size() - blob_start;

  Checkpoint ckpt;
  try {
    ckpt.kind = manifest.at("kind").get<std::string>();
    ckpt.frozen = manifest.at("frozen").get<bool>();
    ckpt.config = manifest.at("config");
    ckpt.state = manifest.at("state");
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what(), kPrefixBytes);
  }
  std::set<std::string> seen;
  std::uint64_t expected_offset = 0;
  for (const json& entry : manifest.at("tensors")) {
    const std::string name = entry.value("name", std::string());
    try {
      if (name.empty()) throw CheckpointError("?", "tensor entry without a name");
      if (!seen.insert(name).second) throw CheckpointError(name, "listed twice");
      if (entry.at("dtype").get<std::string>() != "f64") throw CheckpointError(name, "unsupported dtype");
      const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
      if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0) throw CheckpointError(name, "shape must be [rows, cols]");
      const auto offset = entry.at("byte_offset").get<std::uint64_t>();
      if (offset != expected_offset) throw CheckpointError(name, "byte_offset does not follow the previous tensor");
      const std::uint64_t count = static_cast<std::uint64_t>(shape[0]) * static_cast<std::uint64_t>(shape[1]);
      if (offset + count * 8 > blob_size) throw CheckpointError(name, "tensor data runs past the end of the file");
      CheckpointTensor t{name, MatrixD(shape[0], shape[1])};
      for (std::uint64_t i = 0; i < count; ++i)
        t.value.data()[i] = le::get_f64(bytes.data() + blob_start + offset + 8 * i);
      expected_offset = offset + count * 8;
      ckpt.tensors.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw CheckpointError(name.empty() ? "?" : name, e.what());
    }
  }
  if (expected_offset != blob_size)
    throw FormatError("checkpoint has trailing bytes after the tensor blob", blob_start + expected_offset);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_checkpoint(bytes);
}

}  // namespace styletalk
