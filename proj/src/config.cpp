#include "styletalk/config.hpp"

#include <functional>
#include <map>

#include "styletalk/formats.hpp"

namespace styletalk {

using nlohmann::json;

namespace {

// Binds every flat key to a field of RunConfig.
struct KeyBinding {
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> put;
};

template <typename T, typename Sel>
KeyBinding bind(Sel sel) {
  return {[sel](const RunConfig& c) { return json(sel(const_cast<RunConfig&>(c))); },
          [sel](RunConfig& c, const json& j) { sel(c) = j.get<T>(); }};
}

const std::map<std::string, KeyBinding>& bindings() {
  static const std::map<std::string, KeyBinding> table = {
      {"d_model", bind<int>([](RunConfig& c) -> int& { return c.model.d_model; })},
      {"heads", bind<int>([](RunConfig& c) -> int& { return c.model.heads; })},
      {"ffn_hidden", bind<int>([](RunConfig& c) -> int& { return c.model.ffn_hidden; })},
      {"style_layers", bind<int>([](RunConfig& c) -> int& { return c.model.style_layers; })},
      {"audio_layers", bind<int>([](RunConfig& c) -> int& { return c.model.audio_layers; })},
      {"decoder_blocks", bind<int>([](RunConfig& c) -> int& { return c.model.decoder_blocks; })},
      {"kernels", bind<int>([](RunConfig& c) -> int& { return c.model.kernels; })},
      {"dynamic_ffn", bind<bool>([](RunConfig& c) -> bool& { return c.model.dynamic_ffn; })},
      {"window", bind<int>([](RunConfig& c) -> int& { return c.model.window; })},
      {"vocab", bind<int>([](RunConfig& c) -> int& { return c.model.vocab; })},
      {"n_styles", bind<int>([](RunConfig& c) -> int& { return c.model.n_styles; })},
      {"sync_embed", bind<int>([](RunConfig& c) -> int& { return c.model.sync_embed; })},
      {"sync_hidden", bind<int>([](RunConfig& c) -> int& { return c.model.sync_hidden; })},
      {"disc_hidden", bind<int>([](RunConfig& c) -> int& { return c.model.disc_hidden; })},
      {"lower_indices",
       bind<std::vector<int>>([](RunConfig& c) -> std::vector<int>& { return c.model.lower_indices; })},
      {"clip_len", bind<int>([](RunConfig& c) -> int& { return c.train.clip_len; })},
      {"lr", bind<double>([](RunConfig& c) -> double& { return c.train.lr; })},
      {"disc_lr", bind<double>([](RunConfig& c) -> double& { return c.train.disc_lr; })},
      {"adam_beta1", bind<double>([](RunConfig& c) -> double& { return c.train.adam_beta1; })},
      {"adam_beta2", bind<double>([](RunConfig& c) -> double& { return c.train.adam_beta2; })},
      {"adam_eps", bind<double>([](RunConfig& c) -> double& { return c.train.adam_eps; })},
      {"steps", bind<int>([](RunConfig& c) -> int& { return c.train.steps; })},
      {"batch_size", bind<int>([](RunConfig& c) -> int& { return c.train.batch_size; })},
      {"seed", bind<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.train.seed; })},
      {"lambda_rec", bind<double>([](RunConfig& c) -> double& { return c.train.weights.rec; })},
      {"lambda_trip", bind<double>([](RunConfig& c) -> double& { return c.train.weights.trip; })},
      {"lambda_sync", bind<double>([](RunConfig& c) -> double& { return c.train.weights.sync; })},
      {"lambda_tem", bind<double>([](RunConfig& c) -> double& { return c.train.weights.tem; })},
      {"lambda_style", bind<double>([](RunConfig& c) -> double& { return c.train.weights.style; })},
      {"mu", bind<double>([](RunConfig& c) -> double& { return c.train.weights.mu; })},
      {"gamma", bind<double>([](RunConfig& c) -> double& { return c.train.weights.gamma; })},
      {"pretrain_steps", bind<int>([](RunConfig& c) -> int& { return c.train.pretrain_steps; })},
      {"pretrain_batch", bind<int>([](RunConfig& c) -> int& { return c.train.pretrain_batch; })},
      {"pretrain_lr", bind<double>([](RunConfig& c) -> double& { return c.train.pretrain_lr; })},
      {"log_every", bind<int>([](RunConfig& c) -> int& { return c.train.log_every; })},
  };
  return table;
}

}  // namespace

void ModelConfig::validate() const {
  require(d_model > 0 && heads > 0 && d_model % heads == 0, "d_model must be a positive multiple of heads");
  require(ffn_hidden > 0, "ffn_hidden must be positive");
  require(style_layers >= 1 && audio_layers >= 1 && decoder_blocks >= 1, "layer counts must be >= 1");
  require(kernels >= 1, "kernels (K) must be >= 1");
  require(window >= 0, "window must be >= 0");
  require(vocab >= 1, "vocab must be >= 1");
  require(n_styles >= 2, "n_styles must be >= 2");
  require(sync_embed > 0 && sync_hidden > 0 && disc_hidden > 0, "discriminator widths must be positive");
  face_split();
}

void LossWeights::validate() const {
  for (double v : {rec, trip, sync, tem, style, gamma})
    require(v >= 0.0, "loss weights and margin must be non-negative");
  require(mu >= 0.0 && mu <= 1.0, "mu must lie in [0,1]");
}

void TrainConfig::validate(const ModelConfig& model) const {
  require(clip_len >= model.window_len(), "clip_len must be >= 2w+1");
  require(lr > 0.0 && disc_lr > 0.0 && pretrain_lr > 0.0, "learning rates must be positive");
  require(steps >= 0 && pretrain_steps >= 0, "step counts must be non-negative");
  require(batch_size >= 1 && pretrain_batch >= 1, "batch sizes must be >= 1");
  require(log_every >= 1, "log_every must be >= 1");
  weights.validate();
}

json RunConfig::to_json() const {
  json j = json::object();
  for (const auto& [key, b] : bindings()) j[key] = b.get(*this);
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  require(j.is_object(), "config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    auto it = bindings().find(key);
    if (it == bindings().end()) throw ContractError("unknown config key '" + key + "'");
    try {
      it->second.put(c, value);
    } catch (const json::exception& e) {
      throw ContractError("bad value for config key '" + key + "': " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what(), e.byte);
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = bindings().find(key);
  if (it == bindings().end()) throw ContractError("unknown config key '" + key + "'");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  try {
    it->second.put(*this, parsed);
  } catch (const json::exception& e) {
    throw ContractError("bad value for config key '" + key + "': " + e.what());
  }
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, b] : bindings()) out.push_back(key);
  return out;
}

void RunConfig::validate() const {
  model.validate();
  train.validate(model);
}

RunConfig desk_config() {
  RunConfig c;
  c.model.d_model = 64;
  c.model.heads = 4;
  c.model.ffn_hidden = 128;
  c.model.style_layers = 2;
  c.model.audio_layers = 2;
  c.model.decoder_blocks = 2;
  c.model.sync_embed = 64;
  c.model.sync_hidden = 64;
  c.model.disc_hidden = 32;
  c.train.lr = 1e-3;
  c.train.batch_size = 2;
  return c;
}

}  // namespace styletalk
