#include "ctxprompt/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "ctxprompt/error.hpp"
#include "ctxprompt/rng.hpp"

namespace ctxprompt {

namespace {

constexpr const char* kMagic = "CTXPROMPT-CHECKPOINT 1";

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["embed_dim"] = c.embed_dim;
  j["max_len"] = c.max_len;
  j["vocab_size"] = c.vocab_size;
  j["visual_dim"] = c.visual_dim;
  j["mlp_ratio"] = c.mlp_ratio;
  j["seed"] = c.seed;
  return j;
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig c;
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.visual_dim = j.at("visual_dim").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out = (out << 8) | ((v >> (8 * i)) & 0xff);
  return out;
}

}  // namespace

std::string model_config_json(const ModelConfig& config) { return config_to_json(config).dump(); }

ModelConfig model_config_from_json(const std::string& json) {
  return config_from(nlohmann::json::parse(json));
}

void save_checkpoint(const std::filesystem::path& path, const Parameters& params,
                     std::uint64_t vocab_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  nlohmann::ordered_json header;
  header["config"] = config_to_json(params.config());
  header["vocab_hash"] = hex64(vocab_hash);
  header["byte_order"] = "little-endian";
  header["dtype"] = "float64";
  header["count"] = params.size();
  out << kMagic << '\n' << header.dump() << '\n';
  for (double v : params.values()) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::string magic;
  std::string header_line;
  if (!std::getline(in, magic) || magic != kMagic) {
    throw ParseError(path.string(), 1, "not a checkpoint file");
  }
  if (!std::getline(in, header_line)) throw ParseError(path.string(), 2, "missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 2, e.what());
  }
  if (header.value("byte_order", "") != "little-endian" || header.value("dtype", "") != "float64") {
    throw ParseError(path.string(), 2, "unsupported byte order or dtype");
  }
  const ModelConfig config = config_from(header.at("config"));
  config.validate();
  Checkpoint ck{Parameters(config), std::stoull(header.at("vocab_hash").get<std::string>(), nullptr, 16)};
  if (header.at("count").get<std::size_t>() != ck.params.size()) {
    throw ParseError(path.string(), 2, "parameter count does not match config");
  }
  for (auto& v : ck.params.values()) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      throw Error("truncated checkpoint " + path.string());
    }
    v = std::bit_cast<double>(to_little(bits));
  }
  return ck;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

}  // namespace ctxprompt
