#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ctxprompt/model.hpp"

namespace ctxprompt {

// Layout: the line "CTXPROMPT-CHECKPOINT 1", one JSON header line holding the
// model config, vocabulary hash, byte order ("little-endian"), dtype
// ("float64") and parameter count, then the raw parameter array.
struct Checkpoint {
  Parameters params;
  std::uint64_t vocab_hash = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Parameters& params,
                     std::uint64_t vocab_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string model_config_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& json);

// FNV-1a of a file's bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace ctxprompt
