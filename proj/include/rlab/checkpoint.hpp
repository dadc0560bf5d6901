#pragma once

#include <filesystem>

#include <json.hpp>

#include "rlab/encoder.hpp"

namespace rlab {

struct Checkpoint {
    EncoderConfig config;
    EncoderParams params;
};

// Binary checkpoint layout (all integers little-endian):
//
//   bytes 0..7   magic "RLABCKPT"
//   u32          format version (1)
//   u64          header length N
//   N bytes      JSON header: {"config": {...}, "tensors": [{"name", "length", "offset"}...]}
//   ...          raw IEEE-754 binary64 tensor data, little-endian, in header order
//
// Round trip is bit-exact, including signed zeros.
void save_checkpoint(const std::filesystem::path& path, const EncoderConfig& config,
                     const EncoderParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json encoder_config_to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

}  // namespace rlab
