#pragma once

#include <string>

#include "evotf/model.hpp"

// On-disk model format: [u64 manifest length][JSON manifest][float32 blob].
// The manifest records a format version, the model configuration, and the
// name/shape/byte-offset of every tensor; the blob stores all values
// little-endian in registry order.  Loading reconstructs the exact model, so
// save -> load -> save produces identical bytes.
namespace evotf {

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

// Config <-> JSON text (object with the ModelConfig field names; unknown
// keys are rejected, missing keys keep their defaults).
std::string config_json(const ModelConfig& cfg);
ModelConfig parse_config_json(const std::string& text);

}  // namespace evotf
