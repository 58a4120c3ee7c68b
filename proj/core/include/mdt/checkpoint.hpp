#pragma once

#include <string>

#include "mdt/trainer.hpp"

namespace mdt {

// Versioned binary container: magic+version, JSON manifest (configs, epoch,
// RNG state, optimizer step counts, tensor directory), raw little-endian
// float64 payload, CRC-32 over manifest+payload. Parameters, Adam moments and
// RNG state round-trip losslessly: reload followed by one step reproduces the
// uninterrupted step bit for bit.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const TrainState& st, const std::string& path,
                     const std::string& config_hash);

// Throws IoError on corruption/version mismatch, ConfigError on a manifest
// that does not form a valid model.
TrainState load_checkpoint(const std::string& path);

// The config hash the checkpoint was written under.
std::string checkpoint_config_hash(const std::string& path);

}  // namespace mdt
