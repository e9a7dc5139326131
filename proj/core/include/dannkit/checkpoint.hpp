#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dannkit/model.hpp"

namespace dannkit {

struct CheckpointMeta {
    std::size_t epoch = 0;
    double validation_loss = 0.0;
    double validation_accuracy = 0.0;
    std::string config_hash;
};

struct Checkpoint {
    ModelParams params;
    CheckpointMeta meta;
};

// FNV-1a 64 over the canonical JSON encoding of the config; hex string.
std::string config_hash(const BackboneConfig& config);

// Layout: magic "ADSH" | version byte | u32le header length | JSON header |
// little-endian float64 blobs in header order. The header lists parameter
// names, shapes and byte offsets (relative to the blob section) plus the
// BackboneConfig and metadata.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const CheckpointMeta& meta);

Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace dannkit
