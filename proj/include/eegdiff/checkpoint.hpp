#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eegdiff/nn.hpp"

namespace eegdiff {

/// Model kind stored in the "DDPM" container.
enum class CheckpointKind : std::uint8_t {
    Denoiser = 0,
    Classifier = 1,
};

struct LoadedCheckpoint {
    CheckpointKind kind;
    std::map<std::string, std::string> config;
    NamedParams params;

    const std::string& require(const std::string& key) const;
};

/// Layout: magic "DDPM", u16 version, u8 kind, u8 reserved,
/// u32 config length + key=value lines, u32 param count, per parameter
/// (u16 name length + name, u8 ndim, u32 dims..., u64 offset in doubles),
/// u64 total doubles, then the flat little-endian f64 buffer.
void save_checkpoint(const std::filesystem::path& path, CheckpointKind kind,
                     const std::map<std::string, std::string>& config, const NamedParams& params);

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace eegdiff
