#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "segtrm/params.h"

namespace segtrm {

inline constexpr char kCheckpointMagic[8] = {'S', 'G', 'T', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint64_t step = 0;
  std::map<std::string, std::string> metadata;
};

template <typename T>
struct Checkpoint {
  CheckpointHeader header;
  ParamStore<T> params;  // values and Adam moments
};

// Little-endian binary: magic, version, scalar width, step, metadata pairs,
// then every tensor (name, shape, value, first moment, second moment). The
// file is written beside `path` and renamed into place.
template <typename T>
void SaveCheckpoint(const std::filesystem::path& path, const ParamStore<T>& params,
                    std::uint64_t step, const std::map<std::string, std::string>& metadata);

// Throws std::runtime_error on a bad header, version or truncated file.
template <typename T>
Checkpoint<T> LoadCheckpoint(const std::filesystem::path& path);

// Loads `path` and copies it into `params`, whose names and shapes must match.
// `params` is left untouched when anything fails.
template <typename T>
CheckpointHeader RestoreCheckpoint(const std::filesystem::path& path, ParamStore<T>& params);

}  // namespace segtrm
