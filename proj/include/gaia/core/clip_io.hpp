#pragma once

#include <filesystem>

#include "gaia/core/types.hpp"

namespace gaia::core {

// Clip container: a directory holding manifest.json plus one raw
// little-endian float32 row-major binary per field. read(write(c)) is
// field-wise bit-identical.
void write_clip(const VideoClip& clip, const std::filesystem::path& dir);
VideoClip read_clip(const std::filesystem::path& dir);

// All clip directories directly under root (containing manifest.json), sorted.
std::vector<std::filesystem::path> list_clips(const std::filesystem::path& root);

}  // namespace gaia::core
