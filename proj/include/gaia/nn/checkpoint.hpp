#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gaia/nn/layers.hpp"

namespace gaia::nn {

// Checkpoint container: <dir>/manifest.json (config, step, named param table
// with offsets) + <dir>/params.f32 (one little-endian float32 blob).
struct CheckpointInfo {
    nlohmann::json config;
    int64_t step = 0;
};

void save_checkpoint(const std::filesystem::path& dir, const ParamStore& ps, const nlohmann::json& config,
                     int64_t step);

// Loads parameters by name into an already-constructed store; shapes must
// match. Returns config and step.
CheckpointInfo load_checkpoint(const std::filesystem::path& dir, ParamStore& ps);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir);

}  // namespace gaia::nn
