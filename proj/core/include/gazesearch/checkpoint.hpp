#pragma once
// Weight checkpoints.
//
// Layout, little-endian:
//   8 bytes    magic "GZSCKPT1"
//   u32        manifest length, then that many bytes of JSON
//              {"format": 1, "config": {...}, "seed": n, "step": n}
//   u32        tensor count
//   per tensor:
//     u32 name length, name bytes (UTF-8)
//     u32 ndim (always 2), u32 rows, u32 cols
//     rows * cols float32 values, row-major

#include "gazesearch/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace gazesearch::checkpoint {

std::string config_to_json(const model::ModelConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
model::ModelConfig config_from_json(const std::string& text);

struct Manifest {
    model::ModelConfig config;
    std::uint64_t seed = 0;
    long step = 0;
};

void save(const std::filesystem::path& path, const model::ChestSearch& model, long step);

struct Loaded {
    Manifest manifest;
    model::ChestSearch model;
};

// Rebuilds the model from the manifest config and fills every parameter.
// Throws DataError on a truncated file, bad magic, an unknown or missing
// tensor, or a shape that disagrees with the config.
Loaded load(const std::filesystem::path& path);

}  // namespace gazesearch::checkpoint
