#pragma once

#include <filesystem>
#include <string>

#include "xmodal/trainer.hpp"

namespace xmodal {

// Binary layout, all integers little-endian u32:
//   "XMODALCK" | version | config text (length-prefixed "key=value" lines) |
//   tensor count | per tensor: name (length-prefixed), rank, extents, f32 values.
// Tensors are the network parameters followed by "centers" and the Adam
// moments "adam.m.<param>" / "adam.v.<param>".
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const TrainResult& state);
TrainResult deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const TrainResult& state);
TrainResult load_checkpoint(const std::filesystem::path& path);

}  // namespace xmodal
