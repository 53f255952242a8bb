#pragma once

#include <filesystem>
#include <string>

#include "roiloc/nn/network.hpp"

namespace roiloc::nn {

/// Checkpoint layout: 8-byte magic "ROILOCNN", u32 format version, u64 JSON
/// length, the JSON NetworkSpec, then every layer's weight, bias, running
/// mean and running variance as float32 little endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Network<float>& network);
Network<float> deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Network<float>& network, const std::filesystem::path& path);
Network<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace roiloc::nn
