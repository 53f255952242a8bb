#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "roiloc/box.hpp"
#include "roiloc/nn/network.hpp"

namespace roiloc {

inline constexpr int kArchitectureCount = 3;

/// Navigation and bbox networks for architectures 1..3 (index arch_id - 1),
/// plus what inference needs to reproduce the training setup.
struct ModelBundle {
  std::array<nn::Network<float>, kArchitectureCount> navigation;
  std::array<nn::Network<float>, kArchitectureCount> bbox;
  Index3 box_size{1, 1, 1};      // pre-selected navigation box size
  Index3 input_shape{12, 12, 12};
  std::string config_fingerprint;

  /// Every network present with the expected head, arch id and input shape.
  bool complete() const;
  void validate() const;
};

/// Directory layout: bundle.json plus arch{1,2,3}_{nav,bbox}.ckpt.
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);
ModelBundle load_bundle(const std::filesystem::path& dir);

}  // namespace roiloc
