#pragma once

#include <cstdint>
#include <utility>

#include "roiloc/dataset.hpp"
#include "roiloc/volume.hpp"

namespace roiloc {

struct Range {
  double min = 0.0;
  double max = 0.0;
};

/// Procedural CT-like volume: Gaussian background, one target ellipsoid whose
/// intensity falls off from `target_intensity.max` at the centre to
/// `target_intensity.min` at the rim, and uniform-intensity distractors.
struct PhantomConfig {
  Index3 dims{64, 64, 64};
  Vec3 spacing{1.0, 1.0, 3.0};
  double background = 0.0;
  double noise_sigma = 15.0;
  Range target_intensity{120.0, 320.0};
  Range target_semi_axes{7.0, 11.0};
  /// Target centre is drawn within +/- this many voxels of the volume centre.
  int target_centre_jitter = 6;
  int distractor_count = 2;
  Range distractor_intensity{50.0, 90.0};
  Range distractor_semi_axes{3.0, 5.0};
  std::uint64_t seed = 1;
  std::string organ_label = "phantom";

  void validate() const;
};

std::pair<Volume, Annotation> generate_phantom(const PhantomConfig& config,
                                               const std::string& scan_id = "phantom");

}  // namespace roiloc
