#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roiloc/box.hpp"

namespace roiloc {

enum class IntensityUnits { HU, Arbitrary };

std::string_view to_string(IntensityUnits units);
IntensityUnits units_from_string(std::string_view text);

/// 3D scalar grid, x fastest. Immutable once built; share freely across threads.
class Volume {
 public:
  Volume() = default;
  Volume(Index3 dims, Vec3 spacing_mm, IntensityUnits units, std::vector<std::int16_t> voxels);

  const Index3& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  IntensityUnits units() const { return units_; }
  std::span<const std::int16_t> voxels() const { return voxels_; }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x;
  }
  std::int16_t at(int x, int y, int z) const { return voxels_[index(x, y, z)]; }

  Index3 centre_voxel() const { return {dims_[0] / 2, dims_[1] / 2, dims_[2] / 2}; }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Index3 dims_{0, 0, 0};
  Vec3 spacing_{1.0, 1.0, 1.0};
  IntensityUnits units_ = IntensityUnits::HU;
  std::vector<std::int16_t> voxels_;
};

/// Writes `<stem>.raw` (int16 little endian) and the `<stem>.json` sidecar.
void save_volume(const Volume& volume, const std::filesystem::path& raw_path);

/// Reads a `.raw` payload and its JSON sidecar (same stem, `.json`).
Volume load_volume(const std::filesystem::path& raw_path);

/// Intensity window applied before scaling patches into [0, 1].
struct PatchConfig {
  double window_low = -200.0;
  double window_high = 400.0;
};

/// Normalized resampled region, x fastest.
struct Patch {
  Index3 shape{0, 0, 0};
  std::vector<float> values;

  std::size_t size() const { return values.size(); }
};

/// Trilinear resample of `box` (clipped to the volume) onto `out_shape` sample
/// centres. HU volumes are clamped to the configured window; arbitrary-unit
/// volumes are min-max scaled over the resampled values.
Patch extract_patch(const Volume& volume, const BoundingBox& box, const Index3& out_shape,
                    const PatchConfig& config = {});

}  // namespace roiloc
