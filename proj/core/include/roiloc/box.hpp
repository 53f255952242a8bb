#pragma once

#include <array>
#include <cstdint>
#include <ostream>

namespace roiloc {

using Index3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

/// Axis-aligned voxel box, half-open: [lower, lower + size) on every axis.
struct BoundingBox {
  Index3 lower{0, 0, 0};
  Index3 size{1, 1, 1};

  Index3 upper() const {
    return {lower[0] + size[0], lower[1] + size[1], lower[2] + size[2]};
  }

  /// Integer anchor used for navigation: lower + size / 2 (floor).
  Index3 centre_voxel() const {
    return {lower[0] + size[0] / 2, lower[1] + size[1] / 2, lower[2] + size[2] / 2};
  }

  /// Continuous geometric centre.
  Vec3 centre() const {
    return {lower[0] + size[0] / 2.0, lower[1] + size[1] / 2.0, lower[2] + size[2] / 2.0};
  }

  std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(size[0]) * size[1] * size[2];
  }

  bool valid() const { return size[0] >= 1 && size[1] >= 1 && size[2] >= 1; }

  bool inside(const Index3& dims) const {
    for (int a = 0; a < 3; ++a) {
      if (lower[a] < 0 || lower[a] + size[a] > dims[a]) return false;
    }
    return true;
  }

  bool contains(const BoundingBox& other) const {
    for (int a = 0; a < 3; ++a) {
      if (other.lower[a] < lower[a] || other.lower[a] + other.size[a] > lower[a] + size[a]) {
        return false;
      }
    }
    return true;
  }

  BoundingBox translated(const Index3& by) const {
    return {{lower[0] + by[0], lower[1] + by[1], lower[2] + by[2]}, size};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Box of the given size whose centre_voxel() equals `centre`.
inline BoundingBox box_from_centre(const Index3& centre, const Index3& size) {
  return {{centre[0] - size[0] / 2, centre[1] - size[1] / 2, centre[2] - size[2] / 2}, size};
}

/// Shift (not shrink) a box so it lies inside `dims`. Sizes larger than the
/// volume are truncated to the volume extent.
BoundingBox shift_inside(const BoundingBox& box, const Index3& dims);

/// Intersection with the volume extent. Returns a box with a zero size
/// component when nothing remains.
BoundingBox clip_to(const BoundingBox& box, const Index3& dims);

/// Voxel count of a ∩ b (0 when disjoint).
std::int64_t intersection_count(const BoundingBox& a, const BoundingBox& b);

std::ostream& operator<<(std::ostream& os, const BoundingBox& box);

}  // namespace roiloc
