#include "roiloc/box.hpp"

#include <algorithm>

namespace roiloc {

BoundingBox shift_inside(const BoundingBox& box, const Index3& dims) {
  BoundingBox out = box;
  for (int a = 0; a < 3; ++a) {
    out.size[a] = std::clamp(box.size[a], 1, dims[a]);
    out.lower[a] = std::clamp(box.lower[a], 0, dims[a] - out.size[a]);
  }
  return out;
}

BoundingBox clip_to(const BoundingBox& box, const Index3& dims) {
  BoundingBox out;
  for (int a = 0; a < 3; ++a) {
    const int lo = std::max(box.lower[a], 0);
    const int hi = std::min(box.lower[a] + box.size[a], dims[a]);
    out.lower[a] = lo;
    out.size[a] = std::max(hi - lo, 0);
  }
  return out;
}

std::int64_t intersection_count(const BoundingBox& a, const BoundingBox& b) {
  std::int64_t count = 1;
  for (int ax = 0; ax < 3; ++ax) {
    const int lo = std::max(a.lower[ax], b.lower[ax]);
    const int hi = std::min(a.lower[ax] + a.size[ax], b.lower[ax] + b.size[ax]);
    if (hi <= lo) return 0;
    count *= hi - lo;
  }
  return count;
}

std::ostream& operator<<(std::ostream& os, const BoundingBox& box) {
  return os << "[lower (" << box.lower[0] << ',' << box.lower[1] << ',' << box.lower[2]
            << ") size (" << box.size[0] << ',' << box.size[1] << ',' << box.size[2] << ")]";
}

}  // namespace roiloc
