#include "roiloc/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace roiloc {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const auto inter = intersection_count(a, b);
  const auto uni = a.voxel_count() + b.voxel_count() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

double dice(const BoundingBox& a, const BoundingBox& b) {
  const auto inter = intersection_count(a, b);
  const auto sum = a.voxel_count() + b.voxel_count();
  return sum > 0 ? 2.0 * static_cast<double>(inter) / static_cast<double>(sum) : 0.0;
}

double centroid_distance(const BoundingBox& a, const BoundingBox& b, const Vec3& spacing) {
  const Vec3 ca = a.centre();
  const Vec3 cb = b.centre();
  double sq = 0.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double d = (ca[ax] - cb[ax]) * spacing[ax];
    sq += d * d;
  }
  return std::sqrt(sq);
}

double wall_distance(const BoundingBox& a, const BoundingBox& b, const Vec3& spacing) {
  double total = 0.0;
  for (int ax = 0; ax < 3; ++ax) {
    total += std::abs(a.lower[ax] - b.lower[ax]) * spacing[ax];
    total += std::abs(a.upper()[ax] - b.upper()[ax]) * spacing[ax];
  }
  return total / 6.0;
}

MetricReport measure(const BoundingBox& predicted, const BoundingBox& truth, const Vec3& spacing) {
  MetricReport r;
  r.iou = iou(predicted, truth);
  r.dice = dice(predicted, truth);
  r.centroid_dist_mm = centroid_distance(predicted, truth, spacing);
  r.wall_dist_mm = wall_distance(predicted, truth, spacing);
  r.detected = r.dice >= kDetectionDice;
  return r;
}

std::string to_csv_row(std::string_view scan_id, const MetricReport& report) {
  char buf[160];
  std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.4f,%.4f,%d", report.iou, report.dice,
                report.centroid_dist_mm, report.wall_dist_mm, report.detected ? 1 : 0);
  return std::string(scan_id) + buf;
}

}  // namespace roiloc
