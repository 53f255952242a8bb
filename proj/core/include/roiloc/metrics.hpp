#pragma once

#include <string>
#include <string_view>

#include "roiloc/box.hpp"

namespace roiloc {

double iou(const BoundingBox& a, const BoundingBox& b);
double dice(const BoundingBox& a, const BoundingBox& b);
/// Euclidean distance between continuous box centres, scaled per axis to mm.
double centroid_distance(const BoundingBox& a, const BoundingBox& b, const Vec3& spacing);
/// Mean absolute gap over the six corresponding faces, in mm.
double wall_distance(const BoundingBox& a, const BoundingBox& b, const Vec3& spacing);

/// Detection bar: dice >= 0.5, equivalently iou >= 1/3.
inline constexpr double kDetectionDice = 0.5;

struct MetricReport {
  double iou = 0.0;
  double dice = 0.0;
  double centroid_dist_mm = 0.0;
  double wall_dist_mm = 0.0;
  bool detected = false;
};

MetricReport measure(const BoundingBox& predicted, const BoundingBox& truth, const Vec3& spacing);

inline constexpr std::string_view kMetricCsvHeader = "scan_id,iou,dice,centroid_mm,wall_mm,detected";
std::string to_csv_row(std::string_view scan_id, const MetricReport& report);

}  // namespace roiloc
