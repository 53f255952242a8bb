#pragma once

#include <span>
#include <string>
#include <vector>

#include "roiloc/inference.hpp"

namespace roiloc {

struct FusionConfig {
  double offset_percent = 33.0;
  /// Other architectures join the highest-sum one when their confidence sum reaches this.
  double include_threshold = 0.66;

  void validate() const;
};

struct ArchConfidence {
  int arch_id = 1;
  double sum = 0.0;
};

/// Per-architecture confidence sums, ordered by arch id.
std::vector<ArchConfidence> confidence_sums(std::span<const Candidate> candidates);

/// Architectures whose boxes enter the fusion: the highest sum (lowest id on
/// ties) plus every other one at or above the threshold. Sorted by arch id.
std::vector<int> select_architectures(std::span<const Candidate> candidates, double include_threshold);

/// Shrinks the union of the selected boxes towards its centre by O% of the
/// spread of lower (and of upper) bounds, per axis, then rounds half away from
/// the centre and clips to the volume.
BoundingBox fuse(std::span<const Candidate> candidates, const FusionConfig& config, const Index3& dims);

struct ScanCandidates {
  std::string scan_id;
  Index3 dims{0, 0, 0};
  std::vector<Candidate> candidates;
  BoundingBox truth;
};

struct SweepPoint {
  double offset_percent = 0.0;
  double mean_iou = 0.0;
  int n_scans = 0;
};

std::vector<SweepPoint> sweep_offset(std::span<const ScanCandidates> scans, std::span<const double> offsets,
                                     double include_threshold = FusionConfig{}.include_threshold);

inline constexpr const char* kSweepCsvHeader = "offset_percent,mean_iou,n_scans";
std::string sweep_csv(const std::vector<SweepPoint>& points);

/// {0, 5, ..., 45}
std::vector<double> default_sweep_offsets();

}  // namespace roiloc
