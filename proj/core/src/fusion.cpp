#include "roiloc/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "roiloc/error.hpp"
#include "roiloc/metrics.hpp"

namespace roiloc {

void FusionConfig::validate() const {
  if (!(offset_percent >= 0.0 && offset_percent < 50.0)) throw Error("fusion offset must lie in [0, 50)");
  if (!(include_threshold >= 0.0)) throw Error("fusion threshold must be >= 0");
}

std::vector<ArchConfidence> confidence_sums(std::span<const Candidate> candidates) {
  std::map<int, double> sums;
  for (const auto& c : candidates) sums[c.arch_id] += c.confidence;
  std::vector<ArchConfidence> out;
  for (const auto& [arch, sum] : sums) out.push_back({arch, sum});
  return out;
}

std::vector<int> select_architectures(std::span<const Candidate> candidates, double include_threshold) {
  const auto sums = confidence_sums(candidates);
  if (sums.empty()) throw Error("cannot fuse an empty candidate list");
  const auto best = std::max_element(sums.begin(), sums.end(),
                                     [](const ArchConfidence& a, const ArchConfidence& b) { return a.sum < b.sum; });
  std::vector<int> out;
  for (const auto& s : sums) {
    if (s.arch_id == best->arch_id || s.sum >= include_threshold) out.push_back(s.arch_id);
  }
  return out;
}

BoundingBox fuse(std::span<const Candidate> candidates, const FusionConfig& config, const Index3& dims) {
  config.validate();
  const auto archs = select_architectures(candidates, config.include_threshold);
  const double o = config.offset_percent / 100.0;
  BoundingBox out;
  for (int a = 0; a < 3; ++a) {
    int min_l = 0, max_l = 0, min_u = 0, max_u = 0;
    bool first = true;
    for (const auto& c : candidates) {
      if (std::find(archs.begin(), archs.end(), c.arch_id) == archs.end()) continue;
      const int l = c.box.lower[a];
      const int u = c.box.lower[a] + c.box.size[a];
      if (first) {
        min_l = max_l = l;
        min_u = max_u = u;
        first = false;
      } else {
        min_l = std::min(min_l, l);
        max_l = std::max(max_l, l);
        min_u = std::min(min_u, u);
        max_u = std::max(max_u, u);
      }
    }
    const double lo = min_l + o * (max_l - min_l);
    const double hi = max_u - o * (max_u - min_u);
    // Half away from the centre: lower ties go down, upper ties go up.
    int lower = static_cast<int>(std::ceil(lo - 0.5));
    int upper = static_cast<int>(std::floor(hi + 0.5));
    if (upper - lower < 1) {
      lower = static_cast<int>(std::floor((lo + hi) / 2.0));
      upper = lower + 1;
    }
    out.lower[a] = lower;
    out.size[a] = upper - lower;
  }
  out = clip_to(out, dims);
  for (int a = 0; a < 3; ++a) {
    if (out.size[a] < 1) throw Error("fused box falls outside the volume");
  }
  return out;
}

std::vector<SweepPoint> sweep_offset(std::span<const ScanCandidates> scans, std::span<const double> offsets,
                                     double include_threshold) {
  std::vector<SweepPoint> out;
  for (double offset : offsets) {
    FusionConfig cfg{offset, include_threshold};
    double sum = 0.0;
    for (const auto& s : scans) sum += iou(fuse(s.candidates, cfg, s.dims), s.truth);
    out.push_back({offset, scans.empty() ? 0.0 : sum / scans.size(), static_cast<int>(scans.size())});
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << kSweepCsvHeader << '\n';
  os.precision(9);
  for (const auto& p : points) os << p.offset_percent << ',' << p.mean_iou << ',' << p.n_scans << '\n';
  return os.str();
}

std::vector<double> default_sweep_offsets() {
  std::vector<double> out;
  for (int o = 0; o <= 45; o += 5) out.push_back(o);
  return out;
}

}  // namespace roiloc
