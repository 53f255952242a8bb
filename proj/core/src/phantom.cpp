#include "roiloc/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "roiloc/error.hpp"

namespace roiloc {

namespace {

struct Ellipsoid {
  Index3 centre;
  Vec3 semi;
  double intensity;

  // Voxel-space bounds of the rasterized ellipsoid (inclusive extent floor(semi)).
  BoundingBox extent() const {
    Index3 r{};
    for (int a = 0; a < 3; ++a) r[a] = static_cast<int>(std::floor(semi[a]));
    return {{centre[0] - r[0], centre[1] - r[1], centre[2] - r[2]},
            {2 * r[0] + 1, 2 * r[1] + 1, 2 * r[2] + 1}};
  }

  double radius_sq(int x, int y, int z) const {
    const double dx = (x - centre[0]) / semi[0];
    const double dy = (y - centre[1]) / semi[1];
    const double dz = (z - centre[2]) / semi[2];
    return dx * dx + dy * dy + dz * dz;
  }
};

bool separated(const BoundingBox& a, const BoundingBox& b, int gap) {
  for (int ax = 0; ax < 3; ++ax) {
    if (a.lower[ax] + a.size[ax] + gap <= b.lower[ax]) return true;
    if (b.lower[ax] + b.size[ax] + gap <= a.lower[ax]) return true;
  }
  return false;
}

constexpr int kMargin = 2;

}  // namespace

void PhantomConfig::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 8) throw Error("phantom dims must be >= 8");
    if (!(spacing[a] > 0.0)) throw Error("non-positive spacing");
  }
  if (!(target_semi_axes.min >= 1.0) || target_semi_axes.max < target_semi_axes.min) {
    throw Error("invalid target semi-axis range");
  }
  if (target_intensity.max < target_intensity.min || target_intensity.min <= background) {
    throw Error("target intensity range must lie above the background");
  }
  if (target_centre_jitter < 0) throw Error("negative target centre jitter");
  const int reach = static_cast<int>(std::floor(target_semi_axes.max)) + target_centre_jitter + kMargin;
  for (int a = 0; a < 3; ++a) {
    const int c = dims[a] / 2;
    if (c - reach < 0 || c + reach > dims[a] - 1) {
      throw Error("target organ cannot fit inside the volume with a 2-voxel margin");
    }
  }
  if (distractor_count < 0) throw Error("negative distractor count");
  if (distractor_count > 0) {
    if (!(distractor_semi_axes.min >= 1.0) || distractor_semi_axes.max < distractor_semi_axes.min) {
      throw Error("invalid distractor semi-axis range");
    }
    if (distractor_intensity.min <= background || distractor_intensity.max < distractor_intensity.min) {
      throw Error("distractor intensity range must lie above the background");
    }
    const int dreach = static_cast<int>(std::floor(distractor_semi_axes.max)) + kMargin;
    for (int a = 0; a < 3; ++a) {
      if (2 * dreach + 1 > dims[a]) throw Error("distractors cannot fit inside the volume");
    }
  }
}

std::pair<Volume, Annotation> generate_phantom(const PhantomConfig& config, const std::string& scan_id) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  auto uniform = [&rng](double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
  };
  auto uniform_int = [&rng](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };

  const Index3& dims = config.dims;
  Ellipsoid target;
  for (int a = 0; a < 3; ++a) {
    target.centre[a] = dims[a] / 2 + uniform_int(-config.target_centre_jitter, config.target_centre_jitter);
    target.semi[a] = uniform(config.target_semi_axes.min, config.target_semi_axes.max);
  }
  target.intensity = config.target_intensity.max;

  std::vector<Ellipsoid> distractors;
  std::vector<BoundingBox> occupied{target.extent()};
  for (int d = 0; d < config.distractor_count; ++d) {
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
      Ellipsoid e;
      for (int a = 0; a < 3; ++a) {
        e.semi[a] = uniform(config.distractor_semi_axes.min, config.distractor_semi_axes.max);
        const int r = static_cast<int>(std::floor(e.semi[a]));
        e.centre[a] = uniform_int(r + kMargin, dims[a] - 1 - r - kMargin);
      }
      e.intensity = uniform(config.distractor_intensity.min, config.distractor_intensity.max);
      const BoundingBox ext = e.extent();
      placed = std::all_of(occupied.begin(), occupied.end(),
                           [&](const BoundingBox& o) { return separated(ext, o, kMargin); });
      if (placed) {
        occupied.push_back(ext);
        distractors.push_back(e);
      }
    }
    if (!placed) throw Error("cannot place distractor ellipsoids disjointly");
  }

  std::normal_distribution<double> noise(0.0, config.noise_sigma > 0 ? config.noise_sigma : 1.0);
  const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  std::vector<double> field(count);
  for (double& v : field) {
    v = config.background + (config.noise_sigma > 0 ? noise(rng) : 0.0);
  }
  auto idx = [&dims](int x, int y, int z) {
    return (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
  };

  for (const Ellipsoid& e : distractors) {
    const BoundingBox ext = e.extent();
    for (int z = ext.lower[2]; z < ext.upper()[2]; ++z)
      for (int y = ext.lower[1]; y < ext.upper()[1]; ++y)
        for (int x = ext.lower[0]; x < ext.upper()[0]; ++x)
          if (e.radius_sq(x, y, z) <= 1.0) field[idx(x, y, z)] = e.intensity;
  }

  const double rim = config.target_intensity.min;
  const double peak = config.target_intensity.max;
  Index3 lo{dims[0], dims[1], dims[2]};
  Index3 hi{-1, -1, -1};
  const BoundingBox ext = target.extent();
  for (int z = ext.lower[2]; z < ext.upper()[2]; ++z) {
    for (int y = ext.lower[1]; y < ext.upper()[1]; ++y) {
      for (int x = ext.lower[0]; x < ext.upper()[0]; ++x) {
        const double r2 = target.radius_sq(x, y, z);
        if (r2 > 1.0) continue;
        field[idx(x, y, z)] = rim + (peak - rim) * (1.0 - r2);
        const Index3 p{x, y, z};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], p[a]);
          hi[a] = std::max(hi[a], p[a]);
        }
      }
    }
  }

  std::vector<std::int16_t> voxels(count);
  for (std::size_t i = 0; i < count; ++i) {
    voxels[i] = static_cast<std::int16_t>(std::clamp(std::lround(field[i]), -32768L, 32767L));
  }

  Annotation annotation;
  annotation.scan_id = scan_id;
  annotation.organ_label = config.organ_label;
  annotation.gt_box = {lo, {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}};
  return {Volume(dims, config.spacing, IntensityUnits::HU, std::move(voxels)), annotation};
}

}  // namespace roiloc
