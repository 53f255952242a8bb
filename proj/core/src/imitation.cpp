#include "roiloc/imitation.hpp"

#include <atomic>
#include <cstdlib>

#include "roiloc/error.hpp"

namespace roiloc {

namespace {

std::atomic<std::uint64_t> g_oracle_calls{0};

std::int64_t distance_sq(const Index3& a, const Index3& b) {
  std::int64_t sum = 0;
  for (int ax = 0; ax < 3; ++ax) {
    const std::int64_t d = a[ax] - b[ax];
    sum += d * d;
  }
  return sum;
}

}  // namespace

void OracleConfig::validate() const {
  if (!(coarse_threshold > fine_threshold && fine_threshold >= 1)) {
    throw Error("oracle thresholds must satisfy coarse > fine >= 1");
  }
}

Action imitation_action(const Index3& current_centre, const Index3& gt_centre, const OracleConfig& config) {
  g_oracle_calls.fetch_add(1, std::memory_order_relaxed);
  int best_axis = -1;
  int best_dist = 0;
  for (int a = 0; a < 3; ++a) {
    const int d = std::abs(gt_centre[a] - current_centre[a]);
    if (d > best_dist) {
      best_dist = d;
      best_axis = a;
    }
  }
  if (best_axis < 0) return Action::terminate();
  const Sign sign = gt_centre[best_axis] > current_centre[best_axis] ? Sign::Plus : Sign::Minus;
  Level level = Level::VeryFine;
  if (best_dist >= config.coarse_threshold) {
    level = Level::Coarse;
  } else if (best_dist >= config.fine_threshold) {
    level = Level::Fine;
  }
  return Action::move(static_cast<Axis>(best_axis), sign, level);
}

bool moves_away(Action action, const Index3& current_centre, const Index3& gt_centre) {
  if (action.is_terminate()) return current_centre != gt_centre;
  const Index3 d = action.displacement();
  const Index3 next{current_centre[0] + d[0], current_centre[1] + d[1], current_centre[2] + d[2]};
  return distance_sq(next, gt_centre) > distance_sq(current_centre, gt_centre);
}

Action correct(Action predicted, const Index3& current_centre, const Index3& gt_centre,
               const OracleConfig& config) {
  g_oracle_calls.fetch_add(1, std::memory_order_relaxed);
  if (moves_away(predicted, current_centre, gt_centre)) {
    return imitation_action(current_centre, gt_centre, config);
  }
  return predicted;
}

std::uint64_t oracle_call_count() { return g_oracle_calls.load(std::memory_order_relaxed); }

}  // namespace roiloc
