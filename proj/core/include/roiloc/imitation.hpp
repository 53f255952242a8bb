#pragma once

#include <cstdint>

#include "roiloc/nav_env.hpp"

namespace roiloc {

/// Distance bands (voxels along the chosen axis) selecting the movement level.
struct OracleConfig {
  int coarse_threshold = 12;
  int fine_threshold = 4;

  void validate() const;
};

/// Move along the axis of largest |gt - current| (ties x, then y, then z),
/// towards the target, with a level chosen by the distance bands. Terminate
/// when the centres coincide.
Action imitation_action(const Index3& current_centre, const Index3& gt_centre,
                        const OracleConfig& config = {});

/// True iff applying `action` (unclipped) strictly increases the Euclidean
/// distance to the target, or it terminates away from the target.
bool moves_away(Action action, const Index3& current_centre, const Index3& gt_centre);

/// Replaces actions that move away from the target with the imitation action.
Action correct(Action predicted, const Index3& current_centre, const Index3& gt_centre,
               const OracleConfig& config = {});

/// Number of imitation_action/correct invocations in this process. Lets tests
/// prove a code path never consults the oracle.
std::uint64_t oracle_call_count();

}  // namespace roiloc
