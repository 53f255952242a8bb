#include "roiloc/nav_env.hpp"

#include <algorithm>

#include "roiloc/error.hpp"

namespace roiloc {

Action Action::from_index(int index) {
  if (index < 0 || index >= kActionCount) {
    throw Error("action index out of range: " + std::to_string(index));
  }
  return Action(index);
}

Index3 Action::displacement() const {
  Index3 d{0, 0, 0};
  if (is_terminate()) return d;
  const int step = kLevelStep[static_cast<int>(level())];
  d[static_cast<int>(axis())] = sign() == Sign::Plus ? step : -step;
  return d;
}

std::string_view to_string(TerminalReason reason) {
  switch (reason) {
    case TerminalReason::TerminateAction:
      return "terminate-action";
    case TerminalReason::StepCap:
      return "step-cap";
    case TerminalReason::Loop:
      return "loop";
  }
  return "unknown";
}

EpisodeState start_episode(const Index3& centre, const Index3& size, const Index3& volume_dims) {
  EpisodeState state;
  state.current_box = shift_inside(box_from_centre(centre, size), volume_dims);
  state.visited_centres.push_back(state.centre());
  return state;
}

EpisodeState apply_action(const EpisodeState& state, Action action, const Index3& volume_dims) {
  if (state.terminated) throw Error("cannot act on a terminated episode");
  EpisodeState next = state;
  ++next.step;
  if (action.is_terminate()) {
    next.terminated = true;
    next.terminal_reason = TerminalReason::TerminateAction;
    return next;
  }
  next.current_box = shift_inside(state.current_box.translated(action.displacement()), volume_dims);
  next.visited_centres.push_back(next.centre());
  return next;
}

BoundingBox shrink_half(const BoundingBox& box) {
  Index3 size{};
  for (int a = 0; a < 3; ++a) size[a] = std::max(1, box.size[a] / 2);
  return box_from_centre(box.centre_voxel(), size);
}

Patch observe(const EpisodeState& state, const Volume& volume, const Index3& input_shape,
              const PatchConfig& patch_config) {
  return extract_patch(volume, shrink_half(state.current_box), input_shape, patch_config);
}

bool detect_loop(const EpisodeState& state) {
  const auto& path = state.visited_centres;
  if (path.size() < 2) return false;
  return std::find(path.begin(), path.end() - 1, path.back()) != path.end() - 1;
}

}  // namespace roiloc
