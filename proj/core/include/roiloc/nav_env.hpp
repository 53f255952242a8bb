#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "roiloc/box.hpp"
#include "roiloc/volume.hpp"

namespace roiloc {

enum class Axis : int { X = 0, Y = 1, Z = 2 };
enum class Sign : int { Plus = 0, Minus = 1 };
enum class Level : int { Coarse = 0, Fine = 1, VeryFine = 2 };

inline constexpr int kActionCount = 19;
inline constexpr int kTerminateIndex = 18;
/// Voxel displacement per movement level: coarse, fine, very fine.
inline constexpr std::array<int, 3> kLevelStep{9, 3, 1};

/// One of 18 moves (axis x sign x level) or Terminate.
/// Index encoding: axis * 6 + sign * 3 + level; Terminate = 18.
class Action {
 public:
  static Action move(Axis axis, Sign sign, Level level) {
    return Action(static_cast<int>(axis) * 6 + static_cast<int>(sign) * 3 + static_cast<int>(level));
  }
  static Action terminate() { return Action(kTerminateIndex); }
  static Action from_index(int index);

  int index() const { return index_; }
  bool is_terminate() const { return index_ == kTerminateIndex; }
  Axis axis() const { return static_cast<Axis>(index_ / 6); }
  Sign sign() const { return static_cast<Sign>((index_ % 6) / 3); }
  Level level() const { return static_cast<Level>(index_ % 3); }

  /// Centre displacement of a move, ignoring volume bounds. Zero for Terminate.
  Index3 displacement() const;

  friend bool operator==(Action, Action) = default;

 private:
  explicit Action(int index) : index_(index) {}
  int index_;
};

enum class TerminalReason { TerminateAction, StepCap, Loop };
std::string_view to_string(TerminalReason reason);

struct EpisodeState {
  BoundingBox current_box;
  int step = 0;
  std::vector<Index3> visited_centres;
  bool terminated = false;
  std::optional<TerminalReason> terminal_reason;

  Index3 centre() const { return current_box.centre_voxel(); }
};

/// Fresh episode with a box of `size` centred at `centre`, shifted inside the volume.
EpisodeState start_episode(const Index3& centre, const Index3& size, const Index3& volume_dims);

/// Moves keep the box size and shift it back inside the volume when a step
/// would leave it. Terminate marks the state terminated without moving.
EpisodeState apply_action(const EpisodeState& state, Action action, const Index3& volume_dims);

/// Box with the same centre and half the size (floor, minimum 1).
BoundingBox shrink_half(const BoundingBox& box);

/// Patch of the half-size box around the current centre.
Patch observe(const EpisodeState& state, const Volume& volume, const Index3& input_shape,
              const PatchConfig& patch_config = {});

/// True iff the latest visited centre already occurs earlier in the path.
bool detect_loop(const EpisodeState& state);

}  // namespace roiloc
