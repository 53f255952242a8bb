#include <gtest/gtest.h>

#include <random>
#include <set>

#include "roiloc/error.hpp"
#include "roiloc/nav_env.hpp"

using namespace roiloc;

TEST(Action, IndexEncodingIsABijection) {
  std::set<int> seen;
  for (int i = 0; i < kActionCount; ++i) {
    const Action a = Action::from_index(i);
    EXPECT_EQ(a.index(), i);
    if (!a.is_terminate()) {
      EXPECT_EQ(Action::move(a.axis(), a.sign(), a.level()), a);
      EXPECT_EQ(static_cast<int>(a.axis()) * 6 + static_cast<int>(a.sign()) * 3 + static_cast<int>(a.level()), i);
    }
    seen.insert(i);
  }
  EXPECT_EQ(seen.size(), 19u);
  EXPECT_TRUE(Action::from_index(18).is_terminate());
  EXPECT_EQ(Action::move(Axis::Y, Sign::Minus, Level::Fine).index(), 10);
  EXPECT_THROW(Action::from_index(19), Error);
  EXPECT_THROW(Action::from_index(-1), Error);
}

TEST(NavEnv, CoarseStepMovesNineVoxels) {
  const Index3 dims{100, 100, 100};
  auto s = start_episode({50, 50, 50}, {10, 10, 10}, dims);
  s = apply_action(s, Action::move(Axis::X, Sign::Plus, Level::Coarse), dims);
  EXPECT_EQ(s.centre(), (Index3{59, 50, 50}));
  EXPECT_EQ(s.step, 1);
  EXPECT_EQ(s.visited_centres.size(), 2u);
}

TEST(NavEnv, MoveNearWallIsClipped) {
  const Index3 dims{64, 64, 64};
  // Box [52, 62) on x; its centre sits 2 voxels short of the +x wall position reachable.
  auto s = start_episode({57, 32, 32}, {10, 10, 10}, dims);
  ASSERT_EQ(s.current_box.upper()[0], 62);
  s = apply_action(s, Action::move(Axis::X, Sign::Plus, Level::Fine), dims);
  EXPECT_EQ(s.current_box.upper()[0], 64);
  EXPECT_EQ(s.centre()[0], 59);
  EXPECT_EQ(s.current_box.size, (Index3{10, 10, 10}));
}

TEST(NavEnv, TerminateKeepsBox) {
  const Index3 dims{32, 32, 32};
  const auto s = start_episode({16, 16, 16}, {8, 8, 8}, dims);
  const auto t = apply_action(s, Action::terminate(), dims);
  EXPECT_TRUE(t.terminated);
  EXPECT_EQ(t.terminal_reason, TerminalReason::TerminateAction);
  EXPECT_EQ(t.current_box, s.current_box);
  EXPECT_THROW(apply_action(t, Action::terminate(), dims), Error);
}

TEST(NavEnv, ShrinkHalf) {
  const BoundingBox b{{4, 4, 4}, {32, 32, 32}};
  const auto h = shrink_half(b);
  EXPECT_EQ(h.size, (Index3{16, 16, 16}));
  EXPECT_EQ(h.centre_voxel(), b.centre_voxel());
  EXPECT_EQ(shrink_half({{0, 0, 0}, {3, 3, 3}}).size, (Index3{1, 1, 1}));
}

TEST(NavEnv, ObserveConstantVolume) {
  const Volume v({16, 16, 16}, {1, 1, 1}, IntensityUnits::HU, std::vector<std::int16_t>(4096, 50));
  const auto s = start_episode({8, 8, 8}, {8, 8, 8}, v.dims());
  const Patch p = observe(s, v, {4, 4, 4});
  for (float x : p.values) EXPECT_FLOAT_EQ(x, p.values.front());
}

TEST(NavEnv, LoopDetection) {
  EpisodeState s;
  s.visited_centres = {{5, 5, 5}, {6, 5, 5}, {5, 5, 5}};
  EXPECT_TRUE(detect_loop(s));
  s.visited_centres = {{1, 1, 1}, {2, 1, 1}, {3, 1, 1}, {4, 1, 1}};
  EXPECT_FALSE(detect_loop(s));

  const Index3 dims{32, 32, 32};
  auto e = start_episode({16, 16, 16}, {4, 4, 4}, dims);
  e = apply_action(e, Action::move(Axis::Y, Sign::Plus, Level::VeryFine), dims);
  EXPECT_FALSE(detect_loop(e));
  e = apply_action(e, Action::move(Axis::Y, Sign::Minus, Level::VeryFine), dims);
  EXPECT_TRUE(detect_loop(e));
  EXPECT_EQ(e.step, 2);
  EXPECT_EQ(e.visited_centres.size(), 3u);
}

TEST(NavEnv, RandomActionsNeverLeaveTheVolume) {
  std::mt19937 rng(1);
  const Index3 dims{20, 31, 17};
  auto s = start_episode({10, 15, 8}, {7, 12, 9}, dims);
  for (int i = 0; i < 10000; ++i) {
    const Action a = Action::from_index(std::uniform_int_distribution<int>(0, 17)(rng));
    const Index3 before = s.centre();
    s = apply_action(s, a, dims);
    ASSERT_TRUE(s.current_box.inside(dims));
    ASSERT_EQ(s.current_box.size, (Index3{7, 12, 9}));
    int changed = 0;
    for (int ax = 0; ax < 3; ++ax) {
      const int d = std::abs(s.centre()[ax] - before[ax]);
      if (d > 0) {
        ++changed;
        ASSERT_EQ(ax, static_cast<int>(a.axis()));
        ASSERT_LE(d, kLevelStep[static_cast<int>(a.level())]);
      }
    }
    ASSERT_LE(changed, 1);
  }
}
