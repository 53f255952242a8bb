#include <gtest/gtest.h>

#include "roiloc/error.hpp"
#include "roiloc/metrics.hpp"
#include "roiloc/nn/checkpoint.hpp"
#include "roiloc/phantom.hpp"
#include "roiloc/replay.hpp"
#include "roiloc/train.hpp"

using namespace roiloc;

namespace {

LabelledScan phantom_scan(std::uint64_t seed) {
  PhantomConfig pc;
  pc.seed = seed;
  auto [vol, ann] = generate_phantom(pc, "p" + std::to_string(seed));
  return {ann.scan_id, std::make_shared<const Volume>(std::move(vol)), ann.gt_box};
}

TrainConfig small_config() {
  TrainConfig c;
  c.cycles = 2;
  c.input_shape = {4, 4, 4};
  c.channel_widths = {1, 2, 2};
  c.batch_size = 4;
  c.policy_capacity = 64;
  c.bbox_capacity = 64;
  c.start_points = {{0.5, 0.5, 0.5}, {0.3, 0.3, 0.3}};
  c.seed = 17;
  return c;
}

std::string bundle_bytes(const ModelBundle& b) {
  std::string out;
  for (int a = 0; a < 3; ++a) {
    out += nn::serialize_checkpoint(b.navigation[a]);
    out += nn::serialize_checkpoint(b.bbox[a]);
  }
  return out;
}

}  // namespace

TEST(Epsilon, LinearDecay) {
  EpsilonSchedule e;
  EXPECT_DOUBLE_EQ(e.at(0, 5), 1.0);
  EXPECT_DOUBLE_EQ(e.at(4, 5), 0.3);
  EXPECT_NEAR(e.at(2, 5), 0.65, 1e-12);
  e.decay_cycles = 2;
  EXPECT_DOUBLE_EQ(e.at(3, 10), 0.3);
  EXPECT_DOUBLE_EQ(e.at(0, 1), 1.0);
}

TEST(Replay, CapacityAndOverwrite) {
  ReplayBuffer<int> r(3);
  for (int i = 0; i < 5; ++i) r.push(i);
  EXPECT_EQ(r.size(), 3u);
  EXPECT_EQ(r.pushed(), 5u);
  std::vector<int> held{r[0], r[1], r[2]};
  std::sort(held.begin(), held.end());
  EXPECT_EQ(held, (std::vector<int>{2, 3, 4}));
  std::mt19937_64 rng(1);
  for (auto i : r.sample(100, rng)) EXPECT_LT(i, 3u);
  EXPECT_THROW(ReplayBuffer<int>(0), Error);
  EXPECT_THROW(ReplayBuffer<int>(2).sample(1, rng), Error);
}

TEST(Episode, FullEpsilonFollowsTheOracle) {
  const auto scan = phantom_scan(3);
  const auto cfg = small_config();
  const auto models = initial_bundle(cfg, {16, 16, 16});
  const Index3 start{20, 44, 30};
  const auto ep = collect_episode(*scan.volume, scan.gt_box, models, cfg, 1.0, start, 1, 5);
  ASSERT_TRUE(ep.reached_target);
  ASSERT_FALSE(ep.policy.empty());
  EXPECT_EQ(ep.policy.back().action, kTerminateIndex);
  EXPECT_EQ(ep.steps, static_cast<int>(ep.policy.size()));

  // Replay the recorded actions against the oracle.
  EpisodeState s = start_episode(start, models.box_size, scan.volume->dims());
  for (const auto& p : ep.policy) {
    EXPECT_EQ(p.action, imitation_action(s.centre(), scan.gt_box.centre_voxel()).index());
    s = apply_action(s, Action::from_index(p.action), scan.volume->dims());
  }
}

TEST(Episode, StartAtTargetIsSingleTerminate) {
  const auto scan = phantom_scan(4);
  const auto cfg = small_config();
  const auto models = initial_bundle(cfg, scan.gt_box.size);
  const auto ep = collect_episode(*scan.volume, scan.gt_box, models, cfg, 0.0, scan.gt_box.centre_voxel(), 2, 1);
  ASSERT_EQ(ep.policy.size(), 1u);
  EXPECT_EQ(ep.policy[0].action, kTerminateIndex);
  EXPECT_EQ(ep.steps, 1);
  ASSERT_EQ(ep.bbox.size(), 1u);
  EXPECT_FLOAT_EQ(ep.bbox[0].iou, 1.0f);
}

TEST(Episode, BBoxSamplesClearTheThresholdAndNetworkDrivenEpisodesConverge) {
  const auto cfg = small_config();
  const auto models = initial_bundle(cfg, {18, 18, 18});
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto scan = phantom_scan(seed);
    for (int arch = 1; arch <= 3; ++arch) {
      const auto ep = collect_episode(*scan.volume, scan.gt_box, models, cfg, 0.2, {10, 50, 12}, arch, seed);
      EXPECT_LE(ep.steps, cfg.step_cap);
      for (const auto& b : ep.bbox) {
        EXPECT_GE(b.iou, 1.0 / 3.0);
        for (int a = 0; a < 3; ++a) {
          EXPECT_FLOAT_EQ(b.gt_sizes[a], static_cast<float>(scan.gt_box.size[a]) / scan.volume->dims()[a]);
        }
      }
      for (const auto& p : ep.policy) EXPECT_EQ(p.observation.shape, cfg.input_shape);
    }
  }
}

TEST(Training, RejectsTooFewScans) {
  const auto cfg = small_config();
  EXPECT_THROW(run_training({phantom_scan(1)}, cfg), Error);
  EXPECT_THROW(run_training(std::vector<LabelledScan>{}, cfg), Error);
}

TEST(Training, SeededRunsAreIdentical) {
  const std::vector<LabelledScan> scans{phantom_scan(1), phantom_scan(2), phantom_scan(3)};
  const auto cfg = small_config();
  std::vector<CycleLog> log_a, log_b;
  const auto a = run_training(scans, cfg, nullptr, &log_a);
  const auto b = run_training(scans, cfg, nullptr, &log_b);
  EXPECT_EQ(bundle_bytes(a), bundle_bytes(b));
  ASSERT_EQ(log_a.size(), 2u);
  EXPECT_EQ(training_log_csv(log_a), training_log_csv(log_b));
  EXPECT_EQ(training_log_csv(log_a).substr(0, std::string(kTrainingLogHeader).size()), kTrainingLogHeader);
  EXPECT_LE(log_a.back().policy_replay, cfg.policy_capacity);
  EXPECT_EQ(a.box_size, mean_box_size(scans));
  EXPECT_EQ(a.config_fingerprint, cfg.fingerprint());

  auto other = cfg;
  other.seed = 18;
  EXPECT_NE(bundle_bytes(run_training(scans, other)), bundle_bytes(a));
}

TEST(Training, WarmStartKeepsBoxSize) {
  const std::vector<LabelledScan> scans{phantom_scan(5), phantom_scan(6)};
  auto cfg = small_config();
  cfg.cycles = 1;
  auto warm = initial_bundle(cfg, {21, 22, 23});
  const auto out = run_training(scans, cfg, &warm);
  EXPECT_EQ(out.box_size, (Index3{21, 22, 23}));
}

TEST(TrainConfig, Validation) {
  auto c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 100;
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.start_points = {};
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_NE(small_config().fingerprint(), c.fingerprint());
}
