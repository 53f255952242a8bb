#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "roiloc/dataset.hpp"
#include "roiloc/imitation.hpp"
#include "roiloc/model_bundle.hpp"
#include "roiloc/nav_env.hpp"
#include "roiloc/volume.hpp"

namespace roiloc {

struct PolicySample {
  Patch observation;
  int action = 0;
};

struct BBoxSample {
  Patch observation;
  std::array<float, 3> gt_sizes{};  // ground-truth size / volume dims
  float iou = 0.0f;                 // navigation box vs ground truth at capture
};

/// Linear decay from `start` at cycle 0 to `end` at cycle `decay_cycles`
/// (0 means the last cycle), constant afterwards.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.3;
  int decay_cycles = 0;

  double at(int cycle, int total_cycles) const;
};

enum class BoxSizePolicy { MeanGroundTruth, Fixed };

struct TrainConfig {
  int cycles = 10;
  int step_cap = 25;
  EpsilonSchedule epsilon;
  double iou_threshold = 1.0 / 3.0;
  std::size_t policy_capacity = 20000;
  std::size_t bbox_capacity = 20000;
  int batch_size = 32;
  int epochs_per_cycle = 1;
  double learning_rate = 0.005;  // navigation networks
  double bbox_learning_rate = 0.0005;
  double momentum = 0.9;
  /// Start centres as fractions of the volume dims.
  std::vector<Vec3> start_points = default_start_points();
  BoxSizePolicy box_size_policy = BoxSizePolicy::MeanGroundTruth;
  Index3 fixed_box_size{24, 24, 24};
  Index3 input_shape{12, 12, 12};
  std::array<int, 3> channel_widths{16, 32, 32};
  OracleConfig oracle;
  PatchConfig patch;
  std::uint64_t seed = 1;

  /// Volume centre plus the 8 corners at 25% / 75% of each dim.
  static std::vector<Vec3> default_start_points();

  void validate() const;
  /// Stable hex digest over every field.
  std::string fingerprint() const;
};

struct EpisodeSamples {
  std::vector<PolicySample> policy;
  std::vector<BBoxSample> bbox;
  int steps = 0;
  bool reached_target = false;
};

/// One imitation-guided episode. With probability epsilon the oracle picks
/// the action, otherwise the driving architecture's navigation argmax; the
/// result then goes through correct(). `rng_seed` fixes the epsilon draws.
EpisodeSamples collect_episode(const Volume& volume, const BoundingBox& gt_box, const ModelBundle& models,
                               const TrainConfig& config, double epsilon, const Index3& start_centre,
                               int driving_arch, std::uint64_t rng_seed);

struct CycleLog {
  int cycle = 0;
  double nav_loss = 0.0;   // mean minibatch loss over the three navigation networks
  double bbox_loss = 0.0;  // same for the bbox networks
  double epsilon = 0.0;
  std::size_t policy_replay = 0;
  std::size_t bbox_replay = 0;
};

inline constexpr const char* kTrainingLogHeader = "cycle,nav_loss,bbox_loss,epsilon";
std::string training_log_csv(const std::vector<CycleLog>& log);

/// Mean ground-truth size over the scans, rounded to voxels.
Index3 mean_box_size(const std::vector<LabelledScan>& scans);

/// Fresh bundle with seeded initial weights.
ModelBundle initial_bundle(const TrainConfig& config, const Index3& box_size);

struct TrainingHooks {
  /// Called after each cycle's training phase.
  std::function<void(const CycleLog&)> on_cycle;
};

/// Imitation-guided training of all six networks. A warm-start bundle
/// replaces the fresh initialization (and its box size is kept).
ModelBundle run_training(const std::vector<LabelledScan>& scans, const TrainConfig& config,
                         const ModelBundle* warm_start = nullptr, std::vector<CycleLog>* log = nullptr,
                         const TrainingHooks& hooks = {});

/// Loads every labelled entry of the index and trains on it.
ModelBundle run_training(const DatasetIndex& dataset, const TrainConfig& config,
                         std::vector<CycleLog>* log = nullptr);

}  // namespace roiloc
