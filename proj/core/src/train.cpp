#include "roiloc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "roiloc/error.hpp"
#include "roiloc/metrics.hpp"
#include "roiloc/nn/sgd.hpp"
#include "roiloc/parallel.hpp"
#include "roiloc/replay.hpp"

namespace roiloc {

double EpsilonSchedule::at(int cycle, int total_cycles) const {
  const int span = decay_cycles > 0 ? decay_cycles : std::max(0, total_cycles - 1);
  if (span == 0) return start;
  const double t = std::min(1.0, static_cast<double>(cycle) / span);
  return start + (end - start) * t;
}

std::vector<Vec3> TrainConfig::default_start_points() {
  std::vector<Vec3> points{{0.5, 0.5, 0.5}};
  for (double z : {0.25, 0.75})
    for (double y : {0.25, 0.75})
      for (double x : {0.25, 0.75}) points.push_back({x, y, z});
  return points;
}

void TrainConfig::validate() const {
  if (cycles < 1) throw Error("train.cycles must be >= 1");
  if (step_cap < 1) throw Error("train.step_cap must be >= 1");
  for (double e : {epsilon.start, epsilon.end}) {
    if (!(e >= 0.0 && e <= 1.0)) throw Error("epsilon must lie in [0, 1]");
  }
  if (epsilon.decay_cycles < 0) throw Error("epsilon decay cycles must be >= 0");
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) throw Error("iou threshold must lie in [0, 1]");
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (policy_capacity <= static_cast<std::size_t>(batch_size) || bbox_capacity <= static_cast<std::size_t>(batch_size)) {
    throw Error("replay capacities must exceed the batch size");
  }
  if (epochs_per_cycle < 1) throw Error("epochs per cycle must be >= 1");
  if (!(learning_rate >= 0.0) || !(bbox_learning_rate >= 0.0) || !(momentum >= 0.0 && momentum < 1.0)) {
    throw Error("invalid learning rate or momentum");
  }
  if (start_points.empty()) throw Error("at least one start point is required");
  for (const auto& p : start_points) {
    for (double f : p) {
      if (!(f >= 0.0 && f <= 1.0)) throw Error("start points are fractions in [0, 1]");
    }
  }
  for (int a = 0; a < 3; ++a) {
    if (fixed_box_size[a] < 1) throw Error("fixed box size must be positive");
    if (input_shape[a] < 1) throw Error("input shape must be positive");
    if (channel_widths[a] < 1) throw Error("channel widths must be positive");
  }
  oracle.validate();
}

std::string TrainConfig::fingerprint() const {
  nlohmann::ordered_json j;
  j["cycles"] = cycles;
  j["step_cap"] = step_cap;
  j["epsilon"] = {epsilon.start, epsilon.end, epsilon.decay_cycles};
  j["iou_threshold"] = iou_threshold;
  j["capacities"] = {policy_capacity, bbox_capacity};
  j["batch_size"] = batch_size;
  j["epochs_per_cycle"] = epochs_per_cycle;
  j["sgd"] = {learning_rate, bbox_learning_rate, momentum};
  j["start_points"] = start_points;
  j["box_size_policy"] = box_size_policy == BoxSizePolicy::Fixed ? "fixed" : "mean-gt";
  j["fixed_box_size"] = fixed_box_size;
  j["input_shape"] = input_shape;
  j["channel_widths"] = channel_widths;
  j["oracle"] = {oracle.coarse_threshold, oracle.fine_threshold};
  j["patch"] = {patch.window_low, patch.window_high};
  j["seed"] = seed;
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string training_log_csv(const std::vector<CycleLog>& log) {
  std::ostringstream os;
  os << kTrainingLogHeader << '\n';
  os.precision(9);
  for (const auto& row : log) {
    os << row.cycle << ',' << row.nav_loss << ',' << row.bbox_loss << ',' << row.epsilon << '\n';
  }
  return os.str();
}

Index3 mean_box_size(const std::vector<LabelledScan>& scans) {
  if (scans.empty()) throw Error("cannot average box sizes over zero scans");
  Index3 out{};
  for (int a = 0; a < 3; ++a) {
    double sum = 0.0;
    for (const auto& s : scans) sum += s.gt_box.size[a];
    out[a] = std::max(1, static_cast<int>(std::lround(sum / scans.size())));
  }
  return out;
}

ModelBundle initial_bundle(const TrainConfig& config, const Index3& box_size) {
  ModelBundle bundle;
  bundle.box_size = box_size;
  bundle.input_shape = config.input_shape;
  bundle.config_fingerprint = config.fingerprint();
  for (int a = 0; a < kArchitectureCount; ++a) {
    const int arch = a + 1;
    bundle.navigation[a] = nn::Network<float>::build(
        nn::make_network_spec(arch, nn::Head::Navigation, config.input_shape, config.channel_widths),
        derive_seed(config.seed, {0x6e6176, static_cast<std::uint64_t>(arch)}));
    bundle.bbox[a] = nn::Network<float>::build(
        nn::make_network_spec(arch, nn::Head::BBox, config.input_shape, config.channel_widths),
        derive_seed(config.seed, {0x62626f78, static_cast<std::uint64_t>(arch)}));
  }
  return bundle;
}

namespace {

Index3 start_centre_for(const Vec3& fraction, const Index3& dims) {
  Index3 c{};
  for (int a = 0; a < 3; ++a) {
    c[a] = std::clamp(static_cast<int>(std::floor(fraction[a] * dims[a])), 0, dims[a] - 1);
  }
  return c;
}

int argmax(std::span<const float> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

bool finite(double v) { return std::isfinite(v); }

// One network's share of a cycle's training phase.
template <typename Sample, typename FillTarget>
double train_network(nn::Network<float>& net, nn::SgdMomentum<float>& opt, const ReplayBuffer<Sample>& replay,
                     int batches, int batch_size, int outputs, std::uint64_t seed, FillTarget fill,
                     const std::string& name) {
  if (replay.empty() || batches == 0) return 0.0;
  std::mt19937_64 rng(seed);
  double total = 0.0;
  std::vector<const Patch*> patches(batch_size);
  for (int b = 0; b < batches; ++b) {
    const auto idx = replay.sample(batch_size, rng);
    nn::Tensor<float> target({batch_size, outputs});
    for (int i = 0; i < batch_size; ++i) {
      patches[i] = &replay[idx[i]].observation;
      fill(replay[idx[i]], target.sample(i));
    }
    const auto input = nn::stack_patches<float>(std::span<const Patch* const>(patches));
    nn::ForwardCache<float> cache;
    const auto out = net.forward_train(input, cache);
    nn::Tensor<float> grad;
    const double loss = nn::mse_loss(out, target, &grad);
    if (!finite(loss)) {
      throw Error("non-finite loss while training " + name + " (batch " + std::to_string(b) + ")");
    }
    const auto grads = net.backward(cache, grad);
    try {
      opt.step(net.params(), grads);
    } catch (const Error& e) {
      throw Error("training " + name + " aborted: " + e.what());
    }
    total += loss;
  }
  return total / batches;
}

}  // namespace

EpisodeSamples collect_episode(const Volume& volume, const BoundingBox& gt_box, const ModelBundle& models,
                               const TrainConfig& config, double epsilon, const Index3& start_centre,
                               int driving_arch, std::uint64_t rng_seed) {
  if (!gt_box.valid() || !gt_box.inside(volume.dims())) throw Error("episode needs a valid ground-truth box");
  if (driving_arch < 1 || driving_arch > kArchitectureCount) throw Error("driving architecture must be 1..3");
  const Index3& dims = volume.dims();
  const Index3 target = gt_box.centre_voxel();
  const auto& nav = models.navigation[driving_arch - 1];
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::array<float, 3> gt_sizes{};
  for (int a = 0; a < 3; ++a) gt_sizes[a] = static_cast<float>(gt_box.size[a]) / dims[a];

  EpisodeSamples out;
  EpisodeState state = start_episode(start_centre, models.box_size, dims);
  while (state.step < config.step_cap) {
    Patch obs = observe(state, volume, config.input_shape, config.patch);
    const double overlap = iou(state.current_box, gt_box);
    if (overlap >= config.iou_threshold) {
      out.bbox.push_back({obs, gt_sizes, static_cast<float>(overlap)});
    }
    const Index3 centre = state.centre();
    if (centre == target) {
      out.policy.push_back({std::move(obs), kTerminateIndex});
      out.reached_target = true;
      ++out.steps;
      break;
    }
    // Draw the coin every step so the stream does not depend on the network.
    const bool imitate = coin(rng) < epsilon;
    Action action = Action::terminate();
    if (imitate) {
      action = imitation_action(centre, target, config.oracle);
    } else {
      const auto input = nn::stack_patches<float>({&obs});
      const auto q = nav.infer(input);
      action = Action::from_index(argmax(q.sample(0)));
    }
    action = correct(action, centre, target, config.oracle);
    if (moves_away(action, centre, target)) throw Error("corrected action still moves away from the target");
    out.policy.push_back({std::move(obs), action.index()});
    state = apply_action(state, action, dims);
    ++out.steps;
  }
  return out;
}

ModelBundle run_training(const std::vector<LabelledScan>& scans, const TrainConfig& config,
                         const ModelBundle* warm_start, std::vector<CycleLog>* log, const TrainingHooks& hooks) {
  config.validate();
  if (scans.empty()) throw Error("training needs a non-empty labelled set");
  if (scans.size() < 2) throw Error("training needs at least 2 labelled scans");
  for (const auto& s : scans) {
    if (!s.volume) throw Error("labelled scan " + s.scan_id + " has no volume");
    if (!s.gt_box.valid() || !s.gt_box.inside(s.volume->dims())) {
      throw Error("labelled scan " + s.scan_id + " has an invalid box");
    }
  }

  ModelBundle bundle;
  if (warm_start) {
    warm_start->validate();
    if (warm_start->input_shape != config.input_shape) throw Error("warm-start bundle input shape differs from config");
    bundle = *warm_start;
    bundle.config_fingerprint = config.fingerprint();
  } else {
    const Index3 size =
        config.box_size_policy == BoxSizePolicy::Fixed ? config.fixed_box_size : mean_box_size(scans);
    bundle = initial_bundle(config, size);
  }

  ReplayBuffer<PolicySample> policy_replay(config.policy_capacity);
  ReplayBuffer<BBoxSample> bbox_replay(config.bbox_capacity);
  std::vector<nn::SgdMomentum<float>> optimizers;
  for (int n = 0; n < 2 * kArchitectureCount; ++n) {
    optimizers.emplace_back(n < kArchitectureCount ? config.learning_rate : config.bbox_learning_rate, config.momentum);
  }

  struct Task {
    std::size_t start;
    std::size_t scan;
  };

  for (int cycle = 0; cycle < config.cycles; ++cycle) {
    const double eps = config.epsilon.at(cycle, config.cycles);

    std::vector<Task> tasks;
    for (std::size_t s = 0; s < config.start_points.size(); ++s) {
      std::vector<std::size_t> order(scans.size());
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 shuffle_rng(derive_seed(config.seed, {1, static_cast<std::uint64_t>(cycle), s}));
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (std::size_t i : order) tasks.push_back({s, i});
    }

    std::vector<EpisodeSamples> results(tasks.size());
    parallel_for(tasks.size(), [&](std::size_t t) {
      const auto& task = tasks[t];
      const auto& scan = scans[task.scan];
      const Index3 start = start_centre_for(config.start_points[task.start], scan.volume->dims());
      const int driving = static_cast<int>(t % kArchitectureCount) + 1;
      results[t] = collect_episode(*scan.volume, scan.gt_box, bundle, config, eps, start, driving,
                                   derive_seed(config.seed, {2, static_cast<std::uint64_t>(cycle), task.start, task.scan}));
    });
    for (auto& r : results) {
      for (auto& p : r.policy) policy_replay.push(std::move(p));
      for (auto& b : r.bbox) {
        if (b.iou < config.iou_threshold) throw Error("bbox sample below the capture threshold");
        bbox_replay.push(std::move(b));
      }
    }
    results.clear();

    auto batches_for = [&](std::size_t size) {
      return config.epochs_per_cycle *
             static_cast<int>((size + config.batch_size - 1) / static_cast<std::size_t>(config.batch_size));
    };
    const int nav_batches = batches_for(policy_replay.size());
    const int bbox_batches = batches_for(bbox_replay.size());
    std::array<double, 2 * kArchitectureCount> losses{};
    parallel_for(2 * kArchitectureCount, [&](std::size_t n) {
      const int a = static_cast<int>(n % kArchitectureCount);
      const std::uint64_t seed = derive_seed(config.seed, {3, static_cast<std::uint64_t>(cycle), n});
      if (n < kArchitectureCount) {
        losses[n] = train_network(
            bundle.navigation[a], optimizers[n], policy_replay, nav_batches, config.batch_size, nn::kNavigationOutputs,
            seed,
            [](const PolicySample& s, std::span<float> t) {
              std::fill(t.begin(), t.end(), 0.0f);
              t[s.action] = 1.0f;
            },
            "navigation network " + std::to_string(a + 1));
      } else {
        losses[n] = train_network(
            bundle.bbox[a], optimizers[n], bbox_replay, bbox_batches, config.batch_size, nn::kBBoxOutputs, seed,
            [](const BBoxSample& s, std::span<float> t) {
              t[0] = s.gt_sizes[0];
              t[1] = s.gt_sizes[1];
              t[2] = s.gt_sizes[2];
              t[3] = s.iou;
            },
            "bbox network " + std::to_string(a + 1));
      }
    });

    CycleLog row;
    row.cycle = cycle + 1;
    row.epsilon = eps;
    row.nav_loss = (losses[0] + losses[1] + losses[2]) / 3.0;
    row.bbox_loss = (losses[3] + losses[4] + losses[5]) / 3.0;
    row.policy_replay = policy_replay.size();
    row.bbox_replay = bbox_replay.size();
    if (log) log->push_back(row);
    if (hooks.on_cycle) hooks.on_cycle(row);
  }
  return bundle;
}

ModelBundle run_training(const DatasetIndex& dataset, const TrainConfig& config, std::vector<CycleLog>* log) {
  std::vector<LabelledScan> scans;
  for (const auto& e : dataset.entries()) {
    if (!e.labelled) continue;
    const Annotation ann = dataset.load_annotation(e);
    scans.push_back({e.scan_id, std::make_shared<const Volume>(dataset.load_volume(e)), ann.gt_box});
  }
  if (scans.empty()) throw Error("dataset has no labelled scans");
  return run_training(scans, config, nullptr, log);
}

}  // namespace roiloc
