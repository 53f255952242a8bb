#pragma once

#include <array>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "roiloc/metrics.hpp"
#include "roiloc/model_bundle.hpp"
#include "roiloc/nav_env.hpp"
#include "roiloc/volume.hpp"

namespace roiloc {

enum class Readout { Terminal, Last10Mean };
std::string_view to_string(Readout readout);
Readout readout_from_string(std::string_view text);

struct Candidate {
  BoundingBox box;
  double confidence = 0.0;  // predicted IOU, clamped to [0, 1]
  int arch_id = 1;
  Readout readout = Readout::Terminal;
};

struct InferenceConfig {
  int step_cap = 25;
  int mean_window = 10;
  PatchConfig patch;

  void validate() const;
};

/// Raw bbox head output: three sizes normalized by the volume dims, then the
/// predicted IOU.
using BBoxPrediction = std::array<double, 4>;

/// Per-architecture predictors. The defaults wrap a ModelBundle; tests swap
/// in stubs.
struct ArchPredictor {
  std::function<Action(const Patch&, const EpisodeState&)> navigate;
  std::function<BBoxPrediction(const Patch&, const EpisodeState&)> bbox;
};

struct RolloutTrace {
  int arch_id = 1;
  int steps = 0;
  TerminalReason reason = TerminalReason::StepCap;
  Index3 final_centre{0, 0, 0};
  std::vector<Index3> centres;  // visited states up to and including the final one
};

/// Greedy rollout per architecture from the volume centre with the
/// pre-selected box size. Returns 2 candidates per architecture, ordered
/// arch 1 terminal, arch 1 last-10-mean, arch 2 terminal, ...
std::vector<Candidate> localize(const Volume& volume, const std::array<ArchPredictor, 3>& predictors,
                                const Index3& box_size, const Index3& input_shape, const InferenceConfig& config,
                                std::vector<RolloutTrace>* traces = nullptr);

std::vector<Candidate> localize(const Volume& volume, const ModelBundle& models, const InferenceConfig& config,
                                std::vector<RolloutTrace>* traces = nullptr);

std::array<ArchPredictor, 3> bundle_predictors(const ModelBundle& models);

MetricReport evaluate(const BoundingBox& predicted, const BoundingBox& truth, const Vec3& spacing);

/// Candidate with the highest confidence (first one on ties).
const Candidate& most_confident(const std::vector<Candidate>& candidates);

/// Candidate dump: {scan_id, dims, spacing, candidates: [{arch, readout, lower, size, confidence}]}.
struct CandidateSet {
  std::string scan_id;
  Index3 dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};
  std::vector<Candidate> candidates;
};

std::string candidates_to_json(const CandidateSet& set);
CandidateSet candidates_from_json(const std::string& text);

}  // namespace roiloc
