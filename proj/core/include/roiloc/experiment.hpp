#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "roiloc/config.hpp"
#include "roiloc/dataset.hpp"
#include "roiloc/fusion.hpp"
#include "roiloc/inference.hpp"
#include "roiloc/metrics.hpp"
#include "roiloc/ssl.hpp"
#include "roiloc/train.hpp"

namespace roiloc {

/// Writes `count` phantoms (volumes/, annotations/, index.json) under `root`.
/// Phantom i uses a seed derived from config.seed and i.
DatasetIndex generate_dataset(const std::filesystem::path& root, int count, const PhantomConfig& config);

std::vector<LabelledScan> load_labelled(const DatasetIndex& index, const std::vector<std::string>& ids);
/// Never opens annotation files.
std::vector<UnlabelledScan> load_unlabelled(const DatasetIndex& index, const std::vector<std::string>& ids);

/// Seeded shuffle of the ids dealt round-robin into folds.
std::vector<int> assign_folds(const std::vector<std::string>& ids, int folds, std::uint64_t seed);

struct ScanResult {
  int fold = 0;
  std::string scan_id;
  MetricReport best;         // most confident candidate
  MetricReport fused;
  MetricReport oracle_best;  // highest true IOU; uses the label
  BoundingBox fused_box;
};

struct AggregateRow {
  std::string method;
  int n_scans = 0;
  // Mean and SD across fold means. Accuracy, IOU and dice are percentages.
  double accuracy_mean = 0.0, accuracy_sd = 0.0;
  double iou_mean = 0.0, iou_sd = 0.0;
  double dice_mean = 0.0, dice_sd = 0.0;
  double wall_mean = 0.0, wall_sd = 0.0;
  double centroid_mean = 0.0, centroid_sd = 0.0;
};

inline constexpr const char* kPerScanHeader = "fold,scan_id,method,iou,dice,centroid_mm,wall_mm,detected";
inline constexpr const char* kAggregateHeader =
    "method,n_scans,accuracy_mean,accuracy_sd,iou_mean,iou_sd,dice_mean,dice_sd,wall_mm_mean,wall_mm_sd,"
    "centroid_mm_mean,centroid_mm_sd";
inline constexpr const char* kMethodBest = "best_confidence";
inline constexpr const char* kMethodFused = "fused";
inline constexpr const char* kMethodOracleBest = "oracle_best_label_dependent";

std::vector<AggregateRow> aggregate(const std::vector<ScanResult>& scans);
std::string per_scan_csv(const std::vector<ScanResult>& scans);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);

struct CrossvalResult {
  std::vector<ScanResult> scans;            // fold order, then scan order
  std::vector<CandidateSet> candidates;     // parallel to scans
  std::vector<ScanCandidates> sweep_input;  // parallel to scans
  std::vector<std::vector<CycleLog>> training_logs;  // one per fold
};

struct ExperimentHooks {
  std::function<void(const std::string&)> progress;
};

/// k-fold supervised cross-validation over the labelled entries.
CrossvalResult crossval(const DatasetIndex& index, const ExperimentConfig& config, const ExperimentHooks& hooks = {});

struct SslFoldResult {
  int fold = 0;
  SslResult ssl;
  std::vector<ScanResult> test;
};

/// Loads one fold of an SSL split and runs self-training. Annotations are
/// read only for the fold's labelled training scans and its test scans.
SslFoldResult run_ssl_fold(const DatasetIndex& index, const SslSplit& split, int fold,
                           const ExperimentConfig& config, const SslHooks& ssl_hooks = {});

struct SslExperimentResult {
  SslSplit split;
  std::vector<SslFoldResult> folds;
  std::vector<ScanResult> scans() const;
};

/// SSL cross-validation; `only_folds` restricts which folds run (empty = all).
SslExperimentResult ssl_crossval(const DatasetIndex& index, const ExperimentConfig& config,
                                 const std::vector<int>& only_folds = {}, const ExperimentHooks& hooks = {});

}  // namespace roiloc
