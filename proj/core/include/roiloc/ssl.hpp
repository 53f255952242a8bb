#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "roiloc/dataset.hpp"
#include "roiloc/fusion.hpp"
#include "roiloc/inference.hpp"
#include "roiloc/model_bundle.hpp"
#include "roiloc/train.hpp"

namespace roiloc {

struct SslConfig {
  /// An architecture's 2-candidate confidence sum must reach this for a pseudo-label.
  double pseudo_threshold = 1.2;
  int max_rounds = 5;
  int patience = 2;
  /// Required validation gain, in DC percentage points.
  double min_improvement = 0.5;
  double validation_fraction = 0.2;
  /// Labelled share of the dataset, e.g. 0.3 for a 30:70 split.
  double labelled_ratio = 0.4;
  /// Retrain each round from the pre-trained bundle instead of from scratch.
  bool warm_start = true;
  std::uint64_t seed = 1;

  void validate(double fusion_threshold) const;
};

struct PseudoLabel {
  std::string scan_id;
  BoundingBox box;
  int round = 0;
  int arch_id = 0;
  double confidence_sum = 0.0;
};

/// Patience-based early stopping on a score that should grow. Values are fed
/// in round order starting with round 0.
class EarlyStopper {
 public:
  EarlyStopper(int patience, double min_improvement) : patience_(patience), min_improvement_(min_improvement) {}

  /// Returns true when training should stop after this round.
  bool update(int round, double score);
  int best_round() const { return best_round_; }
  double best_score() const { return best_score_; }

 private:
  int patience_;
  double min_improvement_;
  int best_round_ = -1;
  double best_score_ = 0.0;
  int stale_ = 0;
};

struct SslRound {
  int round = 0;
  std::size_t pool_size = 0;
  std::size_t new_labels = 0;
  double val_accuracy = 0.0;  // percent
  double val_iou = 0.0;       // percent
  double val_dice = 0.0;      // percent
};

inline constexpr const char* kSslRoundHeader = "round,pool_size,new_labels,val_accuracy,val_iou,val_dice";
std::string ssl_rounds_csv(const std::vector<SslRound>& rounds);
std::string pseudo_labels_json(const std::vector<PseudoLabel>& ledger);

struct SslResult {
  ModelBundle bundle;
  int best_round = 0;
  std::vector<PseudoLabel> ledger;
  std::vector<SslRound> rounds;
};

/// Replaceable training and localization steps; empty members use
/// run_training and localize.
struct SslHooks {
  std::function<ModelBundle(const std::vector<LabelledScan>&, const ModelBundle* warm_start)> train;
  std::function<std::vector<Candidate>(const UnlabelledScan&, const ModelBundle&)> localize;
};

/// Self-training: pre-train on the labelled scans, then repeatedly promote
/// confidently localized unlabelled scans to pseudo-labelled training data.
/// Returns the bundle of the best validation round.
SslResult self_train(const std::vector<LabelledScan>& labelled, const std::vector<UnlabelledScan>& unlabelled,
                     const TrainConfig& train_config, const SslConfig& ssl_config, const FusionConfig& fusion_config,
                     const InferenceConfig& inference_config, const SslHooks& hooks = {});

struct SslFold {
  std::vector<std::string> train_labelled;
  std::vector<std::string> train_unlabelled;
  std::vector<std::string> test;
};

struct SslSplit {
  std::vector<std::string> labelled;
  std::vector<std::string> unlabelled;
  std::vector<int> labelled_fold;    // parallel to `labelled`
  std::vector<int> unlabelled_fold;  // parallel to `unlabelled`
  int folds = 0;

  SslFold fold(int k) const;
};

/// Random labelled/unlabelled partition at `labelled_ratio`, each part then
/// dealt into `folds` folds separately.
SslSplit make_ssl_splits(const std::vector<std::string>& scan_ids, double labelled_ratio, int folds,
                         std::uint64_t seed);

}  // namespace roiloc
