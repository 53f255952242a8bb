#include "roiloc/ssl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "roiloc/error.hpp"
#include "roiloc/metrics.hpp"
#include "roiloc/parallel.hpp"

namespace roiloc {

void SslConfig::validate(double fusion_threshold) const {
  if (!(pseudo_threshold >= fusion_threshold)) throw Error("ssl threshold must be >= the fusion threshold");
  if (max_rounds < 1) throw Error("ssl max rounds must be >= 1");
  if (patience < 1) throw Error("ssl patience must be >= 1");
  if (!(min_improvement >= 0.0)) throw Error("ssl min improvement must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) throw Error("validation fraction must lie in [0, 1)");
  if (!(labelled_ratio > 0.0 && labelled_ratio <= 1.0)) throw Error("labelled ratio must lie in (0, 1]");
}

bool EarlyStopper::update(int round, double score) {
  if (best_round_ < 0 || score - best_score_ > min_improvement_) {
    best_round_ = round;
    best_score_ = score;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

std::string ssl_rounds_csv(const std::vector<SslRound>& rounds) {
  std::ostringstream os;
  os << kSslRoundHeader << '\n';
  os.precision(9);
  for (const auto& r : rounds) {
    os << r.round << ',' << r.pool_size << ',' << r.new_labels << ',' << r.val_accuracy << ',' << r.val_iou << ','
       << r.val_dice << '\n';
  }
  return os.str();
}

std::string pseudo_labels_json(const std::vector<PseudoLabel>& ledger) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : ledger) {
    nlohmann::ordered_json e;
    e["scan_id"] = p.scan_id;
    e["lower"] = p.box.lower;
    e["size"] = p.box.size;
    e["round"] = p.round;
    e["arch"] = p.arch_id;
    e["confidence_sum"] = p.confidence_sum;
    arr.push_back(std::move(e));
  }
  return arr.dump(2) + "\n";
}

namespace {

struct Validation {
  double accuracy = 0.0;
  double iou = 0.0;
  double dice = 0.0;
};

}  // namespace

SslResult self_train(const std::vector<LabelledScan>& labelled, const std::vector<UnlabelledScan>& unlabelled,
                     const TrainConfig& train_config, const SslConfig& ssl_config, const FusionConfig& fusion_config,
                     const InferenceConfig& inference_config, const SslHooks& hooks) {
  ssl_config.validate(fusion_config.include_threshold);
  fusion_config.validate();
  if (labelled.empty()) throw Error("self-training needs a non-empty labelled set");

  auto train = hooks.train ? hooks.train : [&](const std::vector<LabelledScan>& pool, const ModelBundle* warm) {
    return run_training(pool, train_config, warm);
  };
  auto locate = hooks.localize ? hooks.localize : [&](const UnlabelledScan& scan, const ModelBundle& models) {
    return localize(*scan.volume, models, inference_config);
  };

  // Hold out a validation slice; with too few scans validate in-sample.
  std::vector<std::size_t> order(labelled.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(ssl_config.seed, {0x76616c}));
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(std::lround(ssl_config.validation_fraction * labelled.size()));
  if (ssl_config.validation_fraction > 0.0) n_val = std::max<std::size_t>(n_val, 1);
  if (labelled.size() < n_val + 2) n_val = 0;
  std::vector<LabelledScan> pool;
  std::vector<LabelledScan> validation;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? validation : pool).push_back(labelled[order[i]]);
  }
  if (validation.empty()) validation = pool;

  auto validate = [&](const ModelBundle& models) {
    std::vector<MetricReport> reports(validation.size());
    parallel_for(validation.size(), [&](std::size_t i) {
      const auto& s = validation[i];
      const auto cands = locate(UnlabelledScan{s.scan_id, s.volume}, models);
      reports[i] = evaluate(fuse(cands, fusion_config, s.volume->dims()), s.gt_box, s.volume->spacing());
    });
    Validation v;
    for (const auto& r : reports) {
      v.accuracy += r.detected ? 1.0 : 0.0;
      v.iou += r.iou;
      v.dice += r.dice;
    }
    const double n = static_cast<double>(reports.size());
    v.accuracy *= 100.0 / n;
    v.iou *= 100.0 / n;
    v.dice *= 100.0 / n;
    return v;
  };

  SslResult result;
  const ModelBundle pretrained = train(pool, nullptr);
  EarlyStopper stopper(ssl_config.patience, ssl_config.min_improvement);
  {
    const Validation v = validate(pretrained);
    result.rounds.push_back({0, pool.size(), 0, v.accuracy, v.iou, v.dice});
    stopper.update(0, v.dice);
  }
  result.bundle = pretrained;
  result.best_round = 0;

  ModelBundle current = pretrained;
  std::vector<UnlabelledScan> remaining = unlabelled;
  for (int round = 1; round <= ssl_config.max_rounds; ++round) {
    std::vector<std::vector<Candidate>> found(remaining.size());
    parallel_for(remaining.size(), [&](std::size_t i) { found[i] = locate(remaining[i], current); });

    std::vector<UnlabelledScan> still;
    std::size_t added = 0;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      const auto sums = confidence_sums(found[i]);
      const auto best = std::max_element(sums.begin(), sums.end(), [](const ArchConfidence& a, const ArchConfidence& b) {
        return a.sum < b.sum;
      });
      if (best != sums.end() && best->sum >= ssl_config.pseudo_threshold) {
        const auto& scan = remaining[i];
        const BoundingBox box = fuse(found[i], fusion_config, scan.volume->dims());
        result.ledger.push_back({scan.scan_id, box, round, best->arch_id, best->sum});
        pool.push_back({scan.scan_id, scan.volume, box});
        ++added;
      } else {
        still.push_back(remaining[i]);
      }
    }
    remaining = std::move(still);
    if (added == 0) break;

    current = train(pool, ssl_config.warm_start ? &pretrained : nullptr);
    const Validation v = validate(current);
    result.rounds.push_back({round, pool.size(), added, v.accuracy, v.iou, v.dice});
    const bool stop = stopper.update(round, v.dice);
    if (stopper.best_round() == round) {
      result.bundle = current;
      result.best_round = round;
    }
    if (stop) break;
  }
  return result;
}

SslFold SslSplit::fold(int k) const {
  if (k < 0 || k >= folds) throw Error("fold index out of range");
  SslFold out;
  for (std::size_t i = 0; i < labelled.size(); ++i) {
    (labelled_fold[i] == k ? out.test : out.train_labelled).push_back(labelled[i]);
  }
  for (std::size_t i = 0; i < unlabelled.size(); ++i) {
    (unlabelled_fold[i] == k ? out.test : out.train_unlabelled).push_back(unlabelled[i]);
  }
  return out;
}

SslSplit make_ssl_splits(const std::vector<std::string>& scan_ids, double labelled_ratio, int folds,
                         std::uint64_t seed) {
  if (folds < 2) throw Error("fold count must be >= 2");
  if (scan_ids.size() < static_cast<std::size_t>(folds)) throw Error("fewer scans than folds");
  if (!(labelled_ratio > 0.0 && labelled_ratio <= 1.0)) throw Error("labelled ratio must lie in (0, 1]");
  const auto n_labelled = static_cast<std::size_t>(std::lround(labelled_ratio * scan_ids.size()));
  if (n_labelled == 0) throw Error("split ratio leaves the labelled pool empty");
  if (n_labelled < static_cast<std::size_t>(folds)) throw Error("labelled pool smaller than the fold count");

  std::vector<std::string> ids = scan_ids;
  std::mt19937_64 rng(derive_seed(seed, {0x73706c}));
  std::shuffle(ids.begin(), ids.end(), rng);
  SslSplit split;
  split.folds = folds;
  split.labelled.assign(ids.begin(), ids.begin() + n_labelled);
  split.unlabelled.assign(ids.begin() + n_labelled, ids.end());
  for (std::size_t i = 0; i < split.labelled.size(); ++i) split.labelled_fold.push_back(static_cast<int>(i % folds));
  for (std::size_t i = 0; i < split.unlabelled.size(); ++i) {
    split.unlabelled_fold.push_back(static_cast<int>(i % folds));
  }
  return split;
}

}  // namespace roiloc
