#include "roiloc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "roiloc/error.hpp"
#include "roiloc/parallel.hpp"
#include "roiloc/phantom.hpp"

namespace roiloc {

DatasetIndex generate_dataset(const std::filesystem::path& root, int count, const PhantomConfig& config) {
  if (count < 1) throw Error("scan count must be >= 1");
  config.validate();
  std::filesystem::create_directories(root / "volumes");
  std::filesystem::create_directories(root / "annotations");
  std::vector<DatasetEntry> entries(count);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof id, "phantom_%03zu", i);
    PhantomConfig cfg = config;
    cfg.seed = derive_seed(config.seed, {0x7068, i});
    const auto [volume, annotation] = generate_phantom(cfg, id);
    const std::filesystem::path vol = std::filesystem::path("volumes") / (std::string(id) + ".raw");
    const std::filesystem::path ann = std::filesystem::path("annotations") / (std::string(id) + ".json");
    save_volume(volume, root / vol);
    save_annotation(annotation, root / ann);
    entries[i] = {id, vol, ann, true};
  });
  DatasetIndex index(root, std::move(entries));
  index.save();
  return index;
}

std::vector<LabelledScan> load_labelled(const DatasetIndex& index, const std::vector<std::string>& ids) {
  std::vector<LabelledScan> out(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    const auto& e = index.entry(ids[i]);
    out[i] = {e.scan_id, std::make_shared<const Volume>(index.load_volume(e)), index.load_annotation(e).gt_box};
  });
  return out;
}

std::vector<UnlabelledScan> load_unlabelled(const DatasetIndex& index, const std::vector<std::string>& ids) {
  std::vector<UnlabelledScan> out(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    const auto& e = index.entry(ids[i]);
    out[i] = {e.scan_id, std::make_shared<const Volume>(index.load_volume(e))};
  });
  return out;
}

std::vector<int> assign_folds(const std::vector<std::string>& ids, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error("fold count must be >= 2");
  if (ids.size() < static_cast<std::size_t>(folds)) throw Error("fewer scans than folds");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, {0x666f6c64}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) fold[order[i]] = static_cast<int>(i % folds);
  return fold;
}

namespace {

ScanResult score_scan(int fold, const std::string& scan_id, const std::vector<Candidate>& candidates,
                      const BoundingBox& truth, const Volume& volume, const FusionConfig& fusion) {
  ScanResult r;
  r.fold = fold;
  r.scan_id = scan_id;
  r.best = evaluate(most_confident(candidates).box, truth, volume.spacing());
  r.fused_box = fuse(candidates, fusion, volume.dims());
  r.fused = evaluate(r.fused_box, truth, volume.spacing());
  const auto oracle = std::max_element(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    return iou(a.box, truth) < iou(b.box, truth);
  });
  r.oracle_best = evaluate(oracle->box, truth, volume.spacing());
  return r;
}

struct Stat {
  double mean = 0.0;
  double sd = 0.0;
};

Stat mean_sd(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / (v.size() - 1));
  }
  return s;
}

void progress(const ExperimentHooks& hooks, const std::string& msg) {
  if (hooks.progress) hooks.progress(msg);
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<ScanResult>& scans) {
  std::vector<AggregateRow> rows;
  const std::pair<const char*, MetricReport ScanResult::*> methods[] = {
      {kMethodBest, &ScanResult::best}, {kMethodFused, &ScanResult::fused}, {kMethodOracleBest, &ScanResult::oracle_best}};
  for (const auto& [name, member] : methods) {
    std::map<int, std::vector<const MetricReport*>> by_fold;
    for (const auto& s : scans) by_fold[s.fold].push_back(&(s.*member));
    std::vector<double> acc, iou_v, dice_v, wall, cen;
    for (const auto& [fold, reports] : by_fold) {
      double a = 0, i = 0, d = 0, w = 0, c = 0;
      for (const auto* r : reports) {
        a += r->detected ? 1.0 : 0.0;
        i += r->iou;
        d += r->dice;
        w += r->wall_dist_mm;
        c += r->centroid_dist_mm;
      }
      const double n = static_cast<double>(reports.size());
      acc.push_back(100.0 * a / n);
      iou_v.push_back(100.0 * i / n);
      dice_v.push_back(100.0 * d / n);
      wall.push_back(w / n);
      cen.push_back(c / n);
    }
    AggregateRow row;
    row.method = name;
    row.n_scans = static_cast<int>(scans.size());
    Stat s = mean_sd(acc);
    row.accuracy_mean = s.mean, row.accuracy_sd = s.sd;
    s = mean_sd(iou_v);
    row.iou_mean = s.mean, row.iou_sd = s.sd;
    s = mean_sd(dice_v);
    row.dice_mean = s.mean, row.dice_sd = s.sd;
    s = mean_sd(wall);
    row.wall_mean = s.mean, row.wall_sd = s.sd;
    s = mean_sd(cen);
    row.centroid_mean = s.mean, row.centroid_sd = s.sd;
    rows.push_back(row);
  }
  return rows;
}

std::string per_scan_csv(const std::vector<ScanResult>& scans) {
  std::ostringstream os;
  os << kPerScanHeader << '\n';
  os.precision(9);
  for (const auto& s : scans) {
    const std::pair<const char*, const MetricReport*> rows[] = {
        {kMethodBest, &s.best}, {kMethodFused, &s.fused}, {kMethodOracleBest, &s.oracle_best}};
    for (const auto& [name, r] : rows) {
      os << s.fold << ',' << s.scan_id << ',' << name << ',' << r->iou << ',' << r->dice << ',' << r->centroid_dist_mm
         << ',' << r->wall_dist_mm << ',' << (r->detected ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << kAggregateHeader << '\n';
  os.precision(9);
  for (const auto& r : rows) {
    os << r.method << ',' << r.n_scans << ',' << r.accuracy_mean << ',' << r.accuracy_sd << ',' << r.iou_mean << ','
       << r.iou_sd << ',' << r.dice_mean << ',' << r.dice_sd << ',' << r.wall_mean << ',' << r.wall_sd << ','
       << r.centroid_mean << ',' << r.centroid_sd << '\n';
  }
  return os.str();
}

CrossvalResult crossval(const DatasetIndex& index, const ExperimentConfig& config, const ExperimentHooks& hooks) {
  config.validate();
  std::vector<std::string> ids;
  for (const auto& e : index.entries()) {
    if (e.labelled) ids.push_back(e.scan_id);
  }
  if (ids.size() < static_cast<std::size_t>(config.folds)) throw Error("fewer labelled scans than folds");
  const auto fold_of = assign_folds(ids, config.folds, config.train.seed);
  const auto scans = load_labelled(index, ids);

  CrossvalResult result;
  for (int k = 0; k < config.folds; ++k) {
    std::vector<LabelledScan> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (fold_of[i] == k) {
        test.push_back(i);
      } else {
        train.push_back(scans[i]);
      }
    }
    progress(hooks, "fold " + std::to_string(k + 1) + "/" + std::to_string(config.folds) + ": training on " +
                        std::to_string(train.size()) + " scans");
    std::vector<CycleLog> log;
    TrainingHooks th;
    th.on_cycle = [&](const CycleLog& row) {
      progress(hooks, "  cycle " + std::to_string(row.cycle) + " nav_loss " + std::to_string(row.nav_loss) +
                          " bbox_loss " + std::to_string(row.bbox_loss));
    };
    const ModelBundle bundle = run_training(train, config.train, nullptr, &log, th);
    result.training_logs.push_back(std::move(log));

    std::vector<std::vector<Candidate>> found(test.size());
    parallel_for(test.size(), [&](std::size_t t) {
      found[t] = localize(*scans[test[t]].volume, bundle, config.inference);
    });
    for (std::size_t t = 0; t < test.size(); ++t) {
      const auto& s = scans[test[t]];
      result.scans.push_back(score_scan(k, s.scan_id, found[t], s.gt_box, *s.volume, config.fusion));
      result.candidates.push_back({s.scan_id, s.volume->dims(), s.volume->spacing(), found[t]});
      result.sweep_input.push_back({s.scan_id, s.volume->dims(), found[t], s.gt_box});
    }
  }
  return result;
}

SslFoldResult run_ssl_fold(const DatasetIndex& index, const SslSplit& split, int fold,
                           const ExperimentConfig& config, const SslHooks& ssl_hooks) {
  const SslFold f = split.fold(fold);
  const auto labelled = load_labelled(index, f.train_labelled);
  const auto unlabelled = load_unlabelled(index, f.train_unlabelled);

  SslFoldResult out;
  out.fold = fold;
  out.ssl = self_train(labelled, unlabelled, config.train, config.ssl, config.fusion, config.inference, ssl_hooks);

  const auto test = load_labelled(index, f.test);
  std::vector<std::vector<Candidate>> found(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    found[i] = ssl_hooks.localize ? ssl_hooks.localize(UnlabelledScan{test[i].scan_id, test[i].volume}, out.ssl.bundle)
                                  : localize(*test[i].volume, out.ssl.bundle, config.inference);
  });
  for (std::size_t i = 0; i < test.size(); ++i) {
    out.test.push_back(score_scan(fold, test[i].scan_id, found[i], test[i].gt_box, *test[i].volume, config.fusion));
  }
  return out;
}

std::vector<ScanResult> SslExperimentResult::scans() const {
  std::vector<ScanResult> out;
  for (const auto& f : folds) out.insert(out.end(), f.test.begin(), f.test.end());
  return out;
}

SslExperimentResult ssl_crossval(const DatasetIndex& index, const ExperimentConfig& config,
                                 const std::vector<int>& only_folds, const ExperimentHooks& hooks) {
  config.validate();
  std::vector<std::string> ids;
  for (const auto& e : index.entries()) ids.push_back(e.scan_id);
  SslExperimentResult result;
  result.split = make_ssl_splits(ids, config.ssl.labelled_ratio, config.folds, config.ssl.seed);
  for (int k = 0; k < config.folds; ++k) {
    if (!only_folds.empty() && std::find(only_folds.begin(), only_folds.end(), k) == only_folds.end()) continue;
    progress(hooks, "ssl fold " + std::to_string(k + 1) + "/" + std::to_string(config.folds));
    result.folds.push_back(run_ssl_fold(index, result.split, k, config));
  }
  return result;
}

}  // namespace roiloc
