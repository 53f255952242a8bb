#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "roiloc/config.hpp"
#include "roiloc/error.hpp"
#include "roiloc/experiment.hpp"
#include "roiloc/fusion.hpp"
#include "roiloc/inference.hpp"
#include "roiloc/metrics.hpp"
#include "roiloc/model_bundle.hpp"
#include "roiloc/ssl.hpp"
#include "roiloc/train.hpp"

namespace fs = std::filesystem;
using namespace roiloc;

namespace {

struct Common {
  std::string dataset;
  std::string out;
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int folds = 0;
  double ratio = 0.0;
  std::vector<std::string> overrides;
  bool overwrite = false;
  bool quiet = false;
};

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) {
    if (!fs::exists(c.config)) throw Error("config file not found: " + c.config);
    cfg = load_config(c.config);
  }
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed_set) cfg.set_seed(c.seed);
  if (c.folds != 0) cfg.folds = c.folds;
  if (c.ratio != 0.0) cfg.ssl.labelled_ratio = c.ratio;
  cfg.validate();
  return cfg;
}

DatasetIndex open_dataset(const std::string& root) {
  if (root.empty()) throw Error("--dataset is required");
  if (!fs::exists(fs::path(root) / "index.json")) throw Error("no index.json under " + root);
  return DatasetIndex::load(root);
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Outputs are staged in a sibling directory and renamed into place on success.
class StagedOutput {
 public:
  StagedOutput(const std::string& out, bool overwrite) : final_(out) {
    if (out.empty()) throw Error("--out is required");
    if (fs::exists(final_) && !fs::is_empty(final_) && !overwrite) {
      throw Error("output directory " + out + " is not empty (use --overwrite)");
    }
    std::random_device rd;
    staging_ = final_;
    staging_ += ".tmp-" + std::to_string(rd());
    fs::create_directories(staging_);
  }
  ~StagedOutput() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }
  const fs::path& dir() const { return staging_; }
  void commit() {
    if (fs::exists(final_)) fs::remove_all(final_);
    if (final_.has_parent_path()) fs::create_directories(final_.parent_path());
    fs::rename(staging_, final_);
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path staging_;
  bool committed_ = false;
};

ExperimentHooks progress_hooks(const Common& c) {
  ExperimentHooks h;
  if (!c.quiet) {
    const auto t0 = std::chrono::steady_clock::now();
    h.progress = [t0](const std::string& msg) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "[" << static_cast<int>(s) << "s] " << msg << '\n';
    };
  }
  return h;
}

void write_metrics_summary(const fs::path& dir, const std::vector<ScanResult>& scans) {
  write_file(dir / "per_scan.csv", per_scan_csv(scans));
  write_file(dir / "aggregate.csv", aggregate_csv(aggregate(scans)));
}

int cmd_gen_data(const Common& c, int count) {
  ExperimentConfig cfg = resolve_config(c);
  if (count > 0) cfg.scan_count = count;
  StagedOutput out(c.out, c.overwrite);
  generate_dataset(out.dir(), cfg.scan_count, cfg.phantom);
  write_file(out.dir() / "config.ini", to_ini(cfg));
  out.commit();
  return 0;
}

int cmd_train(const Common& c) {
  const ExperimentConfig cfg = resolve_config(c);
  const DatasetIndex index = open_dataset(c.dataset);
  StagedOutput out(c.out, c.overwrite);
  std::vector<CycleLog> log;
  std::vector<std::string> ids;
  for (const auto& e : index.entries()) {
    if (e.labelled) ids.push_back(e.scan_id);
  }
  const auto scans = load_labelled(index, ids);
  TrainingHooks th;
  if (!c.quiet) {
    th.on_cycle = [](const CycleLog& row) {
      std::cerr << "cycle " << row.cycle << " nav_loss " << row.nav_loss << " bbox_loss " << row.bbox_loss << '\n';
    };
  }
  const ModelBundle bundle = run_training(scans, cfg.train, nullptr, &log, th);
  save_bundle(bundle, out.dir() / "model");
  write_file(out.dir() / "training_log.csv", training_log_csv(log));
  write_file(out.dir() / "config.ini", to_ini(cfg));
  out.commit();
  return 0;
}

int cmd_localize(const Common& c, const std::string& model_dir) {
  const ExperimentConfig cfg = resolve_config(c);
  const DatasetIndex index = open_dataset(c.dataset);
  if (model_dir.empty()) throw Error("--model is required");
  const ModelBundle bundle = load_bundle(model_dir);
  StagedOutput out(c.out, c.overwrite);
  const auto& entries = index.entries();
  std::vector<CandidateSet> sets(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Volume v = index.load_volume(entries[i]);
    sets[i] = {entries[i].scan_id, v.dims(), v.spacing(), localize(v, bundle, cfg.inference)};
    write_file(out.dir() / "candidates" / (entries[i].scan_id + ".json"), candidates_to_json(sets[i]));
  }
  out.commit();
  return 0;
}

std::vector<CandidateSet> read_candidate_dir(const std::string& dir) {
  if (dir.empty()) throw Error("--candidates is required");
  if (!fs::is_directory(dir)) throw Error("candidate directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<CandidateSet> out;
  for (const auto& f : files) out.push_back(candidates_from_json(read_file(f)));
  if (out.empty()) throw Error("no candidate files in " + dir);
  return out;
}

int cmd_fuse(const Common& c, const std::string& cand_dir) {
  const ExperimentConfig cfg = resolve_config(c);
  const auto sets = read_candidate_dir(cand_dir);
  StagedOutput out(c.out, c.overwrite);
  std::ostringstream os;
  os << "scan_id,lower_x,lower_y,lower_z,size_x,size_y,size_z\n";
  for (const auto& s : sets) {
    const BoundingBox b = fuse(s.candidates, cfg.fusion, s.dims);
    os << s.scan_id << ',' << b.lower[0] << ',' << b.lower[1] << ',' << b.lower[2] << ',' << b.size[0] << ','
       << b.size[1] << ',' << b.size[2] << '\n';
  }
  write_file(out.dir() / "fused.csv", os.str());
  out.commit();
  return 0;
}

int cmd_sweep_offset(const Common& c, const std::string& cand_dir, std::vector<double> offsets) {
  const ExperimentConfig cfg = resolve_config(c);
  const DatasetIndex index = open_dataset(c.dataset);
  const auto sets = read_candidate_dir(cand_dir);
  if (offsets.empty()) offsets = default_sweep_offsets();
  for (double o : offsets) FusionConfig{o, cfg.fusion.include_threshold}.validate();
  std::vector<ScanCandidates> input;
  for (const auto& s : sets) {
    const auto& e = index.entry(s.scan_id);
    if (!e.annotation_path) throw Error("scan " + s.scan_id + " has no annotation for the sweep");
    input.push_back({s.scan_id, s.dims, s.candidates, index.load_annotation(e).gt_box});
  }
  StagedOutput out(c.out, c.overwrite);
  write_file(out.dir() / "sweep_offset.csv", sweep_csv(sweep_offset(input, offsets, cfg.fusion.include_threshold)));
  out.commit();
  return 0;
}

int cmd_crossval(const Common& c) {
  const ExperimentConfig cfg = resolve_config(c);
  const DatasetIndex index = open_dataset(c.dataset);
  StagedOutput out(c.out, c.overwrite);
  const CrossvalResult r = crossval(index, cfg, progress_hooks(c));
  write_metrics_summary(out.dir(), r.scans);
  for (const auto& set : r.candidates) {
    write_file(out.dir() / "candidates" / (set.scan_id + ".json"), candidates_to_json(set));
  }
  for (std::size_t k = 0; k < r.training_logs.size(); ++k) {
    write_file(out.dir() / ("training_log_fold" + std::to_string(k) + ".csv"), training_log_csv(r.training_logs[k]));
  }
  write_file(out.dir() / "sweep_offset.csv",
             sweep_csv(sweep_offset(r.sweep_input, default_sweep_offsets(), cfg.fusion.include_threshold)));
  write_file(out.dir() / "config.ini", to_ini(cfg));
  out.commit();
  return 0;
}

int cmd_ssl(const Common& c, const std::vector<int>& only_folds) {
  const ExperimentConfig cfg = resolve_config(c);
  const DatasetIndex index = open_dataset(c.dataset);
  StagedOutput out(c.out, c.overwrite);
  const SslExperimentResult r = ssl_crossval(index, cfg, only_folds, progress_hooks(c));
  write_metrics_summary(out.dir(), r.scans());
  for (const auto& f : r.folds) {
    const std::string tag = "fold" + std::to_string(f.fold);
    write_file(out.dir() / ("pseudo_labels_" + tag + ".json"), pseudo_labels_json(f.ssl.ledger));
    write_file(out.dir() / ("rounds_" + tag + ".csv"), ssl_rounds_csv(f.ssl.rounds));
  }
  write_file(out.dir() / "config.ini", to_ini(cfg));
  out.commit();
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool dataset, bool folds) {
  if (dataset) sub->add_option("--dataset", c.dataset, "Dataset root containing index.json");
  sub->add_option("--out", c.out, "Output directory")->required();
  sub->add_option("--config", c.config, "Key-value config file");
  sub->add_option("--seed", c.seed, "Seed for every module")->each([&c](const std::string&) { c.seed_set = true; });
  sub->add_option("--set", c.overrides, "Override a config key: section.key=value");
  sub->add_flag("--overwrite", c.overwrite, "Replace a non-empty output directory");
  sub->add_flag("--quiet", c.quiet, "No progress output");
  if (folds) sub->add_option("--folds", c.folds, "Fold count")->check(CLI::Range(2, 1000));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D region-of-interest localisation with an imitation-guided navigation agent"};
  app.require_subcommand(1);
  Common c;
  int count = 0;
  std::string model_dir, cand_dir;
  std::vector<double> offsets;
  std::vector<int> only_folds;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic phantom dataset");
  add_common(gen, c, false, false);
  gen->add_option("--count", count, "Number of phantoms (default: experiment.scan_count)");

  auto* train = app.add_subcommand("train", "Train all six networks on the labelled scans");
  add_common(train, c, true, false);

  auto* loc = app.add_subcommand("localize", "Write 6 candidates per scan");
  add_common(loc, c, true, false);
  loc->add_option("--model", model_dir, "Model bundle directory")->required();

  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse candidate files into one box per scan");
  add_common(fuse_cmd, c, false, false);
  fuse_cmd->add_option("--candidates", cand_dir, "Directory of candidate JSON files")->required();

  auto* sweep = app.add_subcommand("sweep-offset", "Mean fused IOU per fusion offset");
  add_common(sweep, c, true, false);
  sweep->add_option("--candidates", cand_dir, "Directory of candidate JSON files")->required();
  sweep->add_option("--offsets", offsets, "Offsets in percent (default 0,5,...,45)")->delimiter(',');

  auto* ssl = app.add_subcommand("ssl", "Self-training cross-validation");
  add_common(ssl, c, true, true);
  ssl->add_option("--ratio", c.ratio, "Labelled fraction, e.g. 0.3 for 30:70")->check(CLI::Range(0.0, 1.0));
  ssl->add_option("--only-fold", only_folds, "Run only these folds (0-based)");

  auto* cv = app.add_subcommand("crossval", "Supervised k-fold cross-validation");
  add_common(cv, c, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) return cmd_gen_data(c, count);
    if (*train) return cmd_train(c);
    if (*loc) return cmd_localize(c, model_dir);
    if (*fuse_cmd) return cmd_fuse(c, cand_dir);
    if (*sweep) return cmd_sweep_offset(c, cand_dir, offsets);
    if (*ssl) return cmd_ssl(c, only_folds);
    if (*cv) return cmd_crossval(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
