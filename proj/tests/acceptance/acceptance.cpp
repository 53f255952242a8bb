// Acceptance suite: one PASS/FAIL line per criterion.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "roiloc/config.hpp"
#include "roiloc/experiment.hpp"
#include "roiloc/fusion.hpp"
#include "roiloc/imitation.hpp"
#include "roiloc/inference.hpp"
#include "roiloc/metrics.hpp"
#include "roiloc/nn/gradient_check.hpp"
#include "roiloc/nn/network.hpp"
#include "roiloc/train.hpp"

namespace fs = std::filesystem;
using namespace roiloc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_work;
std::string g_desk = ROILOC_DESK_CONFIG;
bool g_reuse = false;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Runs the CLI; throws on a non-zero exit.
void cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + ROILOC_CLI_PATH + " " + args + " --quiet";
  const int status = std::system(cmd.c_str());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) throw Error("command failed: " + cmd);
}

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header.empty()) {
      header = split(line);
      continue;
    }
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::map<std::string, std::string> method_row(const fs::path& aggregate, const std::string& method) {
  for (auto& r : read_csv(aggregate)) {
    if (r["method"] == method) return r;
  }
  throw Error("method " + method + " missing from " + aggregate.string());
}

// Relative path -> bytes for every regular file under `root`.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

std::string tree_diff(const fs::path& a, const fs::path& b) {
  const auto ta = tree(a), tb = tree(b);
  if (ta.size() != tb.size()) return "file count " + std::to_string(ta.size()) + " vs " + std::to_string(tb.size());
  for (const auto& [name, bytes] : ta) {
    const auto it = tb.find(name);
    if (it == tb.end()) return "missing " + name;
    if (it->second != bytes) return "differs: " + name;
  }
  return "";
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  std::mt19937_64 rng(1);
  int mismatches = 0;
  double worst_identity = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::uniform_int_distribution<int> d(1, 24);
    const Index3 dims{d(rng), d(rng), d(rng)};
    auto random_box = [&] {
      BoundingBox b;
      for (int a = 0; a < 3; ++a) {
        b.lower[a] = std::uniform_int_distribution<int>(0, dims[a] - 1)(rng);
        b.size[a] = std::uniform_int_distribution<int>(1, dims[a] - b.lower[a])(rng);
      }
      return b;
    };
    const BoundingBox a = random_box(), b = random_box();
    auto in = [](const BoundingBox& box, int x, int y, int z) {
      const int p[3] = {x, y, z};
      for (int k = 0; k < 3; ++k) {
        if (p[k] < box.lower[k] || p[k] >= box.lower[k] + box.size[k]) return false;
      }
      return true;
    };
    std::int64_t na = 0, nb = 0, both = 0, either = 0;
    for (int z = 0; z < dims[2]; ++z) {
      for (int y = 0; y < dims[1]; ++y) {
        for (int x = 0; x < dims[0]; ++x) {
          const bool ia = in(a, x, y, z), ib = in(b, x, y, z);
          na += ia;
          nb += ib;
          both += ia && ib;
          either += ia || ib;
        }
      }
    }
    const double want_iou = static_cast<double>(both) / static_cast<double>(either);
    const double want_dice = 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
    if (iou(a, b) != want_iou || dice(a, b) != want_dice) ++mismatches;
    const double i = iou(a, b);
    worst_identity = std::max(worst_identity, std::abs(dice(a, b) - 2 * i / (1 + i)));
  }
  return {mismatches == 0 && worst_identity <= 1e-12,
          std::to_string(mismatches) + " mismatches over 1000 pairs, max |dice - 2iou/(1+iou)| = " +
              fmt("%.3g", worst_identity)};
}

Outcome gradient_checks() {
  using nn::LayerKind;
  using nn::LayerSpec;
  struct Case {
    std::string name;
    nn::NetworkSpec spec;
  };
  std::vector<Case> cases;
  auto tiny = [](std::vector<LayerSpec> layers, const Index3& shape, int outputs) {
    nn::NetworkSpec s;
    s.input_shape = shape;
    s.layers = std::move(layers);
    s.output_size = outputs;
    return s;
  };
  cases.push_back({"conv3d", tiny({{LayerKind::Conv3d, 3, 1, 2}, {LayerKind::Dense, 0, 4 * 3 * 5 * 2, 3}}, {4, 3, 5}, 3)});
  cases.push_back({"batchnorm", tiny({{LayerKind::Conv3d, 3, 1, 2}, {LayerKind::BatchNorm, 0, 2, 2},
                                      {LayerKind::Dense, 0, 27 * 2, 2}},
                                     {3, 3, 3}, 2)});
  cases.push_back({"relu", tiny({{LayerKind::Conv3d, 3, 1, 2}, {LayerKind::Relu}, {LayerKind::Dense, 0, 27 * 2, 2}},
                                {3, 3, 3}, 2)});
  cases.push_back({"maxpool3d", tiny({{LayerKind::Conv3d, 3, 1, 2}, {LayerKind::MaxPool3d},
                                      {LayerKind::Dense, 0, 8 * 2, 3}},
                                     {4, 4, 4}, 3)});
  cases.push_back({"dense", tiny({{LayerKind::Dense, 0, 8, 4}}, {2, 2, 2}, 4)});
  cases.push_back({"softmax", tiny({{LayerKind::Dense, 0, 8, 5}, {LayerKind::Softmax}}, {2, 2, 2}, 5)});
  for (int arch = 1; arch <= 3; ++arch) {
    for (nn::Head head : {nn::Head::Navigation, nn::Head::BBox}) {
      const Index3 shape = arch == 2 ? Index3{8, 8, 8} : Index3{5, 5, 5};
      cases.push_back({"arch" + std::to_string(arch) + "/" + std::string(nn::to_string(head)),
                       nn::make_network_spec(arch, head, shape, {2, 2, 2})});
    }
  }

  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  std::uint64_t seed = 1;
  for (const auto& c : cases) {
    auto net = nn::Network<double>::build(c.spec, seed++);
    // Random batchnorm affine parameters so the check does not sit on the identity.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (std::size_t i = 0; i < c.spec.layers.size(); ++i) {
      if (c.spec.layers[i].kind == LayerKind::BatchNorm) {
        for (double& g : net.params().layers[i].weight) g = u(rng);
        for (double& b : net.params().layers[i].bias) b = u(rng) - 1.0;
      }
    }
    const auto& s = c.spec.input_shape;
    nn::Tensor<double> x({3, s[2], s[1], s[0], 1});
    for (double& v : x.data) v = u(rng) - 0.5;
    nn::Tensor<double> y({3, c.spec.output_size});
    for (double& v : y.data) v = u(rng) - 0.5;
    const auto r = nn::check_gradients(net, x, y, 1e-6, 0, seed);
    checked += r.checked;
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_name = c.name + " " + r.worst_parameter;
    }
  }
  return {worst < 1e-3, std::to_string(cases.size()) + " networks, " + std::to_string(checked) +
                            " parameters, max relative error " + fmt("%.3g", worst) + " (" + worst_name + ")"};
}

Outcome oracle_convergence() {
  std::mt19937_64 rng(3);
  int failures = 0;
  int worst_slack = 1 << 30;
  for (int t = 0; t < 200; ++t) {
    std::uniform_int_distribution<int> d(8, 128);
    const Index3 dims{d(rng), d(rng), d(rng)};
    Index3 size{}, start{}, gt{};
    for (int a = 0; a < 3; ++a) {
      size[a] = std::uniform_int_distribution<int>(1, dims[a])(rng);
      // Centres a box of this size can take without leaving the volume.
      const int lo = size[a] / 2, hi = dims[a] - size[a] + size[a] / 2;
      start[a] = std::uniform_int_distribution<int>(lo, hi)(rng);
      gt[a] = std::uniform_int_distribution<int>(lo, hi)(rng);
    }
    int bound = 0;
    for (int a = 0; a < 3; ++a) bound += (std::abs(gt[a] - start[a]) + 8) / 9 + 4;
    EpisodeState s = start_episode(start, size, dims);
    int steps = 0;
    while (!s.terminated && steps <= bound) {
      s = apply_action(s, imitation_action(s.centre(), gt), dims);
      ++steps;
    }
    if (!s.terminated || s.centre() != gt || steps > bound) ++failures;
    worst_slack = std::min(worst_slack, bound - steps);
  }
  return {failures == 0,
          std::to_string(200 - failures) + "/200 rollouts terminated on the target, min slack " +
              std::to_string(worst_slack) + " steps"};
}

Outcome fusion_geometry() {
  std::mt19937_64 rng(4);
  const std::vector<double> offsets{0, 10, 20, 33, 45};
  int superset = 0, monotone = 0, fixed = 0;
  for (int t = 0; t < 500; ++t) {
    std::uniform_int_distribution<int> d(8, 96);
    const Index3 dims{d(rng), d(rng), d(rng)};
    std::vector<Candidate> c;
    for (int k = 0; k < 6; ++k) {
      Candidate x;
      x.arch_id = k / 2 + 1;
      x.readout = k % 2 ? Readout::Last10Mean : Readout::Terminal;
      x.confidence = std::uniform_real_distribution<double>(0, 1)(rng);
      for (int a = 0; a < 3; ++a) {
        x.box.lower[a] = std::uniform_int_distribution<int>(0, dims[a] - 1)(rng);
        x.box.size[a] = std::uniform_int_distribution<int>(1, dims[a] - x.box.lower[a])(rng);
      }
      c.push_back(x);
    }
    const double tau = std::uniform_real_distribution<double>(0, 1.5)(rng);
    const auto selected = select_architectures(c, tau);
    const auto f0 = fuse(c, {0.0, tau}, dims);
    bool ok = true;
    for (const auto& x : c) {
      if (std::find(selected.begin(), selected.end(), x.arch_id) != selected.end() && !f0.contains(x.box)) ok = false;
    }
    superset += ok;

    ok = true;
    BoundingBox prev = f0;
    for (double o : offsets) {
      const auto f = fuse(c, {o, tau}, dims);
      for (int a = 0; a < 3; ++a) ok = ok && f.size[a] <= prev.size[a];
      prev = f;
    }
    monotone += ok;

    ok = true;
    std::vector<Candidate> same(6, c[t % 6]);
    for (int k = 0; k < 6; ++k) same[k].arch_id = k / 2 + 1;
    for (double o : offsets) ok = ok && fuse(same, {o, tau}, dims) == c[t % 6].box;
    fixed += ok;
  }
  return {superset == 500 && monotone == 500 && fixed == 500,
          "superset " + std::to_string(superset) + "/500, monotone " + std::to_string(monotone) + "/500, fixed point " +
              std::to_string(fixed) + "/500"};
}

// Shared state for the end-to-end criteria.
struct DeskRun {
  bool ran = false;
  std::string error;
  double seconds = 0.0;
};
DeskRun g_cv;

fs::path data_dir() { return g_work / "data"; }
fs::path cv_dir() { return g_work / "crossval"; }

void ensure_dataset() {
  if (!fs::exists(data_dir() / "index.json")) {
    cli("gen-data --config " + g_desk + " --overwrite --out " + data_dir().string());
  }
}

void ensure_crossval() {
  if (g_cv.ran) return;
  g_cv.ran = true;
  const fs::path timing = g_work / "crossval_seconds.txt";
  try {
    if (g_reuse && fs::exists(cv_dir() / "aggregate.csv") && fs::exists(timing)) {
      g_cv.seconds = std::stod(slurp(timing));
      return;
    }
    ensure_dataset();
    const auto t0 = std::chrono::steady_clock::now();
    cli("crossval --config " + g_desk + " --dataset " + data_dir().string() + " --overwrite --out " +
        cv_dir().string());
    g_cv.seconds = seconds_since(t0);
    std::ofstream(timing) << g_cv.seconds << '\n';
  } catch (const std::exception& e) {
    g_cv.error = e.what();
  }
}

Outcome supervised_desk_run() {
  ensure_crossval();
  if (!g_cv.error.empty()) return {false, g_cv.error};
  auto row = method_row(cv_dir() / "aggregate.csv", kMethodFused);
  const double acc = std::stod(row["accuracy_mean"]);
  const double iou_pct = std::stod(row["iou_mean"]);
  const int n = std::stoi(row["n_scans"]);
  auto best = method_row(cv_dir() / "aggregate.csv", kMethodBest);
  const bool ok = n == 120 && acc >= 80.0 && iou_pct >= 50.0 && g_cv.seconds <= 3600.0;
  return {ok, "fused accuracy " + fmt("%.2f", acc) + "%, fused IOU " + fmt("%.4f", iou_pct / 100.0) +
                  " (most-confident: " + fmt("%.2f", std::stod(best["accuracy_mean"])) + "%, " +
                  fmt("%.4f", std::stod(best["iou_mean"]) / 100.0) + "), " + std::to_string(n) + " scans, " +
                  fmt("%.0f", g_cv.seconds) + " s"};
}

Outcome offset_sweep_shape() {
  ensure_crossval();
  if (!g_cv.error.empty()) return {false, g_cv.error};
  const fs::path out = g_work / "sweep";
  cli("sweep-offset --config " + g_desk + " --dataset " + data_dir().string() + " --candidates " +
      (cv_dir() / "candidates").string() + " --overwrite --out " + out.string());
  const auto rows = read_csv(out / "sweep_offset.csv");
  std::vector<double> off, val;
  for (auto r : rows) {
    off.push_back(std::stod(r["offset_percent"]));
    val.push_back(std::stod(r["mean_iou"]));
  }
  if (val.size() != 10) return {false, "expected 10 sweep points"};
  const auto best = std::max_element(val.begin(), val.end()) - val.begin();
  const bool interior = val[best] > val.front() && val[best] > val.back();
  std::string curve;
  for (std::size_t i = 0; i < val.size(); ++i) curve += (i ? " " : "") + fmt("%.0f:", off[i]) + fmt("%.4f", val[i]);
  return {interior, "maximum " + fmt("%.4f", val[best]) + " at offset " + fmt("%.0f", off[best]) + " [" + curve + "]"};
}

Outcome ssl_parity() {
  ensure_crossval();
  if (!g_cv.error.empty()) return {false, g_cv.error};
  const fs::path out = g_work / "ssl";
  const auto t0 = std::chrono::steady_clock::now();
  try {
    cli("ssl --config " + g_desk + " --ratio 0.3 --dataset " + data_dir().string() + " --overwrite --out " +
        out.string());
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
  const double secs = seconds_since(t0);
  auto ssl = method_row(out / "aggregate.csv", kMethodFused);
  auto sup = method_row(cv_dir() / "aggregate.csv", kMethodFused);
  const double ds = std::stod(ssl["dice_mean"]), dp = std::stod(sup["dice_mean"]);
  std::size_t pseudo = 0;
  for (int k = 0; k < 3; ++k) {
    const auto text = slurp(out / ("pseudo_labels_fold" + std::to_string(k) + ".json"));
    pseudo += static_cast<std::size_t>(std::count(text.begin(), text.end(), '{')) - 1;
  }
  return {dp - ds <= 10.0 && secs <= 5400.0,
          "self-training DC " + fmt("%.2f", ds) + " vs supervised " + fmt("%.2f", dp) + " (gap " + fmt("%.2f", dp - ds) +
              " points), " + std::to_string(pseudo) + " pseudo-labels, " + fmt("%.0f", secs) + " s"};
}

Outcome protocol_conformance() {
  std::vector<std::string> notes;
  bool ok = true;
  auto fail = [&](const std::string& why) {
    ok = false;
    notes.push_back("FAIL " + why);
  };

  // (a) Trained models: step cap, no oracle, 6 candidates.
  ensure_dataset();
  const auto index = DatasetIndex::load(data_dir());
  ExperimentConfig cfg = load_config(g_desk);
  std::vector<std::string> ids;
  for (const auto& e : index.entries()) ids.push_back(e.scan_id);
  auto train_cfg = cfg.train;
  train_cfg.cycles = 3;
  const auto train_scans = load_labelled(index, std::vector<std::string>(ids.begin(), ids.begin() + 16));
  const auto bundle = run_training(train_scans, train_cfg);
  const auto eval = load_unlabelled(index, std::vector<std::string>(ids.begin() + 16, ids.begin() + 56));
  const auto oracle_before = oracle_call_count();
  int max_steps = 0;
  std::map<std::string, int> reasons;
  for (const auto& s : eval) {
    std::vector<RolloutTrace> traces;
    const auto c = localize(*s.volume, bundle, cfg.inference, &traces);
    if (c.size() != 6) fail("candidate count " + std::to_string(c.size()));
    for (const auto& t : traces) {
      max_steps = std::max(max_steps, t.steps);
      ++reasons[std::string(to_string(t.reason))];
    }
  }
  // A policy that never terminates must still stop at the cap.
  ArchPredictor wander;
  wander.navigate = [](const Patch&, const EpisodeState& st) {
    return Action::move(Axis::X, st.step % 2 ? Sign::Minus : Sign::Plus, st.step % 4 < 2 ? Level::Coarse : Level::Fine);
  };
  wander.bbox = [](const Patch&, const EpisodeState&) { return BBoxPrediction{0.2, 0.2, 0.2, 0.5}; };
  ArchPredictor drift = wander;
  drift.navigate = [](const Patch&, const EpisodeState&) {
    return Action::move(Axis::Z, Sign::Plus, Level::VeryFine);
  };
  std::vector<RolloutTrace> stub_traces;
  const auto stub_c = localize(*eval.front().volume, {wander, drift, drift}, bundle.box_size, bundle.input_shape,
                               cfg.inference, &stub_traces);
  for (const auto& t : stub_traces) max_steps = std::max(max_steps, t.steps);
  if (stub_c.size() != 6) fail("stub candidate count");
  if (max_steps > 25) fail("rollout of " + std::to_string(max_steps) + " steps");
  if (oracle_call_count() != oracle_before) fail("inference consulted the imitation oracle");
  std::string reason_text;
  for (const auto& [r, n] : reasons) reason_text += (reason_text.empty() ? "" : "/") + r + " " + std::to_string(n);
  notes.push_back(std::to_string(eval.size()) + " scans x 3 rollouts, max " + std::to_string(max_steps) +
                  " steps (" + reason_text + "), 0 oracle calls");

  if (g_reuse && fs::exists(cv_dir() / "aggregate.csv")) ensure_crossval();
  if (g_cv.ran && g_cv.error.empty()) {
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(cv_dir() / "candidates")) {
      if (candidates_from_json(slurp(e.path())).candidates.size() != 6) fail("candidate file " + e.path().string());
      ++files;
    }
    notes.push_back(std::to_string(files) + " cross-validation candidate files with 6 candidates");
  }

  // (b) Poisoning: hidden annotations of the unlabelled training scans are garbled or removed.
  const std::string small =
      " --config " + g_desk +
      " --set train.cycles=2 --set ssl.max_rounds=2 --set ssl.pseudo_threshold=0.66 --folds 2 --ratio 0.5";
  const fs::path clean = g_work / "poison_clean", poisoned = g_work / "poison_dirty";
  cli("gen-data --count 16 --seed 21 --overwrite --out " + clean.string());
  fs::remove_all(poisoned);
  fs::copy(clean, poisoned, fs::copy_options::recursive);
  {
    const auto pidx = DatasetIndex::load(poisoned);
    std::vector<std::string> pids;
    for (const auto& e : pidx.entries()) pids.push_back(e.scan_id);
    ExperimentConfig pc = load_config(g_desk);
    pc.ssl.labelled_ratio = 0.5;
    const auto split = make_ssl_splits(pids, pc.ssl.labelled_ratio, 2, pc.ssl.seed);
    int n = 0;
    for (const auto& id : split.fold(0).train_unlabelled) {
      const auto p = poisoned / *pidx.entry(id).annotation_path;
      if (n++ % 2) {
        fs::remove(p);
      } else {
        std::ofstream(p, std::ios::trunc) << "{\"scan_id\": \"" << id << "\", \"gt_box\": \"poisoned\"";
      }
    }
    notes.push_back(std::to_string(n) + " hidden annotations poisoned");
  }
  cli("ssl" + small + " --only-fold 0 --dataset " + clean.string() + " --overwrite --out " +
      (g_work / "ssl_clean").string());
  cli("ssl" + small + " --only-fold 0 --dataset " + poisoned.string() + " --overwrite --out " +
      (g_work / "ssl_dirty").string());
  if (const auto d = tree_diff(g_work / "ssl_clean", g_work / "ssl_dirty"); !d.empty()) {
    fail("poisoned SSL output " + d);
  }
  {
    const auto text = slurp(g_work / "ssl_clean" / "pseudo_labels_fold0.json");
    const auto labels = std::count(text.begin(), text.end(), '{') - 1;
    notes.push_back("poisoned SSL run identical (" + std::to_string(labels) + " pseudo-labels)");
  }

  // (c) Byte reproducibility: data, training, inference, fusion, sweep and SSL, with different thread counts.
  const fs::path r1 = g_work / "repro1", r2 = g_work / "repro2";
  for (const auto& [root, env] : {std::pair{r1, std::string("ROI_LOC_THREADS=1")}, std::pair{r2, std::string("ROI_LOC_THREADS=3")}}) {
    fs::remove_all(root);
    cli("gen-data --count 9 --seed 5 --out " + (root / "data").string(), env);
    const std::string tiny = " --config " + g_desk + " --set train.cycles=2 --dataset " + (root / "data").string();
    cli("crossval" + tiny + " --out " + (root / "cv").string(), env);
    cli("train" + tiny + " --out " + (root / "train").string(), env);
    cli("localize" + tiny + " --model " + (root / "train" / "model").string() + " --out " + (root / "loc").string(), env);
    cli("fuse --candidates " + (root / "loc" / "candidates").string() + " --out " + (root / "fused").string(), env);
    cli("sweep-offset --dataset " + (root / "data").string() + " --candidates " + (root / "cv" / "candidates").string() +
            " --out " + (root / "sweep").string(),
        env);
    cli("ssl" + tiny + " --set ssl.pseudo_threshold=0.66 --set ssl.max_rounds=1 --ratio 0.67 --out " +
            (root / "ssl").string(),
        env);
  }
  if (const auto d = tree_diff(r1, r2); !d.empty()) {
    fail("reproducibility " + d);
  } else {
    notes.push_back(std::to_string(tree(r1).size()) + " output files byte-identical across runs and thread counts");
  }

  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string work = (fs::temp_directory_path() / "roiloc_acceptance").string();
  std::vector<int> only;
  app.add_option("--work-dir", work, "Scratch directory (kept for inspection)");
  app.add_option("--config", g_desk, "Desk configuration for the end-to-end criteria");
  app.add_option("--only", only, "Run only these criteria");
  app.add_flag("--reuse", g_reuse, "Reuse a finished cross-validation from the work directory");
  CLI11_PARSE(app, argc, argv);
  g_work = fs::absolute(work);
  fs::create_directories(g_work);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, metric_oracle},       {2, gradient_checks},     {3, oracle_convergence}, {4, fusion_geometry},
      {5, supervised_desk_run}, {6, offset_sweep_shape},  {7, ssl_parity},         {8, protocol_conformance}};

  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::ostringstream line;
    line << "CRITERION " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
         << fmt("%.1f", seconds_since(t0)) << " s]";
    std::cout << line.str() << std::endl;
    std::ofstream(g_work / ("criterion_" + std::to_string(id) + ".txt")) << line.str() << '\n';
  }
  return failed == 0 ? 0 : 1;
}
