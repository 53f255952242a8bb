#include "roiloc/inference.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "roiloc/error.hpp"

namespace roiloc {

std::string_view to_string(Readout readout) {
  return readout == Readout::Terminal ? "terminal" : "last10mean";
}

Readout readout_from_string(std::string_view text) {
  if (text == "terminal") return Readout::Terminal;
  if (text == "last10mean") return Readout::Last10Mean;
  throw Error("unknown readout: " + std::string(text));
}

void InferenceConfig::validate() const {
  if (step_cap < 1) throw Error("inference step cap must be >= 1");
  if (mean_window < 1) throw Error("inference mean window must be >= 1");
}

namespace {

Candidate make_candidate(const BBoxPrediction& p, const Index3& centre, const Index3& dims, int arch_id,
                         Readout readout) {
  Index3 size{};
  for (int a = 0; a < 3; ++a) {
    const double s = std::isfinite(p[a]) ? p[a] * dims[a] : 1.0;
    size[a] = std::clamp(static_cast<int>(std::lround(s)), 1, dims[a]);
  }
  Candidate c;
  c.box = clip_to(box_from_centre(centre, size), dims);
  c.confidence = std::isfinite(p[3]) ? std::clamp(p[3], 0.0, 1.0) : 0.0;
  c.arch_id = arch_id;
  c.readout = readout;
  return c;
}

}  // namespace

std::vector<Candidate> localize(const Volume& volume, const std::array<ArchPredictor, 3>& predictors,
                                const Index3& box_size, const Index3& input_shape, const InferenceConfig& config,
                                std::vector<RolloutTrace>* traces) {
  config.validate();
  const Index3& dims = volume.dims();
  std::vector<Candidate> out;
  out.reserve(6);
  if (traces) traces->clear();
  for (int a = 0; a < 3; ++a) {
    const auto& pred = predictors[a];
    if (!pred.navigate || !pred.bbox) throw Error("missing predictor for architecture " + std::to_string(a + 1));

    EpisodeState state = start_episode(volume.centre_voxel(), box_size, dims);
    std::vector<BBoxPrediction> history;
    std::vector<Index3> centres;
    TerminalReason reason = TerminalReason::StepCap;
    for (;;) {
      const Patch obs = observe(state, volume, input_shape, config.patch);
      history.push_back(pred.bbox(obs, state));
      centres.push_back(state.centre());
      if (state.step >= config.step_cap) break;
      const Action action = pred.navigate(obs, state);
      EpisodeState next = apply_action(state, action, dims);
      if (next.terminated) {
        reason = TerminalReason::TerminateAction;
        state = std::move(next);
        break;
      }
      if (detect_loop(next)) {
        // Keep the state before the repeat.
        reason = TerminalReason::Loop;
        state.step = next.step;
        break;
      }
      state = std::move(next);
    }

    const Index3 centre = centres.back();
    out.push_back(make_candidate(history.back(), centre, dims, a + 1, Readout::Terminal));
    const std::size_t window = std::min<std::size_t>(config.mean_window, history.size());
    BBoxPrediction mean{};
    for (std::size_t i = history.size() - window; i < history.size(); ++i) {
      for (int k = 0; k < 4; ++k) mean[k] += history[i][k];
    }
    for (double& v : mean) v /= static_cast<double>(window);
    out.push_back(make_candidate(mean, centre, dims, a + 1, Readout::Last10Mean));

    if (traces) traces->push_back({a + 1, state.step, reason, centre, std::move(centres)});
  }
  return out;
}

std::array<ArchPredictor, 3> bundle_predictors(const ModelBundle& models) {
  models.validate();
  std::array<ArchPredictor, 3> out;
  for (int a = 0; a < 3; ++a) {
    const nn::Network<float>* nav = &models.navigation[a];
    const nn::Network<float>* box = &models.bbox[a];
    out[a].navigate = [nav](const Patch& p, const EpisodeState&) {
      const auto q = nav->infer(nn::stack_patches<float>({&p}));
      const auto s = q.sample(0);
      return Action::from_index(static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin()));
    };
    out[a].bbox = [box](const Patch& p, const EpisodeState&) {
      const auto y = box->infer(nn::stack_patches<float>({&p}));
      const auto s = y.sample(0);
      return BBoxPrediction{s[0], s[1], s[2], s[3]};
    };
  }
  return out;
}

std::vector<Candidate> localize(const Volume& volume, const ModelBundle& models, const InferenceConfig& config,
                                std::vector<RolloutTrace>* traces) {
  return localize(volume, bundle_predictors(models), models.box_size, models.input_shape, config, traces);
}

MetricReport evaluate(const BoundingBox& predicted, const BoundingBox& truth, const Vec3& spacing) {
  return measure(predicted, truth, spacing);
}

const Candidate& most_confident(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw Error("no candidates");
  return *std::max_element(candidates.begin(), candidates.end(),
                           [](const Candidate& a, const Candidate& b) { return a.confidence < b.confidence; });
}

std::string candidates_to_json(const CandidateSet& set) {
  nlohmann::ordered_json j;
  j["scan_id"] = set.scan_id;
  j["dims"] = set.dims;
  j["spacing"] = set.spacing;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : set.candidates) {
    nlohmann::ordered_json e;
    e["arch"] = c.arch_id;
    e["readout"] = to_string(c.readout);
    e["lower"] = c.box.lower;
    e["size"] = c.box.size;
    e["confidence"] = c.confidence;
    arr.push_back(std::move(e));
  }
  j["candidates"] = std::move(arr);
  return j.dump(2) + "\n";
}

CandidateSet candidates_from_json(const std::string& text) {
  CandidateSet set;
  try {
    const auto j = nlohmann::json::parse(text);
    set.scan_id = j.at("scan_id").get<std::string>();
    set.dims = j.at("dims").get<Index3>();
    set.spacing = j.at("spacing").get<Vec3>();
    for (const auto& e : j.at("candidates")) {
      Candidate c;
      c.arch_id = e.at("arch").get<int>();
      c.readout = readout_from_string(e.at("readout").get<std::string>());
      c.box = {e.at("lower").get<Index3>(), e.at("size").get<Index3>()};
      c.confidence = e.at("confidence").get<double>();
      if (c.arch_id < 1 || c.arch_id > 3) throw Error("candidate arch out of range");
      if (!c.box.valid() || !c.box.inside(set.dims)) throw Error("candidate box outside the volume");
      if (!(c.confidence >= 0.0 && c.confidence <= 1.0)) throw Error("candidate confidence outside [0, 1]");
      set.candidates.push_back(c);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed candidate file: " + std::string(e.what()));
  }
  return set;
}

}  // namespace roiloc
