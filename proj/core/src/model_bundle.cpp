#include "roiloc/model_bundle.hpp"

#include <fstream>

#include "json.hpp"
#include "roiloc/error.hpp"
#include "roiloc/nn/checkpoint.hpp"

namespace roiloc {

namespace {

bool matches(const nn::Network<float>& net, int arch_id, nn::Head head, const Index3& input_shape) {
  const auto& spec = net.spec();
  return !spec.layers.empty() && spec.arch_id == arch_id && spec.head == head && spec.input_shape == input_shape &&
         net.params().layers.size() == spec.layers.size();
}

std::string checkpoint_name(int arch_id, nn::Head head) {
  return "arch" + std::to_string(arch_id) + (head == nn::Head::Navigation ? "_nav" : "_bbox") + ".ckpt";
}

}  // namespace

bool ModelBundle::complete() const {
  for (int a = 0; a < kArchitectureCount; ++a) {
    if (!matches(navigation[a], a + 1, nn::Head::Navigation, input_shape)) return false;
    if (!matches(bbox[a], a + 1, nn::Head::BBox, input_shape)) return false;
  }
  return true;
}

void ModelBundle::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (box_size[a] < 1) throw Error("model bundle box size must be positive");
  }
  for (int a = 0; a < kArchitectureCount; ++a) {
    if (!matches(navigation[a], a + 1, nn::Head::Navigation, input_shape)) {
      throw Error("model bundle lacks a navigation network for architecture " + std::to_string(a + 1));
    }
    if (!matches(bbox[a], a + 1, nn::Head::BBox, input_shape)) {
      throw Error("model bundle lacks a bbox network for architecture " + std::to_string(a + 1));
    }
  }
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir) {
  bundle.validate();
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json j;
  j["format"] = "roiloc-bundle";
  j["version"] = 1;
  j["box_size"] = bundle.box_size;
  j["input_shape"] = bundle.input_shape;
  j["config_fingerprint"] = bundle.config_fingerprint;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (int a = 0; a < kArchitectureCount; ++a) {
    const auto nav = checkpoint_name(a + 1, nn::Head::Navigation);
    const auto box = checkpoint_name(a + 1, nn::Head::BBox);
    nn::save_checkpoint(bundle.navigation[a], dir / nav);
    nn::save_checkpoint(bundle.bbox[a], dir / box);
    files.push_back(nav);
    files.push_back(box);
  }
  j["checkpoints"] = files;
  std::ofstream out(dir / "bundle.json");
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write " + (dir / "bundle.json").string());
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream in(dir / "bundle.json");
  if (!in) throw Error("missing bundle.json in " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("unparsable bundle.json: " + std::string(e.what()));
  }
  ModelBundle bundle;
  try {
    if (j.at("format").get<std::string>() != "roiloc-bundle") throw Error("not a model bundle");
    if (j.at("version").get<int>() != 1) throw Error("unsupported bundle version");
    bundle.box_size = j.at("box_size").get<Index3>();
    bundle.input_shape = j.at("input_shape").get<Index3>();
    bundle.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed bundle.json: " + std::string(e.what()));
  }
  for (int a = 0; a < kArchitectureCount; ++a) {
    bundle.navigation[a] = nn::load_checkpoint(dir / checkpoint_name(a + 1, nn::Head::Navigation));
    bundle.bbox[a] = nn::load_checkpoint(dir / checkpoint_name(a + 1, nn::Head::BBox));
  }
  bundle.validate();
  return bundle;
}

}  // namespace roiloc
