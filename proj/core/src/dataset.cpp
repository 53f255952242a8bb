#include "roiloc/dataset.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "roiloc/error.hpp"

namespace roiloc {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("unparsable JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const json& doc, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace

void save_annotation(const Annotation& annotation, const fs::path& path) {
  json doc;
  doc["scan_id"] = annotation.scan_id;
  doc["lower"] = annotation.gt_box.lower;
  doc["size"] = annotation.gt_box.size;
  doc["organ"] = annotation.organ_label;
  write_json(doc, path);
}

Annotation load_annotation(const fs::path& path) {
  const json doc = read_json(path);
  try {
    Annotation a;
    a.scan_id = doc.at("scan_id").get<std::string>();
    a.gt_box.lower = doc.at("lower").get<Index3>();
    a.gt_box.size = doc.at("size").get<Index3>();
    a.organ_label = doc.value("organ", std::string());
    if (!a.gt_box.valid()) throw Error("annotation " + path.string() + " has a non-positive size");
    return a;
  } catch (const json::exception& e) {
    throw Error("malformed annotation " + path.string() + ": " + e.what());
  }
}

DatasetIndex::DatasetIndex(fs::path root, std::vector<DatasetEntry> entries)
    : root_(std::move(root)), entries_(std::move(entries)) {
  validate();
}

void DatasetIndex::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.scan_id).second) throw Error("duplicate scan id '" + e.scan_id + "'");
    if (e.labelled && !e.annotation_path) {
      throw Error("labelled scan '" + e.scan_id + "' has no annotation path");
    }
  }
}

DatasetIndex DatasetIndex::load(const fs::path& root) {
  const json doc = read_json(root / "index.json");
  std::vector<DatasetEntry> entries;
  try {
    for (const auto& item : doc.at("entries")) {
      DatasetEntry e;
      e.scan_id = item.at("scan_id").get<std::string>();
      e.volume_path = item.at("volume").get<std::string>();
      if (item.contains("annotation") && !item.at("annotation").is_null()) {
        e.annotation_path = fs::path(item.at("annotation").get<std::string>());
      }
      e.labelled = item.value("labelled", false);
      entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error("malformed index in " + root.string() + ": " + e.what());
  }
  return DatasetIndex(root, std::move(entries));
}

void DatasetIndex::save() const {
  json list = json::array();
  for (const auto& e : entries_) {
    json item;
    item["scan_id"] = e.scan_id;
    item["volume"] = e.volume_path.generic_string();
    item["annotation"] = e.annotation_path ? json(e.annotation_path->generic_string()) : json();
    item["labelled"] = e.labelled;
    list.push_back(std::move(item));
  }
  write_json(json{{"entries", list}}, root_ / "index.json");
}

const DatasetEntry& DatasetIndex::entry(const std::string& scan_id) const {
  for (const auto& e : entries_) {
    if (e.scan_id == scan_id) return e;
  }
  throw Error("unknown scan id '" + scan_id + "'");
}

Volume DatasetIndex::load_volume(const DatasetEntry& entry) const {
  return roiloc::load_volume(root_ / entry.volume_path);
}

Annotation DatasetIndex::load_annotation(const DatasetEntry& entry) const {
  if (!entry.annotation_path) throw Error("scan '" + entry.scan_id + "' has no annotation");
  Annotation a = roiloc::load_annotation(root_ / *entry.annotation_path);
  if (a.scan_id != entry.scan_id) {
    throw Error("annotation scan id '" + a.scan_id + "' does not match '" + entry.scan_id + "'");
  }
  return a;
}

}  // namespace roiloc
