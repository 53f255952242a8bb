#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "roiloc/box.hpp"
#include "roiloc/volume.hpp"

namespace roiloc {

struct Annotation {
  std::string scan_id;
  BoundingBox gt_box;
  std::string organ_label;
};

void save_annotation(const Annotation& annotation, const std::filesystem::path& path);
Annotation load_annotation(const std::filesystem::path& path);

struct DatasetEntry {
  std::string scan_id;
  std::filesystem::path volume_path;                     // relative to the dataset root
  std::optional<std::filesystem::path> annotation_path;  // relative to the dataset root
  bool labelled = false;
};

/// `<root>/index.json`. Scan ids are unique; labelled entries carry an annotation.
class DatasetIndex {
 public:
  DatasetIndex() = default;
  DatasetIndex(std::filesystem::path root, std::vector<DatasetEntry> entries);

  static DatasetIndex load(const std::filesystem::path& root);
  void save() const;

  const std::filesystem::path& root() const { return root_; }
  const std::vector<DatasetEntry>& entries() const { return entries_; }
  const DatasetEntry& entry(const std::string& scan_id) const;

  Volume load_volume(const DatasetEntry& entry) const;
  /// Reads the annotation file. Callers decide whether they are allowed to.
  Annotation load_annotation(const DatasetEntry& entry) const;

 private:
  void validate() const;

  std::filesystem::path root_;
  std::vector<DatasetEntry> entries_;
};

/// A scan with a box to learn from: ground truth or a pseudo-label.
struct LabelledScan {
  std::string scan_id;
  std::shared_ptr<const Volume> volume;
  BoundingBox gt_box;
};

/// A scan whose annotation, if any, is never visible to the consumer.
struct UnlabelledScan {
  std::string scan_id;
  std::shared_ptr<const Volume> volume;
};

}  // namespace roiloc
