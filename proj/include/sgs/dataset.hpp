#pragma once

#include <string>
#include <vector>

#include "sgs/trainer.hpp"

namespace sgs {

struct DatasetView {
  std::string image_path;  // relative to the dataset directory
  Camera camera;
  std::string split;  // "train" or "test"
};

struct DatasetManifest {
  std::string dir;
  std::vector<DatasetView> views;
  bool has_bounds = false;
  Vec3d bounds_min = Vec3d::Zero();
  Vec3d bounds_max = Vec3d::Zero();

  std::string image_full_path(const DatasetView& view) const { return dir + "/" + view.image_path; }
  int count_split(const std::string& split) const;
};

// Reads <dir>/cameras.json and validates that every referenced image
// exists, decodes, and matches its camera size. Parse failures report
// the file path and line.
DatasetManifest load_dataset(const std::string& dir);

// Writes <dir>/cameras.json for an already-populated image directory.
void save_dataset_manifest(const std::string& dir, const DatasetManifest& manifest);

// Loads the images of one split into memory.
std::vector<TrainView> load_views(const DatasetManifest& manifest, const std::string& split);

}  // namespace sgs
