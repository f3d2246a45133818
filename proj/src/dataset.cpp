#include "sgs/dataset.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sgs/export.hpp"

namespace sgs {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatTag = "sgs-dataset-v1";

int line_of_byte(const std::string& text, size_t byte) {
  int line = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

json camera_to_json(const Camera& c) {
  json j;
  j["width"] = c.width;
  j["height"] = c.height;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    json row = json::array();
    for (int col = 0; col < 3; ++col) row.push_back(c.rotation(r, col));
    row.push_back(c.translation[r]);
    rows.push_back(row);
  }
  j["world_to_camera"] = rows;
  return j;
}

Camera camera_from_json(const json& j) {
  Camera c;
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  const json& rows = j.at("world_to_camera");
  if (!rows.is_array() || rows.size() != 3)
    throw std::runtime_error("world_to_camera must be a 3x4 row-major matrix");
  for (int r = 0; r < 3; ++r) {
    const json& row = rows[r];
    if (!row.is_array() || row.size() != 4)
      throw std::runtime_error("world_to_camera must be a 3x4 row-major matrix");
    for (int col = 0; col < 3; ++col) c.rotation(r, col) = row[col].get<double>();
    c.translation[r] = row[3].get<double>();
  }
  c.validate();
  return c;
}

}  // namespace

int DatasetManifest::count_split(const std::string& split) const {
  int n = 0;
  for (const auto& v : views)
    if (v.split == split) ++n;
  return n;
}

DatasetManifest load_dataset(const std::string& dir) {
  const fs::path json_path = fs::path(dir) / "cameras.json";
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("load_dataset: missing " + json_path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("load_dataset: parse error in " + json_path.string() + " at line " +
                             std::to_string(line_of_byte(text, e.byte)) + ": " + e.what());
  }

  DatasetManifest manifest;
  manifest.dir = dir;
  try {
    if (root.value("format", "") != kFormatTag)
      throw std::runtime_error("unknown dataset format tag (expected sgs-dataset-v1)");
    if (root.contains("bounds")) {
      const json& b = root.at("bounds");
      for (int i = 0; i < 3; ++i) {
        manifest.bounds_min[i] = b.at("min").at(i).get<double>();
        manifest.bounds_max[i] = b.at("max").at(i).get<double>();
      }
      manifest.has_bounds = true;
    }
    for (const json& v : root.at("views")) {
      DatasetView view;
      view.image_path = v.at("image").get<std::string>();
      view.split = v.at("split").get<std::string>();
      if (view.split != "train" && view.split != "test")
        throw std::runtime_error("view split must be \"train\" or \"test\"");
      view.camera = camera_from_json(v);
      manifest.views.push_back(view);
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("load_dataset: malformed " + json_path.string() + ": " + e.what());
  }

  // Validate the image files in one pass so the error lists everything.
  std::string missing, mismatched;
  for (const DatasetView& view : manifest.views) {
    const std::string path = manifest.image_full_path(view);
    if (!fs::exists(path)) {
      missing += "\n  " + path;
      continue;
    }
    const Image img = import_image(path);
    if (img.height() != view.camera.height || img.width() != view.camera.width)
      mismatched += "\n  " + path;
  }
  if (!missing.empty())
    throw std::runtime_error("load_dataset: missing image files:" + missing);
  if (!mismatched.empty())
    throw std::runtime_error("load_dataset: image/camera size mismatch:" + mismatched);
  return manifest;
}

void save_dataset_manifest(const std::string& dir, const DatasetManifest& manifest) {
  fs::create_directories(dir);
  json root;
  root["format"] = kFormatTag;
  if (manifest.has_bounds) {
    root["bounds"]["min"] = {manifest.bounds_min[0], manifest.bounds_min[1],
                             manifest.bounds_min[2]};
    root["bounds"]["max"] = {manifest.bounds_max[0], manifest.bounds_max[1],
                             manifest.bounds_max[2]};
  }
  root["views"] = json::array();
  for (const DatasetView& view : manifest.views) {
    json v = camera_to_json(view.camera);
    v["image"] = view.image_path;
    v["split"] = view.split;
    root["views"].push_back(v);
  }
  const fs::path json_path = fs::path(dir) / "cameras.json";
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("save_dataset_manifest: cannot open " + json_path.string());
  out << root.dump(2) << "\n";
}

std::vector<TrainView> load_views(const DatasetManifest& manifest, const std::string& split) {
  std::vector<TrainView> views;
  for (const DatasetView& view : manifest.views) {
    if (view.split != split) continue;
    TrainView tv;
    tv.camera = view.camera;
    Image img = import_image(manifest.image_full_path(view));
    if (img.channels() == 1) {
      Image rgb(img.height(), img.width(), 3);
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
          for (int c = 0; c < 3; ++c) rgb(y, x, c) = img(y, x);
      img = std::move(rgb);
    }
    tv.image = std::move(img);
    views.push_back(std::move(tv));
  }
  return views;
}

}  // namespace sgs
