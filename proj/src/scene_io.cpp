// Scene description files: JSON with a list of labelled boxes.
//
//   {
//     "name": "room",
//     "landmark_density": 2.0,        // landmarks per square meter of surface
//     "landmark_seed": 1,
//     "boxes": [
//       {"name": "north_wall", "center": [0, 7, 1.5], "extents": [14, 0.1, 3],
//        "label": "wall", "metallic": false}
//     ]
//   }

#include <fstream>

#include <json.hpp>

#include "cradmap/error.hpp"
#include "cradmap/simworld.hpp"

namespace cradmap::sim {

namespace {

using nlohmann::json;

Eigen::Vector3d read_vec3(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 3) {
    throw Error(ErrorCode::kParse, where + ": '" + key + "' must be a 3-element array");
  }
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) v[i] = j.at(key).at(i).get<double>();
  return v;
}

}  // namespace

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open scene file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }

  try {
    const std::string name = doc.value("name", path.stem().string());
    const double density = doc.value("landmark_density", 0.0);
    const auto seed = doc.value("landmark_seed", std::uint64_t{0});
    if (!doc.contains("boxes") || !doc.at("boxes").is_array() ||
        doc.at("boxes").empty()) {
      throw Error(ErrorCode::kParse, path.string() + ": scene needs at least one box");
    }
    std::vector<Box> boxes;
    int index = 0;
    for (const json& jb : doc.at("boxes")) {
      const std::string where = path.string() + " box " + std::to_string(index++);
      Box box;
      box.name = jb.value("name", "box" + std::to_string(index - 1));
      box.pose = SE3Pose::FromTranslation(read_vec3(jb, "center", where));
      box.extents = read_vec3(jb, "extents", where);
      box.label = parse_surface_label(jb.value("label", std::string("wall")));
      box.metallic = jb.value("metallic", box.label == SurfaceLabel::kMetallicObject);
      boxes.push_back(std::move(box));
    }
    return Scene(name, std::move(boxes), density, seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

void save_scene(const Scene& scene, double landmark_density,
                std::uint64_t landmark_seed, const std::filesystem::path& path) {
  json doc;
  doc["name"] = scene.name();
  doc["landmark_density"] = landmark_density;
  doc["landmark_seed"] = landmark_seed;
  doc["boxes"] = json::array();
  for (const Box& box : scene.boxes()) {
    const Eigen::Vector3d c = box.pose.translation();
    doc["boxes"].push_back({{"name", box.name},
                            {"center", {c.x(), c.y(), c.z()}},
                            {"extents", {box.extents.x(), box.extents.y(), box.extents.z()}},
                            {"label", std::string(to_string(box.label))},
                            {"metallic", box.metallic}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write scene file " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace cradmap::sim
