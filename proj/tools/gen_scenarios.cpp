// Writes the shipped scenarios: scene JSON, ground-truth TUM trajectories and
// experiment configs.
//
//   gen_scenarios <output-folder>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "cradmap/eval.hpp"
#include "cradmap/simworld.hpp"

namespace {

using namespace cradmap;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kPi = std::numbers::pi;

sim::Box box(const std::string& name, Point3 center, Point3 extents, sim::SurfaceLabel label,
             bool metallic = false) {
  sim::Box b;
  b.name = name;
  b.pose = SE3Pose::FromTranslation(center);
  b.extents = extents;
  b.label = label;
  b.metallic = metallic;
  return b;
}

// Closed room with 10 cm walls, floor and ceiling around the interior
// [-sx/2, sx/2] x [-sy/2, sy/2] x [0, h].
std::vector<sim::Box> shell(double sx, double sy, double h) {
  using sim::SurfaceLabel;
  const double t = 0.1;
  return {
      box("floor", {0, 0, -t / 2}, {sx + 2 * t, sy + 2 * t, t}, SurfaceLabel::kFloor),
      box("ceiling", {0, 0, h + t / 2}, {sx + 2 * t, sy + 2 * t, t}, SurfaceLabel::kWall),
      box("wall_east", {sx / 2 + t / 2, 0, h / 2}, {t, sy + 2 * t, h}, SurfaceLabel::kWall),
      box("wall_west", {-sx / 2 - t / 2, 0, h / 2}, {t, sy + 2 * t, h}, SurfaceLabel::kWall),
      box("wall_north", {0, sy / 2 + t / 2, h / 2}, {sx, t, h}, SurfaceLabel::kWall),
      box("wall_south", {0, -sy / 2 - t / 2, h / 2}, {sx, t, h}, SurfaceLabel::kWall),
  };
}

// Camera looking horizontally along heading `yaw` (z forward, y down).
SE3Pose camera_pose(const Point3& position, double yaw) {
  Matrix3 r;
  r.col(0) = Point3(std::sin(yaw), -std::cos(yaw), 0.0);
  r.col(1) = Point3(0.0, 0.0, -1.0);
  r.col(2) = Point3(std::cos(yaw), std::sin(yaw), 0.0);
  return SE3Pose(Eigen::Quaterniond(r), position);
}

// Points on a circle, camera facing away from the center.
std::vector<eval::TrajectorySample> outward_arc(const Point3& center, double radius,
                                                double start, double sweep, int frames,
                                                double rate_hz, double height) {
  std::vector<eval::TrajectorySample> out;
  for (int i = 0; i < frames; ++i) {
    const double a = start + sweep * i / frames;
    const Point3 p = center + Point3(radius * std::cos(a), radius * std::sin(a), 0.0);
    out.push_back({i / rate_hz, camera_pose({p.x(), p.y(), height}, a)});
  }
  return out;
}

std::vector<eval::TrajectorySample> strafe(const Point3& from, const Point3& to, double yaw,
                                           int frames, double rate_hz) {
  std::vector<eval::TrajectorySample> out;
  for (int i = 0; i < frames; ++i) {
    const double s = frames > 1 ? static_cast<double>(i) / (frames - 1) : 0.0;
    out.push_back({i / rate_hz, camera_pose(from + s * (to - from), yaw)});
  }
  return out;
}

json small_camera() {
  return {{"fx", 262.5}, {"fy", 262.5}, {"cx", 159.5}, {"cy", 119.5}, {"width", 320},
          {"height", 240}};
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  out << doc.dump(2) << '\n';
}

void write_scenario(const fs::path& dir, const std::string& name, const sim::Scene& scene,
                    double landmark_density, std::uint64_t landmark_seed,
                    const std::vector<std::vector<eval::TrajectorySample>>& trajectories,
                    json config) {
  sim::save_scene(scene, landmark_density, landmark_seed, dir / (name + ".scene.json"));
  json robots = json::array();
  for (std::size_t r = 0; r < trajectories.size(); ++r) {
    const std::string file = name + "_r" + std::to_string(r) + ".tum";
    eval::save_tum(dir / file, trajectories[r]);
    json robot = config.contains("robot_defaults") ? config["robot_defaults"] : json::object();
    robot["id"] = r;
    robot["trajectory"] = file;
    robots.push_back(robot);
  }
  config.erase("robot_defaults");
  config["name"] = name;
  config["scene"] = name + ".scene.json";
  config["robots"] = robots;
  write_json(dir / (name + ".json"), config);
  std::printf("wrote %s\n", (dir / (name + ".json")).string().c_str());
}

sim::Scene room_scene() {
  using sim::SurfaceLabel;
  auto boxes = shell(6.0, 5.0, 3.0);
  boxes.push_back(box("desk", {2.0, 1.6, 0.375}, {1.6, 0.8, 0.75}, SurfaceLabel::kFurniture));
  boxes.push_back(box("shelf", {-2.6, -1.5, 0.9}, {0.6, 1.2, 1.8}, SurfaceLabel::kFurniture));
  boxes.push_back(box("cabinet", {1.8, -2.1, 0.5}, {0.8, 0.6, 1.0}, SurfaceLabel::kFurniture));
  boxes.push_back(box("table", {-1.2, 1.4, 0.4}, {1.0, 1.0, 0.8}, SurfaceLabel::kFurniture));
  return sim::Scene("room", boxes, 4.0, 11);
}

json base_config() {
  return {{"seed", 1},
          {"threads", 0},
          {"voxel_size", 0.05},
          {"camera", small_camera()},
          {"sensor",
           {{"max_range", 8.0},
            {"pixel_noise", 0.5},
            {"feature_depth_sigma", 0.005},
            {"depth_relative_sigma", 0.003},
            {"depth_outlier_fraction", 0.001}}},
          {"network", {{"profile", "5g"}}},
          {"frontend", {{"dense_stride", 4}}},
          {"robot_defaults", {{"sigma_rot", 0.003}, {"sigma_trans", 0.01}}}};
}

void room(const fs::path& dir) {
  json cfg = base_config();
  cfg["radar"] = {{"enabled", true}};
  write_scenario(dir, "room", room_scene(), 4.0, 11,
                 {outward_arc({0, 0, 0}, 0.8, 0.0, 2 * kPi, 48, 15.0, 1.2)}, cfg);
}

void loop100(const fs::path& dir) {
  using sim::SurfaceLabel;
  auto boxes = shell(14.0, 14.0, 3.0);
  boxes.push_back(box("crate_ne", {5.5, 5.5, 0.5}, {1.0, 1.0, 1.0}, SurfaceLabel::kFurniture));
  boxes.push_back(box("crate_sw", {-5.5, -5.5, 0.6}, {1.2, 1.2, 1.2}, SurfaceLabel::kFurniture));
  boxes.push_back(box("bench_nw", {-5.0, 6.3, 0.45}, {2.0, 0.6, 0.9}, SurfaceLabel::kFurniture));
  const sim::Scene scene("loop100", boxes, 6.0, 5);
  json cfg = base_config();
  cfg["frontend"] = {{"dense_stride", 4}, {"landmark_window", 3}};
  cfg["sensor"]["pixel_noise"] = 1.0;
  cfg["sensor"]["feature_depth_sigma"] = 0.01;
  cfg["robot_defaults"] = {{"sigma_rot", 0.005}, {"sigma_trans", 0.02}};
  write_scenario(dir, "loop100", scene, 6.0, 5,
                 {outward_arc({0, 0, 0}, 4.5, 0.0, 2 * kPi, 100, 15.0, 1.2)}, cfg);
}

void fig4_pipe(const fs::path& dir) {
  using sim::SurfaceLabel;
  auto boxes = shell(5.0, 4.0, 3.0);
  boxes.push_back(box("cabinet", {1.25, 0.0, 0.8}, {0.5, 1.6, 1.6}, SurfaceLabel::kFurniture));
  boxes.push_back(box("vent_pipe", {1.9, 0.0, 1.1}, {0.15, 1.6, 0.15},
                      SurfaceLabel::kMetallicObject, true));
  const sim::Scene scene("fig4_pipe", boxes, 4.0, 4);
  json cfg = base_config();
  cfg["radar"] = {{"enabled", true}};
  write_scenario(dir, "fig4_pipe", scene, 4.0, 4,
                 {strafe({0.0, -0.2, 1.0}, {0.0, 0.2, 1.0}, 0.0, 10, 15.0)}, cfg);
}

void fig5_studs(const fs::path& dir) {
  using sim::SurfaceLabel;
  auto boxes = shell(5.0, 4.0, 3.0);
  boxes.push_back(box("drywall", {1.015, 0.0, 1.5}, {0.03, 4.0, 3.0}, SurfaceLabel::kWall));
  for (const double y : {-0.4, 0.0, 0.4}) {
    boxes.push_back(box("stud_" + std::to_string(static_cast<int>(std::lround(y * 10))),
                        {1.075, y, 1.2}, {0.09, 0.04, 2.4}, SurfaceLabel::kMetallicObject, true));
  }
  const sim::Scene scene("fig5_studs", boxes, 4.0, 5);
  json cfg = base_config();
  cfg["radar"] = {{"enabled", true}};
  write_scenario(dir, "fig5_studs", scene, 4.0, 5,
                 {strafe({0.0, -0.1, 1.2}, {0.0, 0.1, 1.2}, 0.0, 8, 15.0)}, cfg);
}

void multi4(const fs::path& dir) {
  json cfg = base_config();
  cfg["frontend"] = {{"dense_stride", 4}, {"min_translation", 0.0}, {"rgb_ratio", 1.0},
                     {"depth_ratio", 1.0}};
  cfg["robot_defaults"] = {{"sigma_rot", 0.002}, {"sigma_trans", 0.005}};
  cfg["backend"] = {{"anchor_every_robot", true}};
  std::vector<std::vector<eval::TrajectorySample>> trajectories;
  const Point3 centers[4] = {{1.0, 0.8, 0}, {-1.0, 0.8, 0}, {-1.0, -0.8, 0}, {1.0, -0.8, 0}};
  for (int r = 0; r < 4; ++r) {
    trajectories.push_back(outward_arc(centers[r], 0.3, r * kPi / 2, kPi, 40, 15.0, 1.2));
  }
  write_scenario(dir, "multi4", room_scene(), 4.0, 11, trajectories, cfg);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2 || argv[1][0] == '-') {
    std::fprintf(stderr, "usage: gen_scenarios <output-folder>\n");
    return 2;
  }
  const fs::path dir = argv[1];
  fs::create_directories(dir);
  room(dir);
  loop100(dir);
  fig4_pipe(dir);
  fig5_studs(dir);
  multi4(dir);
  return 0;
}
