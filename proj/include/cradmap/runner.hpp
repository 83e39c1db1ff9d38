#ifndef CRADMAP_RUNNER_HPP
#define CRADMAP_RUNNER_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cradmap/backend.hpp"
#include "cradmap/frontend.hpp"
#include "cradmap/netsim.hpp"
#include "cradmap/radar.hpp"
#include "cradmap/simworld.hpp"
#include "cradmap/volmap.hpp"

namespace cradmap::runner {

struct RobotConfig {
  int id = 0;
  std::filesystem::path trajectory;  // TUM file of ground-truth camera poses
  double sigma_rot = 0.0;            // odometry noise per frame, radians
  double sigma_trans = 0.0;          // odometry noise per frame, meters
};

struct SensorConfig {
  double max_range = 8.0;
  double pixel_noise = 0.0;          // feature pixel sigma
  double feature_depth_sigma = 0.0;  // relative
  sim::DepthNoise depth;
};

struct StreamConfig {
  double rgb_fps = 15.0;
  double rgb_bytes = 700000.0;
  double depth_fps = 10.0;
  double depth_bytes = 350000.0;
};

struct NetworkConfig {
  net::NetworkProfile profile = net::five_g_band78_profile();
  StreamConfig stream;
  // Megabits per map update; the mean keyframe payload when unset.
  std::optional<double> data_per_update_mb;
};

struct RadarConfig {
  bool enabled = false;
  radar::BtvConfig btv;
  sim::RadarSimConfig sim;
};

// Experiment description, normally read from a JSON file by load_config.
struct ExperimentConfig {
  std::string name;
  std::filesystem::path scene;
  std::vector<RobotConfig> robots;
  CameraIntrinsics camera;
  SensorConfig sensor;
  NetworkConfig network;
  frontend::FrontendConfig frontend;
  backend::BackendConfig backend;
  RadarConfig radar;
  double voxel_size = 0.05;
  std::filesystem::path output_dir;  // nothing is written when empty
  std::uint64_t seed = 0;
  int threads = 0;  // frontend workers; 0 = one per robot, 1 = single-threaded

  void validate() const;
};

// Reads the JSON config. Relative input paths resolve against the file's
// folder.
ExperimentConfig load_config(const std::filesystem::path& path);

struct RobotReport {
  int robot_id = 0;
  int frames = 0;
  int keyframes = 0;
  double ate_frontend = 0.0;
  double rmse_frontend = 0.0;
  double ate_refined = 0.0;
  double rmse_refined = 0.0;
  double achieved_update_hz = 0.0;
};

struct ExperimentReport {
  std::string scene;
  std::uint64_t seed = 0;
  double coverage_dense = 0.0;
  double coverage_sparse = 0.0;
  double density_dense = 0.0;
  double density_sparse = 0.0;
  double predicted_update_hz = 0.0;
  double data_per_update_mb = 0.0;
  int loops_accepted = 0;
  int optimizations = 0;
  bool radar_triggered = false;
  std::size_t radar_points = 0;
  std::vector<RobotReport> robots;
  std::vector<std::filesystem::path> outputs;

  // In-memory products for callers that inspect them directly.
  sim::Scene world;
  volmap::Bounds explored;
  std::vector<Keyframe> keyframes;  // in backend integration order
  std::map<KeyframeKey, SE3Pose> refined_poses;
  std::map<KeyframeKey, SE3Pose> ground_truth_poses;
  std::vector<net::TransmissionEvent> events;
  std::optional<radar::RadarMap> radar_map;
};

// Runs simworld, frontends, uplink, backend, mapping, radar and evaluation.
// Failures surface as StageError tagged with the stage name.
ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace cradmap::runner

#endif  // CRADMAP_RUNNER_HPP
