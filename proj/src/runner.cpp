// Experiment config (JSON). Every key except "scene" and "robots" is
// optional. Scene and trajectory paths resolve against the config file's
// folder; output_dir is taken relative to the working directory.
//
//   {
//     "name": "room",
//     "scene": "room.scene.json",
//     "seed": 1,
//     "threads": 0,
//     "output_dir": "out/room",
//     "voxel_size": 0.05,
//     "camera": {"fx": 525, "fy": 525, "cx": 319.5, "cy": 239.5,
//                "width": 640, "height": 480},
//     "sensor": {"max_range": 8, "pixel_noise": 0.5, "feature_depth_sigma": 0.0,
//                "depth_relative_sigma": 0.0, "depth_outlier_fraction": 0.0},
//     "robots": [{"id": 0, "trajectory": "room_r0.tum",
//                 "sigma_rot": 0.002, "sigma_trans": 0.01}],
//     "network": {"profile": "5g", "capacity_mbps": 110, "base_latency_ms": 24,
//                 "jitter_ms": 4, "data_per_update_mb": 10.58,
//                 "rgb_fps": 15, "rgb_bytes": 700000,
//                 "depth_fps": 10, "depth_bytes": 350000},
//     "frontend": {"min_translation": 0.25, "min_rotation": 0.26,
//                  "min_tracked_fraction": 0.5, "dense_stride": 8,
//                  "outlier_k": 20, "outlier_lambda": 2.0, "landmark_window": 5,
//                  "rgb_ratio": 0.5, "depth_ratio": 0.35},
//     "backend": {"odometry_variance": 1e-4, "loop_variance": 1e-5,
//                 "min_shared": 15, "exclusion_window": 10, "optimize_every": 10,
//                 "max_loop_rms_px": 3.0, "max_loop_attempts": 3,
//                 "anchor_every_robot": false},
//     "radar": {"enabled": true, "near_threshold": 1.5, "near_fraction": 0.5,
//               "snr_threshold": 15, "outlier_k": 20, "outlier_lambda": 2.0,
//               "azimuth_fov_deg": 60, "elevation_fov_deg": 30,
//               "resolution_deg": 1.4, "max_range": 10, "range_noise": 0.0}
//   }

#include "cradmap/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numbers>
#include <thread>

#include <json.hpp>

#include "cradmap/error.hpp"
#include "cradmap/eval.hpp"
#include "cradmap/random.hpp"

namespace cradmap::runner {

namespace {

using nlohmann::json;

constexpr double kDegree = std::numbers::pi / 180.0;

template <class F>
auto in_stage(const char* stage, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

struct RobotRun {
  int frames = 0;
  std::vector<Keyframe> keyframes;
  std::map<KeyframeKey, SE3Pose> ground_truth;
  std::map<KeyframeKey, RadarScan> scans;
};

RobotRun run_robot(const ExperimentConfig& cfg, const sim::Scene& scene,
                   const sim::Trajectory& trajectory, int robot_id) {
  frontend::FrontendConfig fc = cfg.frontend;
  fc.camera = cfg.camera;
  frontend::Frontend fe(robot_id, fc, trajectory.poses.front().pose);
  const auto rid = static_cast<std::uint64_t>(robot_id);
  const std::vector<SE3Pose> odometry =
      sim::noisy_odometry(trajectory, derive_seed(cfg.seed, {1, rid}));

  RobotRun run;
  for (std::size_t i = 0; i < trajectory.poses.size(); ++i) {
    const SE3Pose& truth = trajectory.poses[i].pose;
    frontend::Frame frame;
    frame.timestamp = trajectory.poses[i].timestamp;
    frame.observations = sim::observe_features(scene, truth, cfg.camera,
                                               cfg.sensor.pixel_noise,
                                               derive_seed(cfg.seed, {2, rid, i}));
    if (cfg.sensor.feature_depth_sigma > 0.0) {
      sim::perturb_feature_depths(frame.observations, cfg.sensor.feature_depth_sigma,
                                  derive_seed(cfg.seed, {3, rid, i}));
    }
    if (i > 0) frame.odometry = odometry[i - 1];
    std::optional<sim::DepthImage> rendered;
    frame.depth = [&] {
      sim::DepthImage d = sim::render_depth(scene, truth, cfg.camera, cfg.sensor.max_range);
      sim::apply_depth_noise(d, cfg.sensor.depth, derive_seed(cfg.seed, {4, rid, i}));
      rendered = d;
      return d;
    };
    std::optional<Keyframe> kf = fe.process(frame);
    ++run.frames;
    if (!kf) continue;
    const KeyframeKey key = kf->key();
    run.ground_truth[key] = truth;
    if (cfg.radar.enabled && rendered &&
        radar::occlusion_trigger(*rendered, cfg.radar.btv.near_threshold,
                                 cfg.radar.btv.near_fraction)) {
      sim::RadarSimConfig rs = cfg.radar.sim;
      rs.rng_seed = derive_seed(cfg.seed, {5, rid, i});
      RadarScan scan = sim::simulate_radar(scene, truth * cfg.radar.btv.mount, rs);
      scan.timestamp = frame.timestamp;
      scan.robot_id = key.robot_id;
      scan.keyframe_id = key.keyframe_id;
      run.scans.emplace(key, std::move(scan));
    }
    run.keyframes.push_back(std::move(*kf));
  }
  return run;
}

std::vector<RobotRun> run_frontends(const ExperimentConfig& cfg, const sim::Scene& scene,
                                    const std::vector<sim::Trajectory>& trajectories) {
  const std::size_t n = cfg.robots.size();
  std::vector<RobotRun> runs(n);
  std::vector<std::exception_ptr> errors(n);
  const auto work = [&](std::size_t r) {
    try {
      runs[r] = run_robot(cfg, scene, trajectories[r], cfg.robots[r].id);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };
  const std::size_t workers =
      cfg.threads == 0 ? n : std::min<std::size_t>(n, static_cast<std::size_t>(cfg.threads));
  if (workers <= 1) {
    for (std::size_t r = 0; r < n; ++r) work(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < n; r = next++) work(r);
      });
    }
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return runs;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

std::pair<double, double> translation_errors(const std::vector<Keyframe>& keyframes,
                                             const std::map<KeyframeKey, SE3Pose>& poses,
                                             const std::map<KeyframeKey, SE3Pose>& truth) {
  if (keyframes.empty()) return {0.0, 0.0};
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const Keyframe& kf : keyframes) {
    const double e = translation_distance(poses.at(kf.key()), truth.at(kf.key()));
    sum += e;
    sum_sq += e * e;
  }
  const double n = static_cast<double>(keyframes.size());
  return {sum / n, std::max(std::sqrt(sum_sq / n), sum / n)};
}

std::vector<eval::TrajectorySample> samples(const std::vector<Keyframe>& keyframes,
                                            const std::map<KeyframeKey, SE3Pose>& poses) {
  std::vector<eval::TrajectorySample> out;
  for (const Keyframe& kf : keyframes) out.push_back({kf.timestamp, poses.at(kf.key())});
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (robots.empty()) throw Error(ErrorCode::kInvalidArgument, "config needs at least one robot");
  std::set<int> ids;
  for (const RobotConfig& r : robots) {
    if (r.id < 0 || !ids.insert(r.id).second) {
      throw Error(ErrorCode::kInvalidArgument,
                  "robot ids must be unique and nonnegative (got " + std::to_string(r.id) + ")");
    }
    if (r.sigma_rot < 0.0 || r.sigma_trans < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "odometry sigmas must be nonnegative");
    }
    if (!std::filesystem::exists(r.trajectory)) {
      throw Error(ErrorCode::kIo, "trajectory file not found: " + r.trajectory.string());
    }
  }
  if (!std::filesystem::exists(scene)) {
    throw Error(ErrorCode::kIo, "scene file not found: " + scene.string());
  }
  if (!(voxel_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "voxel_size must be positive");
  if (threads < 0) throw Error(ErrorCode::kInvalidArgument, "threads must be >= 0");
  camera.validate();
  network.profile.validate();
  if (network.data_per_update_mb && !(*network.data_per_update_mb > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "data_per_update_mb must be positive");
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  const std::filesystem::path base = path.parent_path();
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };

  ExperimentConfig cfg;
  try {
    cfg.name = doc.value("name", path.stem().string());
    if (!doc.contains("scene")) throw Error(ErrorCode::kParse, path.string() + ": missing 'scene'");
    cfg.scene = resolve(doc.at("scene").get<std::string>());
    read(doc, "seed", cfg.seed);
    read(doc, "threads", cfg.threads);
    read(doc, "voxel_size", cfg.voxel_size);
    if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();

    if (doc.contains("camera")) {
      const json& c = doc.at("camera");
      read(c, "fx", cfg.camera.fx);
      read(c, "fy", cfg.camera.fy);
      read(c, "cx", cfg.camera.cx);
      read(c, "cy", cfg.camera.cy);
      read(c, "width", cfg.camera.width);
      read(c, "height", cfg.camera.height);
    }
    if (doc.contains("sensor")) {
      const json& s = doc.at("sensor");
      read(s, "max_range", cfg.sensor.max_range);
      read(s, "pixel_noise", cfg.sensor.pixel_noise);
      read(s, "feature_depth_sigma", cfg.sensor.feature_depth_sigma);
      read(s, "depth_relative_sigma", cfg.sensor.depth.relative_sigma);
      read(s, "depth_outlier_fraction", cfg.sensor.depth.outlier_fraction);
    }
    cfg.sensor.depth.max_range = cfg.sensor.max_range;

    if (!doc.contains("robots") || !doc.at("robots").is_array()) {
      throw Error(ErrorCode::kParse, path.string() + ": missing 'robots' list");
    }
    for (const json& r : doc.at("robots")) {
      RobotConfig rc;
      rc.id = r.value("id", static_cast<int>(cfg.robots.size()));
      rc.trajectory = resolve(r.at("trajectory").get<std::string>());
      read(r, "sigma_rot", rc.sigma_rot);
      read(r, "sigma_trans", rc.sigma_trans);
      cfg.robots.push_back(rc);
    }

    if (doc.contains("network")) {
      const json& n = doc.at("network");
      if (n.contains("profile")) cfg.network.profile = net::profile_by_name(n.at("profile").get<std::string>());
      read(n, "capacity_mbps", cfg.network.profile.capacity_mbps);
      read(n, "base_latency_ms", cfg.network.profile.base_latency_ms);
      read(n, "jitter_ms", cfg.network.profile.jitter_ms);
      if (n.contains("data_per_update_mb")) {
        cfg.network.data_per_update_mb = n.at("data_per_update_mb").get<double>();
      }
      read(n, "rgb_fps", cfg.network.stream.rgb_fps);
      read(n, "rgb_bytes", cfg.network.stream.rgb_bytes);
      read(n, "depth_fps", cfg.network.stream.depth_fps);
      read(n, "depth_bytes", cfg.network.stream.depth_bytes);
    }

    if (doc.contains("frontend")) {
      const json& f = doc.at("frontend");
      read(f, "min_translation", cfg.frontend.policy.min_translation);
      read(f, "min_rotation", cfg.frontend.policy.min_rotation);
      read(f, "min_tracked_fraction", cfg.frontend.policy.min_tracked_fraction);
      read(f, "dense_stride", cfg.frontend.dense_stride);
      read(f, "outlier_k", cfg.frontend.outlier_k);
      read(f, "outlier_lambda", cfg.frontend.outlier_lambda);
      read(f, "landmark_window", cfg.frontend.landmark_window);
      read(f, "rgb_ratio", cfg.frontend.codec.rgb_ratio);
      read(f, "depth_ratio", cfg.frontend.codec.depth_ratio);
    }

    if (doc.contains("backend")) {
      const json& b = doc.at("backend");
      if (b.contains("odometry_variance")) {
        cfg.backend.odometry_covariance = b.at("odometry_variance").get<double>() * Matrix6::Identity();
      }
      if (b.contains("loop_variance")) {
        cfg.backend.loop_covariance = b.at("loop_variance").get<double>() * Matrix6::Identity();
      }
      read(b, "min_shared", cfg.backend.min_shared);
      read(b, "exclusion_window", cfg.backend.exclusion_window);
      read(b, "optimize_every", cfg.backend.optimize_every);
      read(b, "max_loop_rms_px", cfg.backend.max_loop_rms_px);
      read(b, "max_loop_attempts", cfg.backend.max_loop_attempts);
      read(b, "anchor_every_robot", cfg.backend.anchor_every_robot);
    }

    if (doc.contains("radar")) {
      const json& r = doc.at("radar");
      cfg.radar.enabled = r.value("enabled", true);
      read(r, "near_threshold", cfg.radar.btv.near_threshold);
      read(r, "near_fraction", cfg.radar.btv.near_fraction);
      read(r, "snr_threshold", cfg.radar.btv.snr_threshold);
      read(r, "outlier_k", cfg.radar.btv.outlier_k);
      read(r, "outlier_lambda", cfg.radar.btv.outlier_lambda);
      if (r.contains("azimuth_fov_deg")) cfg.radar.sim.azimuth_fov = r.at("azimuth_fov_deg").get<double>() * kDegree;
      if (r.contains("elevation_fov_deg")) cfg.radar.sim.elevation_fov = r.at("elevation_fov_deg").get<double>() * kDegree;
      if (r.contains("resolution_deg")) cfg.radar.sim.angular_resolution = r.at("resolution_deg").get<double>() * kDegree;
      read(r, "max_range", cfg.radar.sim.max_range);
      read(r, "range_noise", cfg.radar.sim.range_noise_sigma);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return cfg;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  in_stage("config", [&] { config.validate(); });
  ExperimentReport report;
  report.seed = config.seed;

  std::vector<sim::Trajectory> trajectories;
  in_stage("simworld", [&] {
    report.world = sim::load_scene(config.scene);
    for (const RobotConfig& r : config.robots) {
      sim::Trajectory t;
      for (const auto& s : eval::load_tum(r.trajectory)) t.poses.push_back({s.timestamp, s.pose});
      t.sigma_rot = r.sigma_rot;
      t.sigma_trans = r.sigma_trans;
      if (t.poses.size() < 2) {
        throw Error(ErrorCode::kInvalidArgument,
                    r.trajectory.string() + ": trajectory needs at least 2 poses");
      }
      t.validate();
      trajectories.push_back(std::move(t));
    }
  });
  report.scene = config.name.empty() ? report.world.name() : config.name;

  std::vector<RobotRun> runs = in_stage("frontend", [&] {
    return run_frontends(config, report.world, trajectories);
  });

  std::map<KeyframeKey, Keyframe> by_key;
  std::map<KeyframeKey, RadarScan> scans;
  for (RobotRun& run : runs) {
    report.ground_truth_poses.insert(run.ground_truth.begin(), run.ground_truth.end());
    scans.insert(run.scans.begin(), run.scans.end());
    for (Keyframe& kf : run.keyframes) by_key.emplace(kf.key(), std::move(kf));
  }

  in_stage("netsim", [&] {
    net::Channel channel(config.network.profile, derive_seed(config.seed, {6}));
    double payload_bits = 0.0;
    for (const auto& [key, kf] : by_key) {
      channel.submit(kf);
      payload_bits += static_cast<double>(kf.payload_bits());
    }
    report.events = channel.run().events;
    report.data_per_update_mb = config.network.data_per_update_mb.value_or(
        by_key.empty() ? 1.0 : payload_bits / 1e6 / static_cast<double>(by_key.size()));
    const StreamConfig& s = config.network.stream;
    const double demand = net::per_robot_bandwidth(s.rgb_fps, s.rgb_bytes, s.depth_fps, s.depth_bytes);
    report.predicted_update_hz = net::map_update_frequency(
        net::effective_uplink_per_robot(config.network.profile,
                                        static_cast<int>(config.robots.size()), demand),
        report.data_per_update_mb);
  });

  backend::Backend server = in_stage("backend", [&] {
    backend::BackendConfig bc = config.backend;
    bc.camera = config.camera;
    backend::Backend b(bc);
    for (const net::TransmissionEvent& e : report.events) {
      const KeyframeKey key{e.robot_id, e.keyframe_id};
      const auto r = b.integrate_keyframe(by_key.at(key));
      report.loops_accepted += r.loops_accepted;
      report.keyframes.push_back(by_key.at(key));
    }
    b.optimize();
    report.optimizations = b.optimizations();
    for (const auto& [robot, list] : b.broadcast_poses()) {
      for (const auto& [id, pose] : list) report.refined_poses[{robot, id}] = pose;
    }
    return b;
  });

  std::map<int, std::vector<Keyframe>> per_robot;
  for (const Keyframe& kf : report.keyframes) per_robot[kf.robot_id].push_back(kf);
  for (auto& [robot, list] : per_robot) {
    std::sort(list.begin(), list.end(),
              [](const Keyframe& a, const Keyframe& b) { return a.keyframe_id < b.keyframe_id; });
  }

  std::map<int, volmap::GlobalMap> maps;
  std::string metrics_csv;
  in_stage("volmap", [&] {
    std::vector<SE3Pose> truth;
    for (const auto& [key, pose] : report.ground_truth_poses) truth.push_back(pose);
    report.explored = volmap::explored_region(report.world, truth, config.camera,
                                              config.sensor.max_range, 16,
                                              0.52 * config.voxel_size);
    PointCloud dense;
    PointCloud sparse;
    for (const auto& [robot, list] : per_robot) {
      maps[robot] = volmap::assemble_map(list, report.refined_poses, config.voxel_size,
                                         report.explored.min);
      maps[robot].robot_id = robot;
      const auto& pts = maps[robot].cloud.points;
      dense.points.insert(dense.points.end(), pts.begin(), pts.end());
      const auto s = volmap::assemble_sparse_map(list, report.refined_poses, config.camera,
                                                 config.voxel_size, report.explored.min);
      sparse.points.insert(sparse.points.end(), s.cloud.points.begin(), s.cloud.points.end());
    }
    report.coverage_dense = volmap::coverage(dense, report.world, report.explored, config.voxel_size);
    report.coverage_sparse = volmap::coverage(sparse, report.world, report.explored, config.voxel_size);
    report.density_dense = volmap::density(dense, report.explored);
    report.density_sparse = volmap::density(sparse, report.explored);
    metrics_csv = "scene,pipeline,coverage_pct,density_pts_m3\n";
    metrics_csv += report.scene + ",dense," + fmt("%.6f", report.coverage_dense) + "," +
                   fmt("%.6f", report.density_dense) + "\n";
    metrics_csv += report.scene + ",sparse," + fmt("%.6f", report.coverage_sparse) + "," +
                   fmt("%.6f", report.density_sparse) + "\n";
  });

  in_stage("radar", [&] {
    if (!config.radar.enabled || scans.empty()) return;
    std::vector<radar::RadarMap> parts;
    for (const auto& [key, scan] : scans) {
      parts.push_back(radar::process_scan(scan, report.refined_poses.at(key), config.radar.btv));
    }
    report.radar_triggered = true;
    report.radar_map = radar::RadarMap::Merge(parts);
    report.radar_points = report.radar_map->size();
  });

  std::string trajectory_csv = "sequence,method,ate_m,rmse_m\n";
  in_stage("eval", [&] {
    const auto achieved = net::achieved_update_frequency(report.events);
    std::map<KeyframeKey, SE3Pose> frontend_poses;
    for (const Keyframe& kf : report.keyframes) frontend_poses[kf.key()] = kf.pose;
    for (std::size_t r = 0; r < config.robots.size(); ++r) {
      const int id = config.robots[r].id;
      RobotReport rr;
      rr.robot_id = id;
      rr.frames = runs[r].frames;
      const std::vector<Keyframe>& list = per_robot[id];
      rr.keyframes = static_cast<int>(list.size());
      std::tie(rr.ate_frontend, rr.rmse_frontend) =
          translation_errors(list, frontend_poses, report.ground_truth_poses);
      std::tie(rr.ate_refined, rr.rmse_refined) =
          translation_errors(list, report.refined_poses, report.ground_truth_poses);
      if (auto it = achieved.find(id); it != achieved.end()) rr.achieved_update_hz = it->second;
      const std::string seq = report.scene + "_r" + std::to_string(id);
      trajectory_csv += seq + ",frontend," + fmt("%.6f", rr.ate_frontend) + "," +
                        fmt("%.6f", rr.rmse_frontend) + "\n";
      trajectory_csv += seq + ",refined," + fmt("%.6f", rr.ate_refined) + "," +
                        fmt("%.6f", rr.rmse_refined) + "\n";
      report.robots.push_back(rr);
    }
  });

  if (config.output_dir.empty()) return report;

  in_stage("output", [&] {
    const std::filesystem::path& dir = config.output_dir;
    std::filesystem::create_directories(dir);
    const auto emit = [&](const std::string& name) {
      report.outputs.push_back(dir / name);
      return dir / name;
    };
    std::map<KeyframeKey, SE3Pose> frontend_poses;
    for (const Keyframe& kf : report.keyframes) frontend_poses[kf.key()] = kf.pose;
    for (const auto& [robot, map] : maps) {
      volmap::export_ply(map.cloud, emit("map_r" + std::to_string(robot) + ".ply"));
      const std::string stem = "traj_r" + std::to_string(robot);
      const auto& list = per_robot[robot];
      eval::save_tum(emit(stem + "_frontend.txt"), samples(list, frontend_poses));
      eval::save_tum(emit(stem + "_refined.txt"), samples(list, report.refined_poses));
    }
    for (std::size_t r = 0; r < config.robots.size(); ++r) {
      std::vector<eval::TrajectorySample> gt;
      for (const auto& p : trajectories[r].poses) gt.push_back({p.timestamp, p.pose});
      eval::save_tum(emit("traj_r" + std::to_string(config.robots[r].id) + "_gt.txt"), gt);
    }
    if (report.radar_map) volmap::export_ply(report.radar_map->cloud(), emit("radar_map.ply"));
    {
      std::ofstream out(emit("network_events.csv"), std::ios::binary);
      net::write_events_csv(out, report.events);
    }
    write_text(emit("metrics.csv"), metrics_csv);
    write_text(emit("trajectory_metrics.csv"), trajectory_csv);
    {
      std::ofstream out(emit("pose_graph.g2o"), std::ios::binary);
      backend::save_pose_graph(server.graph(), out);
    }

    json doc;
    doc["scene"] = report.scene;
    doc["seed"] = report.seed;
    doc["coverage_dense_pct"] = report.coverage_dense;
    doc["coverage_sparse_pct"] = report.coverage_sparse;
    doc["density_dense_pts_m3"] = report.density_dense;
    doc["density_sparse_pts_m3"] = report.density_sparse;
    doc["network_profile"] = config.network.profile.name;
    doc["data_per_update_mb"] = report.data_per_update_mb;
    doc["predicted_update_hz"] = report.predicted_update_hz;
    doc["loops_accepted"] = report.loops_accepted;
    doc["optimizations"] = report.optimizations;
    doc["radar_triggered"] = report.radar_triggered;
    doc["radar_points"] = report.radar_points;
    doc["robots"] = json::array();
    for (const RobotReport& rr : report.robots) {
      doc["robots"].push_back({{"robot_id", rr.robot_id},
                               {"frames", rr.frames},
                               {"keyframes", rr.keyframes},
                               {"ate_frontend_m", rr.ate_frontend},
                               {"rmse_frontend_m", rr.rmse_frontend},
                               {"ate_refined_m", rr.ate_refined},
                               {"rmse_refined_m", rr.rmse_refined},
                               {"achieved_update_hz", rr.achieved_update_hz}});
    }
    report.outputs.push_back(dir / "report.json");
    doc["outputs"] = json::array();
    for (const auto& p : report.outputs) doc["outputs"].push_back(p.filename().string());
    write_text(dir / "report.json", doc.dump(2) + "\n");
  });
  return report;
}

}  // namespace cradmap::runner
