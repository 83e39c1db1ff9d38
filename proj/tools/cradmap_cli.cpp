#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cradmap/error.hpp"
#include "cradmap/eval.hpp"
#include "cradmap/netsim.hpp"
#include "cradmap/radar.hpp"
#include "cradmap/runner.hpp"
#include "cradmap/simworld.hpp"
#include "cradmap/volmap.hpp"

namespace {

using namespace cradmap;

// Accepts "tx,ty,tz,qx,qy,qz,qw" (commas or spaces) or a file whose first
// non-comment line is a TUM record.
SE3Pose parse_pose(const std::string& text) {
  std::string line = text;
  if (std::ifstream file(text); file) {
    const auto samples = eval::load_tum(text);
    if (samples.empty()) throw Error(ErrorCode::kParse, text + ": no pose record");
    return samples.front().pose;
  }
  for (char& c : line) {
    if (c == ',') c = ' ';
  }
  std::istringstream s(line);
  double v[7];
  for (double& x : v) {
    if (!(s >> x)) {
      throw Error(ErrorCode::kParse, "pose must be 7 numbers tx,ty,tz,qx,qy,qz,qw or a TUM file");
    }
  }
  return SE3Pose(Eigen::Quaterniond(v[6], v[3], v[4], v[5]), Eigen::Vector3d(v[0], v[1], v[2]));
}

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed,
            const std::optional<int>& threads, bool single, const std::string& out) {
  runner::ExperimentConfig cfg;
  try {
    cfg = runner::load_config(config_path);
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = *threads;
  if (single) cfg.threads = 1;
  if (!out.empty()) cfg.output_dir = out;
  const runner::ExperimentReport r = runner::run_experiment(cfg);
  std::printf("scene %s seed %llu\n", r.scene.c_str(), static_cast<unsigned long long>(r.seed));
  std::printf("coverage dense %.2f%% sparse %.2f%%\n", r.coverage_dense, r.coverage_sparse);
  std::printf("density dense %.1f sparse %.1f pts/m3\n", r.density_dense, r.density_sparse);
  std::printf("loops %d optimizations %d\n", r.loops_accepted, r.optimizations);
  for (const auto& rr : r.robots) {
    std::printf("robot %d: %d frames, %d keyframes, ATE frontend %.4f m, refined %.4f m, "
                "updates %.2f Hz\n",
                rr.robot_id, rr.frames, rr.keyframes, rr.ate_frontend, rr.ate_refined,
                rr.achieved_update_hz);
  }
  std::printf("predicted update frequency %.2f Hz (D = %.3f Mb)\n", r.predicted_update_hz,
              r.data_per_update_mb);
  if (r.radar_triggered) std::printf("radar map %zu points\n", r.radar_points);
  if (!cfg.output_dir.empty()) std::printf("outputs in %s\n", cfg.output_dir.string().c_str());
  return 0;
}

int cmd_metrics(const std::string& ply, const std::string& scene_path, double voxel,
                const std::vector<double>& region) {
  const PointCloud cloud = volmap::import_ply(ply);
  const sim::Scene scene = sim::load_scene(scene_path);
  volmap::Bounds bounds;
  if (region.size() == 6) {
    bounds = {Point3(region[0], region[1], region[2]), Point3(region[3], region[4], region[5])};
  } else {
    const auto [lo, hi] = scene.bounds();
    bounds = {lo - Point3::Constant(0.52 * voxel), hi + Point3::Constant(0.52 * voxel)};
  }
  std::printf("coverage_pct %.6f\n", volmap::coverage(cloud, scene, bounds, voxel));
  std::printf("density_pts_m3 %.6f\n", volmap::density(cloud, bounds));
  return 0;
}

int cmd_ate(const std::string& est_path, const std::string& gt_path, bool no_align, double max_dt) {
  const auto est = eval::load_tum(est_path);
  const auto gt = eval::load_tum(gt_path);
  const eval::AteResult r = eval::ate_rmse(est, gt, !no_align, max_dt);
  std::printf("%.6f %.6f\n", r.ate_mean, r.rmse);
  return 0;
}

int cmd_netcalc(const std::string& profile_name, int robots, double data_per_update,
                const runner::StreamConfig& s) {
  const net::NetworkProfile profile = net::profile_by_name(profile_name);
  const double b_r = net::per_robot_bandwidth(s.rgb_fps, s.rgb_bytes, s.depth_fps, s.depth_bytes);
  const std::vector<double> demand(static_cast<std::size_t>(robots), b_r);
  const net::BandwidthTotal total = net::total_bandwidth(demand, profile.capacity_mbps);
  const double effective = net::effective_uplink_per_robot(profile, robots, b_r);
  std::printf("profile %s: capacity %.2f Mb/s, latency %.0f +/- %.0f ms\n", profile.name.c_str(),
              profile.capacity_mbps, profile.base_latency_ms, profile.jitter_ms);
  std::printf("per-robot bandwidth %.2f Mb/s (%.2f MB/s)\n", b_r, b_r / 8.0);
  std::printf("total bandwidth %.2f Mb/s (%.2f MB/s) for %d robot(s): %s\n", total.total_mbps,
              total.total_mbps / 8.0, robots, total.feasible ? "fits" : "oversubscribed");
  std::printf("effective uplink per robot %.2f Mb/s\n", effective);
  std::printf("map update frequency %.2f Hz\n", net::map_update_frequency(effective, data_per_update));
  return 0;
}

int cmd_radar(const std::string& scan_path, const std::string& pose_text, double snr_th,
              bool radar_frame, int k, double lambda, const std::string& out) {
  const RadarScan scan = radar::load_radar_csv(scan_path);
  radar::BtvConfig cfg;
  cfg.snr_threshold = snr_th;
  cfg.outlier_k = k;
  cfg.outlier_lambda = lambda;
  if (radar_frame) cfg.mount = SE3Pose::Identity();
  const radar::RadarMap map = radar::process_scan(scan, parse_pose(pose_text), cfg);
  std::printf("%zu of %zu measurements kept\n", map.size(), scan.measurements.size());
  if (!out.empty()) {
    volmap::export_ply(map.cloud(), out);
    std::printf("wrote %s\n", out.c_str());
  } else {
    for (const Point3& p : map.cloud().points) std::printf("%.6f %.6f %.6f\n", p.x(), p.y(), p.z());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative RGB-D mapping simulator with radar see-through detection"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool single = false;
  auto* run = app.add_subcommand("run", "Run a full experiment from a JSON config");
  run->add_option("config", config_path, "Experiment config file")->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--threads", threads, "Frontend worker threads (0 = one per robot)");
  run->add_flag("--single-threaded", single, "Run every frontend on the calling thread");
  run->add_option("--out", out_dir, "Override the output directory");

  std::string ply, scene_path;
  double voxel = 0.05;
  std::vector<double> region;
  auto* metrics = app.add_subcommand("metrics", "Coverage and density of a PLY map against a scene");
  metrics->add_option("map", ply, "Map PLY file")->required();
  metrics->add_option("scene", scene_path, "Scene JSON file")->required();
  metrics->add_option("--voxel", voxel, "Voxel size in meters");
  metrics->add_option("--region", region, "minx miny minz maxx maxy maxz")->expected(6);

  std::string est_path, gt_path;
  bool no_align = false;
  double max_dt = 0.02;
  auto* ate = app.add_subcommand("ate", "Absolute trajectory error between TUM files");
  ate->add_option("est", est_path, "Estimated trajectory")->required();
  ate->add_option("gt", gt_path, "Ground-truth trajectory")->required();
  ate->add_flag("--no-align", no_align, "Skip rigid alignment");
  ate->add_option("--max-dt", max_dt, "Association tolerance in seconds");

  std::string profile = "5g";
  int robots = 1;
  double data_per_update = 10.58;
  runner::StreamConfig stream;
  auto* netcalc = app.add_subcommand("netcalc", "Bandwidth and map-update-frequency calculator");
  netcalc->add_option("--profile", profile, "wifi-5ghz | wifi | 5g-band78 | 5g");
  netcalc->add_option("--robots", robots, "Number of robots")->check(CLI::PositiveNumber);
  netcalc->add_option("--data-per-update", data_per_update, "Megabits per map update")
      ->check(CLI::PositiveNumber);
  netcalc->add_option("--rgb-fps", stream.rgb_fps, "RGB frame rate");
  netcalc->add_option("--rgb-bytes", stream.rgb_bytes, "Bytes per RGB frame");
  netcalc->add_option("--depth-fps", stream.depth_fps, "Depth frame rate");
  netcalc->add_option("--depth-bytes", stream.depth_bytes, "Bytes per depth frame");

  std::string scan_path, pose_text, radar_out;
  double snr_th = 15.0;
  bool radar_frame = false;
  int k = 20;
  double lambda = 2.0;
  auto* btv = app.add_subcommand("radar-btv", "SNR filter, world transform and denoise a radar scan");
  btv->add_option("scan", scan_path, "Radar scan CSV")->required();
  btv->add_option("pose", pose_text, "Camera pose tx,ty,tz,qx,qy,qz,qw or TUM file")->required();
  btv->add_option("--snr-th", snr_th, "SNR threshold in dB");
  btv->add_flag("--radar-frame", radar_frame, "Pose is the radar's own pose, not the camera's");
  btv->add_option("--k", k, "Outlier-removal neighbors");
  btv->add_option("--lambda", lambda, "Outlier-removal multiplier");
  btv->add_option("--out", radar_out, "Write the radar map as PLY");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seed, threads, single, out_dir);
    if (*metrics) return cmd_metrics(ply, scene_path, voxel, region);
    if (*ate) return cmd_ate(est_path, gt_path, no_align, max_dt);
    if (*netcalc) return cmd_netcalc(profile, robots, data_per_update, stream);
    if (*btv) return cmd_radar(scan_path, pose_text, snr_th, radar_frame, k, lambda, radar_out);
  } catch (const StageError& e) {
    std::fprintf(stderr, "error %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
