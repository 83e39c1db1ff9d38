#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include "cradmap/error.hpp"
#include "cradmap/simworld.hpp"

using namespace cradmap;
using namespace cradmap::sim;

namespace {

CameraIntrinsics small_k() {
  CameraIntrinsics k;
  k.fx = k.fy = 40.0;
  k.cx = k.cy = 10.0;
  k.width = k.height = 21;
  return k;
}

Box make_box(const Point3& center, const Point3& extents, bool metallic = false,
             SurfaceLabel label = SurfaceLabel::kWall) {
  Box b;
  b.name = "b";
  b.pose = SE3Pose::FromTranslation(center);
  b.extents = extents;
  b.metallic = metallic;
  b.label = metallic ? SurfaceLabel::kMetallicObject : label;
  return b;
}

bool inside(const Box& b, const Point3& p) {
  return (p.array() >= b.min_corner().array()).all() &&
         (p.array() <= b.max_corner().array()).all();
}

// Marches along the ray in fixed steps and bisects the first crossing.
double march_depth(const Box& b, const SE3Pose& cam, const CameraIntrinsics& k,
                   const PixelCoord& u, double max_range) {
  const Eigen::Vector3d ray_cam((u.x() - k.cx) / k.fx, (u.y() - k.cy) / k.fy, 1.0);
  const Eigen::Vector3d dir = cam.rotation() * ray_cam;  // z component 1 in camera
  const Point3 o = cam.translation();
  const double step = 1e-4;
  for (double s = step; s <= max_range; s += step) {
    if (inside(b, o + s * dir)) {
      double lo = s - step, hi = s;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (inside(b, o + mid * dir) ? hi : lo) = mid;
      }
      return hi;  // depth along the optical axis equals the ray parameter here
    }
  }
  return 0.0;
}

SE3Pose look(const Point3& position, double yaw) {
  Matrix3 r;
  r.col(0) = Point3(std::sin(yaw), -std::cos(yaw), 0.0);
  r.col(1) = Point3(0.0, 0.0, -1.0);
  r.col(2) = Point3(std::cos(yaw), std::sin(yaw), 0.0);
  return SE3Pose(Eigen::Quaterniond(r), position);
}

}  // namespace

TEST_CASE("render_depth facing a wall") {
  const CameraIntrinsics k = small_k();
  const Scene scene("wall", {make_box({0, 0, 2.5}, {1000, 1000, 1})});
  const DepthImage img = render_depth(scene, SE3Pose::Identity(), k, 8.0);
  CHECK(img.at(10, 10) == 2.0);
  for (double d : img.depth) CHECK(d == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("render_depth of an empty scene") {
  const Scene scene("empty", {});
  const DepthImage img = render_depth(scene, SE3Pose::Identity(), small_k(), 8.0);
  CHECK(img.width == 21);
  CHECK(std::all_of(img.depth.begin(), img.depth.end(), [](double d) { return d == 0.0; }));
}

TEST_CASE("render_depth matches a ray-marching oracle") {
  const CameraIntrinsics k = small_k();
  const Box b = make_box({2.5, 0.2, 1.1}, {1.0, 1.0, 1.0});
  const Scene scene("unit", {b});
  const SE3Pose cam = look({0.0, 0.0, 1.0}, 0.1);
  const DepthImage img = render_depth(scene, cam, k, 8.0);
  int hits = 0;
  for (int r = 0; r < k.height; ++r) {
    for (int c = 0; c < k.width; ++c) {
      const double oracle = march_depth(b, cam, k, PixelCoord(c, r), 8.0);
      CHECK(std::abs(img.at(c, r) - oracle) < 1e-6);
      hits += oracle > 0.0;
    }
  }
  CHECK(hits > 50);
  CHECK(hits < k.width * k.height);
  // Max range cuts returns.
  const DepthImage near = render_depth(scene, cam, k, 1.0);
  CHECK(std::all_of(near.depth.begin(), near.depth.end(), [](double d) { return d == 0.0; }));
}

TEST_CASE("observe_features consistency, occlusion and determinism") {
  CameraIntrinsics k = small_k();
  k.width = 161;
  k.height = 121;
  k.fx = k.fy = 120.0;
  k.cx = 80.0;
  k.cy = 60.0;
  // Back wall at x = 4; an occluding panel at x = 2 covers part of the view.
  const Scene scene("occl",
                    {make_box({4.05, 0, 1}, {0.1, 6, 4}), make_box({2.05, -0.6, 1}, {0.1, 0.8, 4})},
                    20.0, 3);
  const SE3Pose cam = look({0, 0, 1}, 0.0);
  const auto obs = observe_features(scene, cam, k, 0.0, 1);
  REQUIRE(obs.size() > 20);
  std::map<int, Landmark> by_id;
  for (const Landmark& l : scene.landmarks()) by_id[l.id] = l;
  for (const auto& o : obs) {
    const Landmark& l = by_id.at(o.landmark_id);
    CHECK((project(cam.inverse(), l.position, k) - o.pixel).norm() < 1e-9);
    CHECK(o.depth == doctest::Approx((cam.inverse() * l.position).z()).epsilon(1e-12));
    CHECK(k.contains(o.pixel));
    CHECK(std::abs(depth_along_ray(scene, cam, k, o.pixel, 8.0) - o.depth) < 1e-9);
  }
  CHECK(std::is_sorted(obs.begin(), obs.end(),
                       [](const auto& a, const auto& b) { return a.landmark_id < b.landmark_id; }));
  // Back-wall landmarks hidden by the panel never appear.
  int hidden = 0;
  for (const Landmark& l : scene.landmarks()) {
    if (l.box_index != 0 || l.position.x() > 4.0) continue;
    const Point3 c = cam.inverse() * l.position;
    const PixelCoord px(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy);
    if (!k.contains(px)) continue;
    const double s = 2.0 / l.position.x();
    const Point3 at_panel = cam.translation() + s * (l.position - cam.translation());
    if (at_panel.y() > -1.0 && at_panel.y() < -0.2) {
      ++hidden;
      CHECK(std::none_of(obs.begin(), obs.end(),
                         [&](const auto& o) { return o.landmark_id == l.id; }));
    }
  }
  CHECK(hidden > 0);
  const auto a = observe_features(scene, cam, k, 0.7, 99);
  const auto b = observe_features(scene, cam, k, 0.7, 99);
  CHECK(a == b);
  CHECK_FALSE(a == observe_features(scene, cam, k, 0.7, 100));
}

TEST_CASE("rendered depth agrees with observed landmark depths") {
  const CameraIntrinsics k = small_k();
  const Scene scene("room", {make_box({3.05, 0, 1}, {0.1, 4, 4}), make_box({0, 2.05, 1}, {6, 0.1, 4})},
                    40.0, 8);
  const SE3Pose cam = look({0, 0, 1}, 0.3);
  const DepthImage img = render_depth(scene, cam, k, 8.0);
  for (const auto& o : observe_features(scene, cam, k, 0.0, 2)) {
    const int c = static_cast<int>(std::lround(o.pixel.x()));
    const int r = static_cast<int>(std::lround(o.pixel.y()));
    // Within one pixel the depth of a plane changes by less than its slope.
    CHECK(std::abs(img.at(c, r) - o.depth) < 0.05 * o.depth);
  }
}

TEST_CASE("simulate_radar penetrates non-metallic surfaces") {
  const Scene scene("btv", {make_box({1.05, 0, 0}, {0.1, 4, 4}),
                            make_box({3.05, 0, 0}, {0.1, 1, 1}, true)});
  RadarSimConfig cfg;
  cfg.rng_seed = 4;
  const RadarScan scan = simulate_radar(scene, SE3Pose::Identity(), cfg);
  bool wall = false, plate = false;
  for (const auto& m : scan.measurements) {
    if (std::abs(m.range - 1.0) < 0.05) {
      wall = true;
      CHECK(m.snr < 15.0);
    }
    if (std::abs(m.range - 3.0) < 0.05) {
      plate = true;
      CHECK(m.snr > 15.0);
    }
    CHECK(m.doppler == 0.0);
  }
  CHECK(wall);
  CHECK(plate);
  CHECK_NOTHROW(scan.validate());
  CHECK(simulate_radar(Scene("empty", {}), SE3Pose::Identity(), cfg).measurements.empty());
}

TEST_CASE("radar SNR model separation") {
  const Scene scene("btv", {make_box({1.05, 0, 0}, {0.1, 4, 4}),
                            make_box({3.05, 0, 0}, {0.1, 1, 1}, true)});
  double sum_m = 0, sum_n = 0, min_m = 1e9, max_n = -1e9;
  int n_m = 0, n_n = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RadarSimConfig cfg;
    cfg.rng_seed = seed;
    for (const auto& m : simulate_radar(scene, SE3Pose::Identity(), cfg).measurements) {
      if (m.range > 2.0) {
        sum_m += m.snr;
        min_m = std::min(min_m, m.snr);
        ++n_m;
      } else {
        sum_n += m.snr;
        max_n = std::max(max_n, m.snr);
        ++n_n;
      }
    }
  }
  const RadarSimConfig def;
  const double margin = def.metallic_snr_mean - def.non_metallic_snr_mean;
  CHECK(sum_m / n_m - sum_n / n_n == doctest::Approx(margin).epsilon(0.02));
  CHECK(min_m > 15.0);
  CHECK(max_n < 15.0);
}

TEST_CASE("noisy_odometry") {
  Trajectory traj;
  for (int i = 0; i <= 100; ++i) {
    const double a = 2 * M_PI * i / 100;
    traj.poses.push_back({0.1 * i, look({3 * std::cos(a), 3 * std::sin(a), 1}, a + M_PI / 2)});
  }
  const auto exact = noisy_odometry(traj, 5);
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const SE3Pose delta = traj.poses[i].pose.inverse() * traj.poses[i + 1].pose;
    CHECK(exact[i] == delta);
  }
  traj.sigma_trans = 0.01;
  const auto noisy = noisy_odometry(traj, 5);
  SE3Pose end = traj.poses.front().pose;
  for (const SE3Pose& inc : noisy) end = end * inc;
  CHECK(translation_distance(end, traj.poses.back().pose) > 0.0);
  const auto again = noisy_odometry(traj, 5);
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    CHECK(noisy[i].translation() == again[i].translation());
    CHECK(noisy[i].rotation().coeffs() == again[i].rotation().coeffs());
  }
  Trajectory single;
  single.poses.push_back({0.0, SE3Pose()});
  CHECK_THROWS_AS(noisy_odometry(single, 1), Error);
}

TEST_CASE("trajectory validation") {
  Trajectory t;
  t.poses = {{0.0, SE3Pose()}, {0.1, SE3Pose::FromTranslation({0.1, 0, 0})}};
  CHECK_NOTHROW(t.validate());
  t.poses[1].timestamp = 0.0;
  CHECK_THROWS_AS(t.validate(), Error);
  t.poses[1] = {0.1, SE3Pose::FromRotation(Eigen::Quaterniond(
                         Eigen::AngleAxisd(2.0, Eigen::Vector3d::UnitZ())))};
  CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("scene validation and file round-trip") {
  CHECK_THROWS_AS(Scene("bad", {make_box({0, 0, 0}, {1, 0, 1})}), Error);
  Box rotated = make_box({0, 0, 0}, {1, 1, 1});
  rotated.pose = SE3Pose(Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitZ())),
                         Point3::Zero());
  CHECK_THROWS_AS(Scene("bad", {rotated}), Error);

  const Scene scene("rt", {make_box({1, 2, 3}, {0.5, 1.5, 2.0}, true),
                           make_box({0, 0, -0.05}, {4, 4, 0.1}, false, SurfaceLabel::kFloor)},
                    10.0, 21);
  for (const Landmark& l : scene.landmarks()) {
    const Box& b = scene.boxes()[l.box_index];
    const Point3 lo = b.min_corner(), hi = b.max_corner();
    CHECK(inside(b, l.position));
    bool on_face = false;
    for (int a = 0; a < 3; ++a) {
      on_face |= l.position[a] == lo[a] || l.position[a] == hi[a];
    }
    CHECK(on_face);
  }
  const auto path = std::filesystem::temp_directory_path() / "cradmap_scene_rt.json";
  save_scene(scene, 10.0, 21, path);
  const Scene loaded = load_scene(path);
  REQUIRE(loaded.boxes().size() == 2);
  CHECK(loaded.boxes()[0].metallic);
  CHECK(loaded.boxes()[1].label == SurfaceLabel::kFloor);
  CHECK(loaded.boxes()[0].extents == scene.boxes()[0].extents);
  REQUIRE(loaded.landmarks().size() == scene.landmarks().size());
  for (std::size_t i = 0; i < scene.landmarks().size(); ++i) {
    CHECK(loaded.landmarks()[i].position == scene.landmarks()[i].position);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_scene("/nonexistent/scene.json"), Error);
}
