#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "cradmap/error.hpp"
#include "cradmap/radar.hpp"
#include "outlier_oracle.hpp"

using namespace cradmap;
using namespace cradmap::radar;

namespace {

RadarScan scan_of(std::vector<RadarMeasurement> ms) {
  RadarScan s;
  s.measurements = std::move(ms);
  return s;
}

sim::Box make_box(const Point3& center, const Point3& extents, bool metallic) {
  sim::Box b;
  b.pose = SE3Pose::FromTranslation(center);
  b.extents = extents;
  b.metallic = metallic;
  b.label = metallic ? sim::SurfaceLabel::kMetallicObject : sim::SurfaceLabel::kWall;
  return b;
}

}  // namespace

TEST_CASE("occlusion trigger") {
  CHECK(occlusion_trigger(sim::DepthImage(10, 10, 0.8), 1.5, 0.6));
  CHECK_FALSE(occlusion_trigger(sim::DepthImage(10, 10, 10.0), 1.5, 0.6));
  sim::DepthImage half(10, 10, 5.0);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 10; ++c) half.at(c, r) = 0.5;
  }
  CHECK_FALSE(occlusion_trigger(half, 1.5, 0.6));
  CHECK(occlusion_trigger(half, 1.5, 0.4));
  CHECK_FALSE(occlusion_trigger(sim::DepthImage(10, 10, 0.0), 1.5, 0.1));
  // Sentinels do not count toward the valid pixels.
  sim::DepthImage sparse(10, 10, 0.0);
  sparse.at(0, 0) = 0.5;
  CHECK(occlusion_trigger(sparse, 1.5, 0.5));
  CHECK_THROWS_AS(occlusion_trigger(half, 1.5, 0.0), Error);
}

TEST_CASE("snr filter") {
  const RadarScan s = scan_of({{1, 0, 0, 0, 5}, {2, 0, 0, 0, 15}, {3, 0, 0, 0, 25}});
  const RadarScan f = snr_filter(s, 10.0);
  REQUIRE(f.measurements.size() == 2);
  CHECK(f.measurements[0].snr == 15.0);
  CHECK(f.measurements[1].snr == 25.0);
  CHECK(snr_filter(s, 15.0).measurements.size() == 2);
  CHECK(snr_filter(s, std::numeric_limits<double>::lowest()).measurements == s.measurements);
  CHECK(snr_filter(s, 30.0).measurements.empty());
  CHECK(snr_filter(f, 10.0).measurements == f.measurements);
}

TEST_CASE("to_global") {
  const RadarScan s = scan_of({{1, 0, 0, 0, 20}, {2, M_PI / 2, 0, 0, 20}});
  const PointCloud c = to_global(s, SE3Pose());
  CHECK((c.points[0] - Point3(1, 0, 0)).norm() < 1e-15);
  CHECK((c.points[1] - Point3(0, 2, 0)).norm() < 1e-15);
  const PointCloud up =
      to_global(scan_of({{1, 0, M_PI / 2, 0, 20}}), SE3Pose::FromTranslation({1, 0, 0}));
  CHECK((up.points[0] - Point3(1, 0, 1)).norm() < 1e-15);

  // Isometry.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> r(0.1, 10), th(-3.1, 3.1), ph(-1.5, 1.5);
  std::vector<RadarMeasurement> ms;
  for (int i = 0; i < 40; ++i) ms.push_back({r(rng), th(rng), ph(rng), 0, 20});
  const SE3Pose pose(Eigen::Quaterniond(Eigen::AngleAxisd(1.1, Point3(1, 2, 3).normalized())),
                     Point3(4, -2, 1));
  const PointCloud a = to_global(scan_of(ms), SE3Pose());
  const PointCloud b = to_global(scan_of(ms), pose);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    for (std::size_t j = i + 1; j < ms.size(); ++j) {
      CHECK(std::abs((a.points[i] - a.points[j]).norm() - (b.points[i] - b.points[j]).norm()) <
            1e-9);
    }
  }
}

TEST_CASE("scan validation") {
  CHECK_THROWS_AS(scan_of({{0.0, 0, 0, 0, 1}}).validate(), Error);
  CHECK_THROWS_AS(scan_of({{1.0, -M_PI, 0, 0, 1}}).validate(), Error);
  CHECK_NOTHROW(scan_of({{1.0, M_PI, 0, 0, 1}}).validate());
  CHECK_THROWS_AS(scan_of({{1.0, 0, 1.6, 0, 1}}).validate(), Error);
}

TEST_CASE("denoise") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.05);
  PointCloud pts;
  for (int i = 0; i < 50; ++i) pts.points.emplace_back(1 + g(rng), g(rng), g(rng));
  pts.points.emplace_back(21, 0, 0);
  const RadarMap m = denoise(pts, 10, 2.0);
  for (const Point3& p : m.cloud().points) CHECK(p.x() < 5.0);
  CHECK(m.cloud().points == testing::outlier_oracle(pts.points, 10, 2.0));
  CHECK(denoise(PointCloud{}, 10, 2.0).empty());
  CHECK(denoise(pts, 10, std::numeric_limits<double>::infinity()).cloud().points == pts.points);
}

TEST_CASE("camera mount and process_scan") {
  const SE3Pose m = camera_from_radar();
  // Radar forward (x) is camera forward (z); radar left (y) is camera -x;
  // radar up (z) is camera -y.
  CHECK((m * Point3(1, 0, 0) - Point3(0, 0, 1)).norm() < 1e-15);
  CHECK((m * Point3(0, 1, 0) - Point3(-1, 0, 0)).norm() < 1e-15);
  CHECK((m * Point3(0, 0, 1) - Point3(0, -1, 0)).norm() < 1e-15);

  BtvConfig cfg;
  cfg.mount = SE3Pose();
  std::vector<RadarMeasurement> ms;
  for (int i = 0; i < 30; ++i) ms.push_back({3.0 + 0.001 * i, 0.001 * i, 0, 0, 25});
  ms.push_back({1.0, 0.0, 0.0, 0.0, 5.0});
  const RadarMap map = process_scan(scan_of(ms), SE3Pose::FromTranslation({0, 0, 1}), cfg);
  CHECK(map.size() == 30);
  for (const Point3& p : map.cloud().points) CHECK(p.z() == doctest::Approx(1.0));
}

TEST_CASE("run_btv gate and metal behind a wall") {
  // Plastic wall 0.8 m ahead of the camera, metal plate behind it.
  const sim::Scene scene("btv", {make_box({0, 0, 0.85}, {6, 6, 0.1}, false),
                                 make_box({0, 0, 2.05}, {0.5, 0.5, 0.1}, true)});
  CameraIntrinsics k;
  k.width = 64;
  k.height = 48;
  k.fx = k.fy = 52.5;
  k.cx = 31.5;
  k.cy = 23.5;
  const SE3Pose cam;
  const BtvConfig cfg;
  sim::RadarSimConfig rs;
  rs.rng_seed = 5;
  const RadarScan scan = sim::simulate_radar(scene, cam * cfg.mount, rs);
  const auto depth = sim::render_depth(scene, cam, k, 8.0);
  const auto map = run_btv(depth, scan, cam, cfg);
  REQUIRE(map);
  CHECK(map->size() > 10);
  for (const Point3& p : map->cloud().points) {
    CHECK(p.z() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::abs(p.x()) <= 0.25 + 1e-9);
  }
  const std::vector<std::vector<Point3>> targets{sample_box_surface(scene.boxes()[1], 0.05)};
  CHECK(detection_rate(*map, targets, 0.1) == 100.0);

  // Open view: nothing nearby, no map.
  const sim::Scene open("open", {make_box({0, 0, 6.05}, {20, 20, 0.1}, false)});
  const auto open_depth = sim::render_depth(open, cam, k, 8.0);
  CHECK_FALSE(run_btv(open_depth, sim::simulate_radar(open, cam * cfg.mount, rs), cam, cfg));
}

TEST_CASE("detection rate") {
  const std::vector<std::vector<Point3>> targets{
      {Point3(0, 0, 0)}, {Point3(5, 0, 0)}, {Point3(10, 0, 0)}};
  PointCloud pts;
  for (int i = 0; i < 3; ++i) {
    pts.points.emplace_back(0.01 * i, 0, 0);
    pts.points.emplace_back(5 + 0.01 * i, 0, 0);
  }
  pts.points.emplace_back(10, 0, 0);  // a single hit is not enough
  const RadarMap two = denoise(pts, 50, 1.0);  // fewer than k + 1 points: kept as is
  CHECK(detection_rate(two, targets, 0.1) == doctest::Approx(200.0 / 3.0));
  CHECK(detection_rate(two, targets, 0.1, 1) == doctest::Approx(100.0));
  CHECK(detection_rate(denoise(PointCloud{}, 5, 2), targets, 0.1) == 0.0);
  try {
    detection_rate(two, {}, 0.1);
    FAIL("expected undefined metric");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUndefinedMetric);
  }
  CHECK_THROWS_AS(detection_rate(two, targets, 0.0), Error);
  const std::vector<RadarMap> parts{two, two};
  CHECK(RadarMap::Merge(parts).size() == 2 * two.size());
}

TEST_CASE("radar CSV round-trip") {
  RadarScan s = scan_of({{1.5, 0.1, -0.2, 0.0, 22.5}, {3.25, -0.3, 0.05, 0.0, 4.0}});
  s.timestamp = 12.5;
  const auto path = std::filesystem::temp_directory_path() / "cradmap_scan.csv";
  save_radar_csv(s, path);
  const RadarScan back = load_radar_csv(path);
  CHECK(back.timestamp == 12.5);
  REQUIRE(back.measurements.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.measurements[i].range == doctest::Approx(s.measurements[i].range));
    CHECK(back.measurements[i].azimuth == doctest::Approx(s.measurements[i].azimuth));
    CHECK(back.measurements[i].snr == doctest::Approx(s.measurements[i].snr));
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_radar_csv("/nonexistent/scan.csv"), Error);
}
