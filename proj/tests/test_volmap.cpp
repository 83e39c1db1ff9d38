#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cradmap/error.hpp"
#include "cradmap/volmap.hpp"

using namespace cradmap;
using namespace cradmap::volmap;

namespace {

sim::Box make_box(const Point3& center, const Point3& extents) {
  sim::Box b;
  b.pose = SE3Pose::FromTranslation(center);
  b.extents = extents;
  return b;
}

Keyframe keyframe_with(int robot, int id, std::vector<Point3> pts) {
  Keyframe kf;
  kf.robot_id = robot;
  kf.keyframe_id = id;
  kf.cloud.points = std::move(pts);
  return kf;
}

std::vector<Point3> random_points(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return pts;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("assemble_map transforms by refined poses") {
  std::mt19937_64 rng(1);
  const auto pts = random_points(rng, 50, -1, 1);
  const std::vector<Keyframe> one{keyframe_with(0, 0, pts)};
  const GlobalMap id = assemble_map(one, {{{0, 0}, SE3Pose()}}, 0.05);
  CHECK(id.cloud.points == pts);
  CHECK(id.keyframe_count == 1);
  const Point3 t(0.3, -1.2, 2.0);
  const GlobalMap moved = assemble_map(one, {{{0, 0}, SE3Pose::FromTranslation(t)}}, 0.05);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(moved.cloud.points[i] == pts[i] + t);
  CHECK(moved.grid == VoxelGrid::FromCloud(moved.cloud.points, Point3::Zero(), 0.05));

  std::vector<Keyframe> two{keyframe_with(0, 0, pts), keyframe_with(0, 1, random_points(rng, 30, 0, 1))};
  CHECK(assemble_map(two, {{{0, 0}, SE3Pose()}, {{0, 1}, SE3Pose()}}, 0.05).cloud.size() == 80);
  try {
    assemble_map(two, {{{0, 0}, SE3Pose()}}, 0.05);
    FAIL("expected missing pose");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingPose);
    CHECK(std::string(e.what()).find("(0, 1)") != std::string::npos);
  }
}

TEST_CASE("voxel grid indexing") {
  const VoxelGrid g(Point3(1, 1, 1), 0.5);
  CHECK(g.index_of({1.0, 1.49, 0.99}) == VoxelIndex{0, 0, -1});
  CHECK(g.index_of({2.0, 0.0, 1.5}) == VoxelIndex{2, -2, 1});
  std::mt19937_64 rng(3);
  const auto pts = random_points(rng, 200, -2, 2);
  CHECK(VoxelGrid::FromCloud(pts, Point3::Zero(), 0.1) ==
        VoxelGrid::FromCloud(pts, Point3::Zero(), 0.1));
  CHECK_THROWS_AS(VoxelGrid(Point3::Zero(), 0.0), Error);
}

TEST_CASE("coverage of one face of a cube") {
  // Unit cube box, voxel 2 cm, region offset half a voxel so faces sit on
  // voxel centers. Independent count: an (n+1)^3 block minus its (n-1)^3
  // interior, one face holds (n+1)^2.
  const int n = 50;
  const double v = 1.0 / n;
  const sim::Scene scene("cube", {make_box({0.5, 0.5, 0.5}, {1, 1, 1})});
  const Bounds region{Point3::Constant(-0.5 * v), Point3::Constant(1 + 0.5 * v)};
  const double total = std::pow(n + 1, 3) - std::pow(n - 1, 3);
  CHECK(surface_voxels(scene, region, v).size() == static_cast<std::size_t>(total));

  PointCloud face;
  for (int j = 0; j <= n; ++j) {
    for (int k = 0; k <= n; ++k) face.points.emplace_back(0.0, j * v, k * v);
  }
  const double cov = coverage(face, scene, region, v);
  CHECK(cov == doctest::Approx(100.0 * (n + 1) * (n + 1) / total).epsilon(1e-12));
  const double quantum = 100.0 * 4 * n / total;  // one face's edge ring
  CHECK(std::abs(cov - 100.0 / 6.0) <= quantum);

  // Every surface voxel hit.
  PointCloud all;
  for (const VoxelIndex& idx : surface_voxels(scene, region, v)) {
    all.points.push_back(region.min + v * (Point3(idx[0], idx[1], idx[2]) + Point3::Constant(0.5)));
  }
  CHECK(coverage(all, scene, region, v) == doctest::Approx(100.0));
  CHECK(coverage(PointCloud{}, scene, region, v) == 0.0);

  const Bounds outside{Point3(5, 5, 5), Point3(6, 6, 6)};
  try {
    coverage(all, scene, outside, v);
    FAIL("expected undefined metric");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUndefinedMetric);
  }
}

TEST_CASE("surface voxels of a face clipped by the region") {
  const sim::Scene scene("wall", {make_box({0, 0, 0}, {0.1, 10, 10})});
  const Bounds region{Point3(-1, -0.5, -0.5), Point3(1, 0.5, 0.5)};
  // Two faces of the wall inside the region (x = -0.05 and x = 0.05), each
  // 10 x 10 voxels of 10 cm.
  CHECK(surface_voxels(scene, region, 0.1).size() == 200);
}

TEST_CASE("coverage never decreases as keyframes are added") {
  const sim::Scene scene("cube", {make_box({0.5, 0.5, 0.5}, {1, 1, 1})});
  const Bounds region{Point3::Constant(-0.05), Point3::Constant(1.05)};
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  PointCloud cloud;
  double last = 0.0;
  for (int kf = 0; kf < 10; ++kf) {
    for (int i = 0; i < 40; ++i) cloud.points.emplace_back(u(rng), u(rng), kf % 2 ? 0.0 : 1.0);
    const double c = coverage(cloud, scene, region, 0.1);
    CHECK(c >= last);
    last = c;
  }
}

TEST_CASE("density") {
  std::mt19937_64 rng(5);
  PointCloud cloud;
  cloud.points = random_points(rng, 1000, 0.0, 1.0);
  for (Point3& p : cloud.points) p.x() *= 2.0;
  const Bounds region{Point3::Zero(), Point3(2, 1, 1)};
  CHECK(density(cloud, region) == doctest::Approx(500.0));
  CHECK(density(PointCloud{}, region) == 0.0);
  CHECK_THROWS_AS(density(cloud, Bounds{Point3::Zero(), Point3(0, 1, 1)}), Error);

  // Rigid invariance: move the points and the region by the same
  // translation.
  const SE3Pose t = SE3Pose::FromTranslation({3.0, -1.0, 0.5});
  PointCloud moved;
  for (const Point3& p : cloud.points) moved.points.push_back(t * p);
  const Bounds moved_region{t * region.min, t * region.max};
  CHECK(density(moved, moved_region) == doctest::Approx(density(cloud, region)));
}

TEST_CASE("occupied extent and explored region") {
  PointCloud wall;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) wall.points.emplace_back(1.02, 0.05 * i, 0.05 * j);
  }
  const Bounds region{Point3(0, 0, 0), Point3(2, 1, 1)};
  CHECK(occupied_extent(wall, region, 0, 0.05) == doctest::Approx(0.05));
  PointCloud thick = wall;
  for (Point3 p : wall.points) thick.points.push_back(p + Point3(0.3, 0, 0));
  CHECK(occupied_extent(thick, region, 0, 0.05) == doctest::Approx(0.35));
  CHECK(occupied_extent(PointCloud{}, region, 0, 0.05) == 0.0);

  CameraIntrinsics k;
  k.width = 64;
  k.height = 48;
  k.fx = k.fy = 50;
  k.cx = 31.5;
  k.cy = 23.5;
  const sim::Scene scene("w", {make_box({0, 0, 3.05}, {4, 4, 0.1})});
  const std::vector<SE3Pose> poses{SE3Pose()};
  const Bounds e = explored_region(scene, poses, k, 8.0, 4, 0.01);
  CHECK(e.min.z() == doctest::Approx(2.99));
  CHECK(e.max.z() == doctest::Approx(3.01));
  CHECK(e.min.x() < -1.5);
  CHECK(e.max.x() > 1.5);
}

TEST_CASE("sparse map uses feature observations only") {
  CameraIntrinsics k;
  Keyframe kf = keyframe_with(0, 0, {Point3(0, 0, 1)});
  sim::FeatureObservation o;
  o.pixel = PixelCoord(k.cx, k.cy);
  o.depth = 2.0;
  kf.observations = {o, o};
  const std::vector<Keyframe> kfs{kf};
  const GlobalMap m =
      assemble_sparse_map(kfs, {{{0, 0}, SE3Pose::FromTranslation({1, 0, 0})}}, k, 0.05);
  REQUIRE(m.cloud.size() == 2);
  CHECK((m.cloud.points[0] - Point3(1, 0, 2)).norm() < 1e-12);
}

TEST_CASE("PLY export and import") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto empty_path = dir / "cradmap_empty.ply";
  export_ply(PointCloud{}, empty_path);
  CHECK(slurp(empty_path).find("element vertex 0\n") != std::string::npos);
  CHECK(import_ply(empty_path).empty());

  PointCloud three;
  three.points = {Point3(1, 2, 3), Point3(-0.5, 0.25, 1e-7), Point3(123.4567891, -9, 0)};
  const auto path = dir / "cradmap_three.ply";
  export_ply(three, path);
  const std::string text = slurp(path);
  CHECK(text.rfind("ply\nformat ascii 1.0\n", 0) == 0);
  CHECK(text.find("element vertex 3\n") != std::string::npos);
  const std::string body = text.substr(text.find("end_header\n") + 11);
  CHECK(std::count(body.begin(), body.end(), '\n') == 3);

  std::mt19937_64 rng(6);
  PointCloud many;
  many.points = random_points(rng, 500, -50, 50);
  export_ply(many, path);
  const PointCloud back = import_ply(path);
  REQUIRE(back.size() == many.size());
  for (std::size_t i = 0; i < many.size(); ++i) {
    CHECK((back.points[i] - many.points[i]).cwiseAbs().maxCoeff() <= 5e-7 + 1e-12);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(empty_path);
  CHECK_THROWS_AS(export_ply(three, "/nonexistent/dir/x.ply"), Error);
  CHECK_THROWS_AS(import_ply("/nonexistent/dir/x.ply"), Error);
}
